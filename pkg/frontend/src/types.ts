/**
 * Wire types for the session service API. The UI renders these verbatim:
 * it never re-computes alignment or conflict data on the client.
 */

export interface PolicyFilePayload {
  lang: string;
  domain_id: string;
  text: string;
}

export interface CreateSessionRequest {
  support: unknown;
  policies: PolicyFilePayload[];
  cfg?: Record<string, number>;
}

export interface SessionSummary {
  NamingSynonym: number;
  NamingHomonym: number;
  ModalityOpposition: number;
  open: number;
  resolved: number;
}

export interface CreateSessionResponse {
  session_id: string;
  summary: SessionSummary;
}

export interface ConceptRefPayload {
  sop_id: string;
  concept_id: string;
}

export interface ActionPayload {
  kind: "rename" | "merge" | "delete";
  conflict_id: string;
  decided_by: string;
  auto_default?: boolean;
  targets?: ConceptRefPayload[];
  new_label?: string;
  survivor?: ConceptRefPayload;
  absorbed?: ConceptRefPayload;
  concept?: ConceptRefPayload;
}

export interface ProposalsPayload {
  actions: ActionPayload[];
  advisory: string | null;
}

export interface FragmentChild {
  concept_id: string;
  label: string;
  kind: string;
}

export interface PolicyFragment {
  policy_id: string;
  policy_concept: string;
  children: FragmentChild[];
}

export interface FragmentSide {
  sop_id: string;
  concept_id: string | null;
  label: string | null;
  anchor: string | null;
  fragments: PolicyFragment[];
}

export interface ConflictFragments {
  left?: FragmentSide;
  right?: FragmentSide;
  shared_anchor?: { concept_id: string; label: string | null };
}

export interface ConflictRecordPayload {
  id: string;
  kind: "NamingSynonym" | "NamingHomonym" | "ModalityOpposition";
  form: "Vertical" | "Horizontal";
  status: "Open" | "Resolved";
  policies: string[];
  payload: Record<string, any>;
  proposals: ProposalsPayload;
  fragments: ConflictFragments;
}

export interface ConflictsResponse {
  session_id: string;
  summary: SessionSummary;
  conflicts: ConflictRecordPayload[];
  resolved: ConflictRecordPayload[];
}

export interface DecisionResponse {
  session_id: string;
  summary: SessionSummary;
  resulting_status: string;
  effects: { changes: Record<string, any>[] };
}

export interface ApiErrorBody {
  code: string;
  message: string;
  location?: { line?: number; col?: number; path?: string; domain_id?: string };
}
