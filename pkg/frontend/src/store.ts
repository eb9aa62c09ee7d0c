/**
 * Review-session state machine. Holds only what came back from the API
 * plus UI selection; every mutation round-trips to the service and then
 * re-fetches, so reloading the page reproduces the same screen.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  ActionPayload,
  ConflictRecordPayload,
  ConflictsResponse,
  PolicyFilePayload,
  SessionSummary,
} from "./types.js";

export interface DecisionHistoryEntry {
  conflictId: string;
  conflictKind: string;
  action: ActionPayload;
  resultingStatus: string;
  changes: Record<string, any>[];
}

export interface ReviewState {
  phase: "idle" | "loading" | "review";
  sessionId: string | null;
  summary: SessionSummary | null;
  conflicts: ConflictRecordPayload[];
  resolved: ConflictRecordPayload[];
  selectedId: string | null;
  history: DecisionHistoryEntry[];
  uploadError: string | null;
  decisionError: string | null;
  submitting: boolean;
}

export function initialState(): ReviewState {
  return {
    phase: "idle",
    sessionId: null,
    summary: null,
    conflicts: [],
    resolved: [],
    selectedId: null,
    history: [],
    uploadError: null,
    decisionError: null,
    submitting: false,
  };
}

export function kindLabel(kind: string): string {
  switch (kind) {
    case "NamingSynonym":
      return "naming conflict (synonym)";
    case "NamingHomonym":
      return "naming conflict (homonym)";
    case "ModalityOpposition":
      return "modality opposition";
    default:
      return kind;
  }
}

/** Badge line for one open conflict, e.g. "1 naming conflict (synonym), vertical". */
export function conflictBadge(record: ConflictRecordPayload, count = 1): string {
  return `${count} ${kindLabel(record.kind)}, ${record.form.toLowerCase()}`;
}

export function summaryBadges(summary: SessionSummary): string[] {
  const badges: string[] = [];
  if (summary.NamingSynonym) {
    badges.push(`${summary.NamingSynonym} naming conflict (synonym)`);
  }
  if (summary.NamingHomonym) {
    badges.push(`${summary.NamingHomonym} naming conflict (homonym)`);
  }
  if (summary.ModalityOpposition) {
    badges.push(`${summary.ModalityOpposition} modality opposition`);
  }
  if (!badges.length) badges.push("no open conflicts");
  return badges;
}

export class ReviewStore {
  state: ReviewState = initialState();
  private listeners: Array<(state: ReviewState) => void> = [];

  constructor(private api: ApiClient) {}

  subscribe(listener: (state: ReviewState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  /** Client-side mirror of the API precondition: two or more policy files. */
  validateUpload(support: unknown | null, policies: PolicyFilePayload[]): string | null {
    if (!support) return "select a support ontology document";
    if (policies.length < 2) return "select at least 2 policy files to align";
    const domains = policies.map((p) => p.domain_id);
    if (new Set(domains).size !== domains.length) {
      return "domain ids must be distinct";
    }
    return null;
  }

  async startSession(support: unknown, policies: PolicyFilePayload[]): Promise<void> {
    const invalid = this.validateUpload(support, policies);
    if (invalid) {
      this.state = { ...this.state, uploadError: invalid };
      this.emit();
      return;
    }
    this.state = { ...this.state, phase: "loading", uploadError: null };
    this.emit();
    try {
      const created = await this.api.createSession({ support, policies });
      this.state = {
        ...initialState(),
        phase: "review",
        sessionId: created.session_id,
        summary: created.summary,
      };
      await this.refreshConflicts();
    } catch (error) {
      this.state = {
        ...this.state,
        phase: "idle",
        uploadError: describeError(error),
      };
      this.emit();
    }
  }

  async refreshConflicts(): Promise<void> {
    if (!this.state.sessionId) return;
    const body: ConflictsResponse = await this.api.getConflicts(this.state.sessionId);
    const selected = this.state.selectedId;
    const stillThere =
      body.conflicts.some((c) => c.id === selected) ||
      body.resolved.some((c) => c.id === selected);
    this.state = {
      ...this.state,
      phase: "review",
      summary: body.summary,
      conflicts: body.conflicts,
      resolved: body.resolved,
      selectedId: stillThere ? selected : body.conflicts[0]?.id ?? null,
    };
    this.emit();
  }

  select(conflictId: string): void {
    this.state = { ...this.state, selectedId: conflictId, decisionError: null };
    this.emit();
  }

  selectedConflict(): ConflictRecordPayload | null {
    const id = this.state.selectedId;
    if (!id) return null;
    return (
      this.state.conflicts.find((c) => c.id === id) ??
      this.state.resolved.find((c) => c.id === id) ??
      null
    );
  }

  /** Export only unlocks once every conflict is settled. */
  exportEnabled(): boolean {
    return this.state.phase === "review" && (this.state.summary?.open ?? 1) === 0;
  }

  async submitDecision(conflict: ConflictRecordPayload, action: ActionPayload): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId || this.state.submitting) return;
    if (conflict.status !== "Open") {
      this.state = { ...this.state, decisionError: "conflict is already resolved" };
      this.emit();
      return;
    }
    this.state = { ...this.state, submitting: true, decisionError: null };
    this.emit();
    const { auto_default, ...wire } = action;
    try {
      const outcome = await this.api.postDecision(sessionId, conflict.id, wire);
      this.state = {
        ...this.state,
        submitting: false,
        history: [
          ...this.state.history,
          {
            conflictId: conflict.id,
            conflictKind: conflict.kind,
            action,
            resultingStatus: outcome.resulting_status,
            changes: outcome.effects.changes,
          },
        ],
      };
      await this.refreshConflicts();
    } catch (error) {
      // state unchanged apart from the inline message
      this.state = {
        ...this.state,
        submitting: false,
        decisionError: describeError(error),
      };
      this.emit();
    }
  }
}

export function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    const where = error.locationText();
    return where ? `${error.body.message} (${where})` : error.body.message;
  }
  return error instanceof Error ? error.message : String(error);
}
