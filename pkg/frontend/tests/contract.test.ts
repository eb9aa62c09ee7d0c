/**
 * Contract tests against recorded API fixtures of the worked two-domain
 * session (see scripts/record_ui_fixtures.py in the repository root).
 * The fake client replays exactly what the service returned, including the
 * rejected second decision.
 */

import { describe, expect, it } from "vitest";

import createSession from "../fixtures/create_session.json";
import conflictsOpen from "../fixtures/conflicts_open.json";
import conflictsResolved from "../fixtures/conflicts_resolved.json";
import decisionApplied from "../fixtures/decision_applied.json";
import decisionRejected from "../fixtures/decision_rejected.json";
import parseError from "../fixtures/create_session_parse_error.json";

import { ApiClient, ApiError } from "../src/api.js";
import {
  ReviewStore,
  conflictBadge,
  summaryBadges,
} from "../src/store.js";
import {
  renderConflictList,
  renderDetail,
  renderExportBar,
  renderSummary,
} from "../src/render.js";
import type {
  ConflictsResponse,
  CreateSessionRequest,
  CreateSessionResponse,
  DecisionResponse,
} from "../src/types.js";

class FixtureApiClient implements ApiClient {
  decided = false;
  failCreate = false;

  async createSession(body: CreateSessionRequest): Promise<CreateSessionResponse> {
    if (this.failCreate) {
      throw new ApiError(parseError.status, parseError.body as any);
    }
    return createSession as CreateSessionResponse;
  }

  async getConflicts(): Promise<ConflictsResponse> {
    return (this.decided ? conflictsResolved : conflictsOpen) as ConflictsResponse;
  }

  async postDecision(
    _sid: string,
    _cid: string,
    _action: Record<string, unknown>,
  ): Promise<DecisionResponse> {
    if (this.decided) {
      throw new ApiError(decisionRejected.status, decisionRejected.body as any);
    }
    this.decided = true;
    return decisionApplied as DecisionResponse;
  }

  exportUrl(sessionId: string, what: string, format = "canonical"): string {
    return `/sessions/${sessionId}/export?what=${what}&format=${format}`;
  }
}

const SUPPORT_DOC = { id: "security-core", concepts: [], relations: [] };
const POLICY_A = { lang: "rei", domain_id: "a", text: "has(P, permit(x, []))." };
const POLICY_B = { lang: "rei", domain_id: "b", text: "has(Q, allow(x, []))." };

async function reviewSession(api = new FixtureApiClient()) {
  const store = new ReviewStore(api);
  await store.startSession(SUPPORT_DOC, [POLICY_A, POLICY_B]);
  return { api, store };
}

describe("session start", () => {
  it("shows the conflict badge for the worked example", async () => {
    const { store } = await reviewSession();
    expect(store.state.phase).toBe("review");
    expect(summaryBadges(store.state.summary!)).toEqual([
      "1 naming conflict (synonym)",
    ]);
    const record = store.state.conflicts[0];
    expect(conflictBadge(record)).toBe("1 naming conflict (synonym), vertical");
    const summaryHtml = renderSummary(store.state);
    expect(summaryHtml).toContain("1 naming conflict (synonym)");
    expect(summaryHtml).toContain('data-open="1"');
  });

  it("blocks submission with fewer than two policy files", async () => {
    const store = new ReviewStore(new FixtureApiClient());
    await store.startSession(SUPPORT_DOC, [POLICY_A]);
    expect(store.state.phase).toBe("idle");
    expect(store.state.uploadError).toMatch(/at least 2 policy files/);
  });

  it("requires a support ontology", async () => {
    const store = new ReviewStore(new FixtureApiClient());
    await store.startSession(null, [POLICY_A, POLICY_B]);
    expect(store.state.uploadError).toMatch(/support ontology/);
  });

  it("surfaces parse errors verbatim with their location", async () => {
    const api = new FixtureApiClient();
    api.failCreate = true;
    const store = new ReviewStore(api);
    await store.startSession(SUPPORT_DOC, [POLICY_A, POLICY_B]);
    expect(store.state.phase).toBe("idle");
    expect(store.state.uploadError).toContain("expected argument list");
    expect(store.state.uploadError).toContain("line 1");
    expect(store.state.uploadError).toContain("domain a");
  });
});

describe("conflict detail", () => {
  it("lists both fragments, the shared anchor and 4 proposals with the default marked", async () => {
    const { store } = await reviewSession();
    const record = store.selectedConflict()!;
    expect(record.proposals.actions).toHaveLength(4);
    expect(record.proposals.actions[0].auto_default).toBe(true);
    expect(record.proposals.actions[0].kind).toBe("rename");
    expect(record.proposals.actions[0].new_label).toBe("permit");

    const html = renderDetail(store.state, record);
    expect(html).toContain("<mark>permit</mark>");
    expect(html).toContain("<mark>allow</mark>");
    expect(html).toContain("shared support anchor");
    expect(html).toContain("security-core#Permit");
    expect(html.match(/class="proposal"/g)).toHaveLength(4);
    expect(html.match(/default-mark/g)).toHaveLength(1);
    // left fragment shows the policy children coming from the API, nothing else
    expect(html).toContain("usePrintingService");
    expect(html).toContain("ITDepartment");
  });

  it("renders every displayed number straight from the API payload", async () => {
    const { store } = await reviewSession();
    expect(store.state.summary).toEqual((createSession as any).summary);
    expect(store.state.conflicts).toHaveLength(
      (conflictsOpen as any).conflicts.length,
    );
  });
});

describe("submitting the default action", () => {
  it("empties the open list, records history and enables export", async () => {
    const { store } = await reviewSession();
    const record = store.selectedConflict()!;
    expect(store.exportEnabled()).toBe(false);
    expect(renderExportBar(store.state, store.exportEnabled())).toContain(
      "disabled",
    );

    await store.submitDecision(record, record.proposals.actions[0]);

    expect(store.state.conflicts).toHaveLength(0);
    expect(store.state.resolved).toHaveLength(1);
    expect(store.state.summary!.open).toBe(0);
    expect(store.exportEnabled()).toBe(true);

    const listHtml = renderConflictList(store.state);
    expect(listHtml).toContain("no open conflicts");
    expect(listHtml).toContain("resolved");

    const exportHtml = renderExportBar(store.state, store.exportEnabled());
    expect(exportHtml).toContain('data-enabled="true"');
    expect(exportHtml).not.toContain("disabled");

    expect(store.state.history).toHaveLength(1);
    expect(store.state.history[0].resultingStatus).toBe("Resolved");
  });

  it("disables proposals on a resolved conflict", async () => {
    const { store } = await reviewSession();
    const record = store.selectedConflict()!;
    await store.submitDecision(record, record.proposals.actions[0]);
    const resolved = store.state.resolved[0];
    const html = renderDetail(store.state, resolved);
    expect(html).toContain("resolved — proposals disabled");
    expect(html).toContain("disabled");
  });

  it("shows the service rejection inline and keeps state when raced", async () => {
    const { api, store } = await reviewSession();
    const record = store.selectedConflict()!;
    await store.submitDecision(record, record.proposals.actions[0]);
    // a raced double-submit: the service answers already-resolved
    api.decided = true;
    const stale = { ...record };
    await store.submitDecision(stale as any, record.proposals.actions[0]);
    expect(store.state.decisionError).toMatch(/already resolved/);
    expect(store.state.summary!.open).toBe(0);
    expect(store.state.history).toHaveLength(1);
    const html = renderDetail(store.state, store.state.resolved[0]);
    expect(html).toContain("already resolved");
  });
});
