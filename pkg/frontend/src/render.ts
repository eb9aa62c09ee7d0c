/**
 * Pure HTML renderers over the store state. No DOM access here: app.ts
 * mounts the strings and wires events, and the contract tests assert on
 * the markup directly.
 */

import { ReviewState, conflictBadge, kindLabel, summaryBadges } from "./store.js";
import {
  ActionPayload,
  ConflictRecordPayload,
  FragmentSide,
  ProposalsPayload,
} from "./types.js";

export function esc(text: unknown): string {
  return String(text ?? "")
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderSummary(state: ReviewState): string {
  if (!state.summary) return "";
  const badges = summaryBadges(state.summary)
    .map((text) => `<span class="badge">${esc(text)}</span>`)
    .join(" ");
  const resolved = `<span class="badge muted">${state.summary.resolved} resolved</span>`;
  return `<div class="summary" data-open="${state.summary.open}">${badges} ${resolved}</div>`;
}

export function renderConflictList(state: ReviewState): string {
  if (!state.conflicts.length && !state.resolved.length) {
    return `<p class="empty">no conflicts detected</p>`;
  }
  const open = state.conflicts
    .map((record) => renderListItem(record, state.selectedId, false))
    .join("");
  const resolved = state.resolved
    .map((record) => renderListItem(record, state.selectedId, true))
    .join("");
  const openBlock = open
    ? `<ul class="conflicts open">${open}</ul>`
    : `<p class="empty" data-role="open-empty">no open conflicts</p>`;
  const resolvedBlock = resolved
    ? `<h3>resolved</h3><ul class="conflicts resolved">${resolved}</ul>`
    : "";
  return openBlock + resolvedBlock;
}

function renderListItem(
  record: ConflictRecordPayload,
  selectedId: string | null,
  resolved: boolean,
): string {
  const classes = ["conflict-item"];
  if (record.id === selectedId) classes.push("selected");
  if (resolved) classes.push("done");
  const left = record.payload?.left ?? {};
  const right = record.payload?.right ?? {};
  const who =
    left.label && right.label
      ? `${left.label} / ${right.label}`
      : `${left.policy ?? ""} vs ${right.policy ?? ""}`;
  return (
    `<li class="${classes.join(" ")}" data-conflict="${esc(record.id)}">` +
    `<span class="kind">${esc(conflictBadge(record))}</span>` +
    `<span class="who">${esc(who)}</span>` +
    `</li>`
  );
}

function renderFragmentSide(title: string, side?: FragmentSide): string {
  if (!side) return "";
  const trees = side.fragments
    .map((fragment) => {
      const children = fragment.children
        .map(
          (child) =>
            `<li class="child ${esc(child.kind)}">` +
            `<span class="label">${esc(child.label)}</span>` +
            `<span class="kind-tag">${esc(child.kind)}</span></li>`,
        )
        .join("");
      return (
        `<div class="fragment"><div class="policy-node">policy ${esc(
          fragment.policy_id,
        )}</div><ul class="children">${children}</ul></div>`
      );
    })
    .join("");
  const anchor = side.anchor
    ? `<div class="anchor">anchor: <code>${esc(side.anchor)}</code></div>`
    : "";
  return (
    `<section class="side" data-side="${esc(title)}">` +
    `<h4>${esc(title)}: <mark>${esc(side.label ?? "")}</mark> in ${esc(side.sop_id)}</h4>` +
    trees +
    anchor +
    `</section>`
  );
}

export function describeAction(action: ActionPayload): string {
  if (action.kind === "rename") {
    const targets = (action.targets ?? [])
      .map((t) => t.concept_id)
      .join(" and ");
    return `rename ${targets} to "${action.new_label}"`;
  }
  if (action.kind === "merge") {
    return `merge ${action.absorbed?.concept_id} into ${action.survivor?.concept_id}`;
  }
  return `delete ${action.concept?.concept_id}`;
}

export function renderProposals(
  proposals: ProposalsPayload,
  disabled: boolean,
): string {
  if (!proposals.actions.length) {
    const advisory = proposals.advisory
      ? `<p class="advisory">${esc(proposals.advisory)}</p>`
      : "";
    return `${advisory}<p class="empty">no catalogued actions for this kind</p>`;
  }
  const rows = proposals.actions
    .map((action, index) => {
      const mark = action.auto_default
        ? `<span class="default-mark">default</span>`
        : "";
      return (
        `<li class="proposal">` +
        `<button class="apply" data-proposal="${index}"${disabled ? " disabled" : ""}>apply</button>` +
        `<span class="action">${esc(describeAction(action))}</span>${mark}</li>`
      );
    })
    .join("");
  return `<ol class="proposals">${rows}</ol>`;
}

export function renderDetail(state: ReviewState, record: ConflictRecordPayload | null): string {
  if (!record) return `<p class="empty">select a conflict</p>`;
  const fragments = record.fragments ?? {};
  const shared = fragments.shared_anchor
    ? `<div class="anchor shared">shared support anchor: ` +
      `<mark>${esc(fragments.shared_anchor.label ?? "")}</mark> ` +
      `<code>${esc(fragments.shared_anchor.concept_id)}</code></div>`
    : "";
  const resolvedNote =
    record.status === "Resolved"
      ? `<p class="resolved-note">resolved — proposals disabled</p>`
      : "";
  const error = state.decisionError
    ? `<p class="error" data-role="decision-error">${esc(state.decisionError)}</p>`
    : "";
  return (
    `<header><h3>${esc(kindLabel(record.kind))} <em>${esc(
      record.form.toLowerCase(),
    )}</em></h3><p class="policies">policies: ${esc(record.policies.join(", "))}</p></header>` +
    `<div class="sides">` +
    renderFragmentSide("left", fragments.left) +
    renderFragmentSide("right", fragments.right) +
    `</div>` +
    shared +
    resolvedNote +
    renderProposals(record.proposals, record.status !== "Open" || state.submitting) +
    error
  );
}

export function renderHistory(state: ReviewState): string {
  if (!state.history.length) return `<p class="empty">no decisions yet</p>`;
  const rows = state.history
    .map(
      (entry) =>
        `<li><span class="kind">${esc(entry.conflictKind)}</span> ` +
        `${esc(describeAction(entry.action))} → ${esc(entry.resultingStatus)}</li>`,
    )
    .join("");
  return `<ol class="history">${rows}</ol>`;
}

export function renderExportBar(state: ReviewState, enabled: boolean): string {
  const kinds = [
    ["enriched_ontology", "enriched ontology"],
    ["correspondences", "correspondences"],
    ["harmonized_policies", "harmonized policies"],
    ["report", "report"],
  ];
  const buttons = kinds
    .map(
      ([what, label]) =>
        `<button class="export" data-what="${what}"${enabled ? "" : " disabled"}>` +
        `${esc(label)}</button>`,
    )
    .join(" ");
  const hint = enabled
    ? ""
    : `<span class="hint">exports unlock when no conflicts remain open</span>`;
  return `<div class="exports" data-enabled="${enabled}">${buttons} ${hint}</div>`;
}
