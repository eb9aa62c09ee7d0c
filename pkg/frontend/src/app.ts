/** Browser bootstrap: mounts the renderers and wires events to the store. */

import { HttpApiClient } from "./api.js";
import {
  renderConflictList,
  renderDetail,
  renderExportBar,
  renderHistory,
  renderSummary,
  esc,
} from "./render.js";
import { ReviewStore } from "./store.js";
import { PolicyFilePayload } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function detectLang(filename: string): string {
  if (filename.endsWith(".ponder")) return "ponder";
  if (filename.endsWith(".kaos.json") || filename.endsWith(".json")) return "kaos";
  return "rei";
}

function domainFromName(filename: string): string {
  return filename.replace(/\.(rei|ponder|kaos\.json|json)$/i, "")
    .replace(/[^A-Za-z0-9_.-]/g, "-");
}

async function readFiles(input: HTMLInputElement): Promise<PolicyFilePayload[]> {
  const files = Array.from(input.files ?? []);
  return Promise.all(
    files.map(async (file) => ({
      lang: detectLang(file.name),
      domain_id: domainFromName(file.name),
      text: await file.text(),
    })),
  );
}

export function mount(): void {
  const api = new HttpApiClient("");
  const store = new ReviewStore(api);

  const uploadPane = el<HTMLElement>("upload-pane");
  const reviewPane = el<HTMLElement>("review-pane");
  const summaryBox = el<HTMLElement>("summary");
  const listBox = el<HTMLElement>("conflict-list");
  const detailBox = el<HTMLElement>("conflict-detail");
  const historyBox = el<HTMLElement>("history");
  const exportBox = el<HTMLElement>("export-bar");
  const uploadError = el<HTMLElement>("upload-error");

  store.subscribe((state) => {
    uploadPane.hidden = state.phase === "review";
    reviewPane.hidden = state.phase !== "review";
    uploadError.innerHTML = state.uploadError
      ? `<p class="error">${esc(state.uploadError)}</p>`
      : "";
    if (state.phase !== "review") return;
    summaryBox.innerHTML = renderSummary(state);
    listBox.innerHTML = renderConflictList(state);
    detailBox.innerHTML = renderDetail(state, store.selectedConflict());
    historyBox.innerHTML = renderHistory(state);
    exportBox.innerHTML = renderExportBar(state, store.exportEnabled());
  });

  el<HTMLButtonElement>("start").addEventListener("click", async () => {
    const supportInput = el<HTMLInputElement>("support-file");
    const policyInput = el<HTMLInputElement>("policy-files");
    const supportFile = supportInput.files?.[0] ?? null;
    const policies = await readFiles(policyInput);
    let support: unknown = null;
    if (supportFile) {
      try {
        support = JSON.parse(await supportFile.text());
      } catch (error) {
        uploadError.innerHTML = `<p class="error">support ontology is not valid JSON</p>`;
        return;
      }
    }
    await store.startSession(support, policies);
  });

  listBox.addEventListener("click", (event) => {
    const item = (event.target as HTMLElement).closest("[data-conflict]");
    if (item) store.select(item.getAttribute("data-conflict")!);
  });

  detailBox.addEventListener("click", async (event) => {
    const button = (event.target as HTMLElement).closest("button.apply");
    if (!button || button.hasAttribute("disabled")) return;
    const record = store.selectedConflict();
    if (!record) return;
    const index = Number(button.getAttribute("data-proposal"));
    await store.submitDecision(record, record.proposals.actions[index]);
  });

  exportBox.addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest("button.export");
    if (!button || button.hasAttribute("disabled")) return;
    const sid = store.state.sessionId;
    if (!sid) return;
    const what = button.getAttribute("data-what")!;
    window.open(api.exportUrl(sid, what), "_blank");
  });
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", mount);
}
