/** Hash-routed single-page entry point: rounds → queue → case replay. */

import { ApiError, ReviewApi } from "./api.js";
import {
  CaseView,
  DecisionForm,
  el,
  renderQueue,
  renderRounds,
  renderSummaryBlock,
  updateQueueBadge,
} from "./views.js";
import { CaseDetail, EventStatus } from "./types.js";

const FRAME_SECONDS = 0.1; // review windows are recorded at 10 Hz

const api = new ReviewApi("");
const app = document.getElementById("app")!;
const banner = document.getElementById("banner")!;

function showError(err: unknown, retry: () => void): void {
  banner.replaceChildren();
  const message =
    err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
  banner.append(el("span", "", message));
  const button = el("button", "", "retry");
  button.addEventListener("click", () => {
    banner.replaceChildren();
    retry();
  });
  banner.append(button);
  banner.classList.add("visible");
}

function clearError(): void {
  banner.replaceChildren();
  banner.classList.remove("visible");
}

async function showRounds(): Promise<void> {
  const rounds = await api.rounds();
  renderRounds(app, rounds, (roundId) => {
    location.hash = `#/round/${roundId}`;
  });
}

async function showQueue(roundId: string): Promise<void> {
  const [entries, summary] = await Promise.all([
    api.queue(roundId),
    api.summary(roundId),
  ]);
  renderQueue(app, roundId, entries, summary, (eventId) => {
    location.hash = `#/case/${eventId}`;
  });
  const back = el("button", "back", "← rounds");
  back.addEventListener("click", () => (location.hash = "#/"));
  app.prepend(back);
}

async function showCase(eventId: string): Promise<void> {
  const detail: CaseDetail = await api.caseDetail(eventId);
  let status: EventStatus = detail.status;
  const form = new DecisionForm(
    api,
    eventId,
    () => status,
    (newStatus) => {
      status = newStatus;
      updateQueueBadge(app, eventId, newStatus);
      void refreshSummary();
    },
  );
  const view = new CaseView(detail, FRAME_SECONDS, form.root);
  app.replaceChildren();
  const back = el("button", "back", `← round ${detail.round_id}`);
  back.addEventListener("click", () => (location.hash = `#/round/${detail.round_id}`));
  app.append(back, view.root);
  const summaryBox = el("div", "case-summary");
  app.append(summaryBox);

  async function refreshSummary(): Promise<void> {
    const summary = await api.summary(detail.round_id);
    summaryBox.replaceChildren(renderSummaryBlock(summary));
  }
  await refreshSummary();
}

async function route(): Promise<void> {
  clearError();
  const hash = location.hash || "#/";
  const run = async () => {
    if (hash.startsWith("#/case/")) {
      await showCase(hash.slice("#/case/".length));
    } else if (hash.startsWith("#/round/")) {
      await showQueue(hash.slice("#/round/".length));
    } else {
      await showRounds();
    }
  };
  try {
    await run();
  } catch (err) {
    showError(err, () => void route());
  }
}

window.addEventListener("hashchange", () => void route());
void route();
