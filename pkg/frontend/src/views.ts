/** DOM construction for the three views plus canvas rendering for case
 * replay. All metric values come from the API untouched. */

import { ApiError, ReviewApi } from "./api.js";
import {
  boxCorners,
  fitTransform,
  pointAtFrame,
  timelineFrames,
  windowBounds,
  WorldTransform,
} from "./bev.js";
import { buildCurve, Curve, linearScale, relativeTime, valueExtent } from "./curves.js";
import { PlaybackClock } from "./playback.js";
import {
  CaseDetail,
  Decision,
  EventStatus,
  FAILURE_TAGS,
  FailureTag,
  KEEP_TAGS,
  QueueEntry,
  RoundInfo,
  RoundSummary,
} from "./types.js";

const TRACK_COLORS = ["#2f80ed", "#eb5757"];
const CURVE_STYLES: Record<string, string> = {
  sep: "#27ae60",
  ttc: "#eb5757",
  ttc_long: "#9b51e0",
};

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function statusBadge(status: EventStatus): HTMLElement {
  return el("span", `badge badge-${status}`, status);
}

function fmt(v: number | null | undefined, digits = 2, unit = ""): string {
  if (v === null || v === undefined || !isFinite(v)) return "—";
  return v.toFixed(digits) + unit;
}

// ── Rounds view ────────────────────────────────────────────────────────────

export function renderRounds(
  container: HTMLElement,
  rounds: RoundInfo[],
  onOpen: (roundId: string) => void,
): void {
  container.replaceChildren();
  container.append(el("h2", "", "Review rounds"));
  if (!rounds.length) {
    container.append(el("p", "empty", "No rounds exported yet."));
    return;
  }
  const list = el("div", "round-list");
  for (const r of rounds) {
    const row = el("button", "round-row");
    row.append(
      el("span", "round-id", `round ${r.round_id}`),
      el("span", "round-count", `${r.case_count} case(s)`),
      el("span", "round-stamp", r.created_at),
    );
    row.addEventListener("click", () => onOpen(r.round_id));
    list.append(row);
  }
  container.append(list);
}

// ── Queue view ─────────────────────────────────────────────────────────────

export function renderQueue(
  container: HTMLElement,
  roundId: string,
  entries: QueueEntry[],
  summary: RoundSummary,
  onOpen: (eventId: string) => void,
): void {
  container.replaceChildren();
  container.append(el("h2", "", `Round ${roundId}`));
  container.append(renderSummaryBlock(summary));
  const table = el("div", "queue");
  for (const entry of entries) {
    const ev = entry.event;
    const row = el("button", "queue-row");
    row.dataset.eventId = entry.event_id;
    const label = el("span", "pair", `#${ev.track_a} ${ev.cls_a} × #${ev.track_b} ${ev.cls_b}`);
    const trigger = el("span", `trigger trigger-${ev.trigger}`, ev.trigger);
    const mins = el(
      "span",
      "mins",
      `min TTC ${fmt(ev.min_ttc, 2, " s")} · min sep ${fmt(ev.min_sep, 2, " m")}`,
    );
    const frames = el("span", "frames", `frames ${ev.first_frame}–${ev.last_frame}`);
    row.append(label, trigger, mins, frames, statusBadge(entry.status));
    row.addEventListener("click", () => onOpen(entry.event_id));
    table.append(row);
  }
  container.append(table);
}

export function renderSummaryBlock(summary: RoundSummary): HTMLElement {
  const block = el("div", "summary");
  const decisions = el("div", "summary-decisions");
  for (const d of ["keep", "reject", "defer"] as Decision[]) {
    decisions.append(el("span", `pill pill-${d}`, `${d}: ${summary.decisions[d] ?? 0}`));
  }
  decisions.append(el("span", "pill", `total: ${summary.total}`));
  block.append(decisions);
  const tags = el("div", "summary-tags");
  const entries = Object.entries(summary.tags);
  if (entries.length) {
    for (const [tag, count] of entries.sort()) {
      tags.append(el("span", "pill pill-tag", `${tag}: ${count}`));
    }
  }
  block.append(tags);
  return block;
}

/** Refresh one queue row's badge in place (read-your-write, no reload). */
export function updateQueueBadge(container: HTMLElement, eventId: string, status: EventStatus): void {
  const row = container.querySelector<HTMLElement>(`[data-event-id="${eventId}"]`);
  if (!row) return;
  const badge = row.querySelector(".badge");
  if (badge) badge.replaceWith(statusBadge(status));
}

// ── Decision form ──────────────────────────────────────────────────────────

export class DecisionForm {
  readonly root: HTMLElement;
  private decision: Decision = "keep";
  private tag: FailureTag | null = null;
  private inFlight = false;
  private serverError = "";
  private tagSelect: HTMLSelectElement;
  private submitButton: HTMLButtonElement;
  private errorBox: HTMLElement;
  private notes: HTMLTextAreaElement;
  private reviewer: HTMLInputElement;

  constructor(
    private api: ReviewApi,
    private eventId: string,
    private currentStatus: () => EventStatus,
    private onDecided: (status: EventStatus) => void,
    private confirmStale: (message: string) => boolean = (m) => window.confirm(m),
  ) {
    this.root = el("form", "decision-form");
    this.root.addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submit();
    });

    const choices = el("div", "decision-choices");
    for (const d of ["keep", "reject", "defer"] as Decision[]) {
      const label = el("label", "decision-choice");
      const radio = document.createElement("input");
      radio.type = "radio";
      radio.name = "decision";
      radio.value = d;
      radio.checked = d === this.decision;
      radio.addEventListener("change", () => {
        this.decision = d;
        this.serverError = "";
        this.refreshGate();
      });
      label.append(radio, document.createTextNode(d));
      choices.append(label);
    }

    this.tagSelect = document.createElement("select");
    this.tagSelect.className = "tag-select";
    this.tagSelect.append(new Option("— failure tag —", ""));
    for (const tag of FAILURE_TAGS) this.tagSelect.append(new Option(tag, tag));
    this.tagSelect.addEventListener("change", () => {
      this.tag = (this.tagSelect.value || null) as FailureTag | null;
      this.serverError = "";
      this.refreshGate();
    });

    this.notes = document.createElement("textarea");
    this.notes.placeholder = "notes (optional)";
    this.reviewer = document.createElement("input");
    this.reviewer.placeholder = "reviewer";

    this.submitButton = el("button", "submit") as HTMLButtonElement;
    this.submitButton.type = "submit";
    this.submitButton.textContent = "Submit decision";
    this.errorBox = el("div", "form-error");

    this.root.append(choices, this.tagSelect, this.reviewer, this.notes, this.submitButton, this.errorBox);
    this.refreshGate();
  }

  /** Reject may not be submitted without a tag; keep needs a keep-tag. */
  submittable(): boolean {
    if (this.inFlight) return false;
    if (this.decision === "reject" && this.tag === null) return false;
    if (this.decision === "keep" && (this.tag === null || !KEEP_TAGS.includes(this.tag))) {
      return false;
    }
    return true;
  }

  private refreshGate(): void {
    this.submitButton.disabled = !this.submittable();
    if (this.decision === "reject" && this.tag === null) {
      this.errorBox.textContent = "reject requires a failure tag";
    } else if (this.decision === "keep" && (this.tag === null || !KEEP_TAGS.includes(this.tag))) {
      this.errorBox.textContent = "keep requires true_near_miss or borderline";
    } else {
      // server errors persist until the reviewer edits the form again
      this.errorBox.textContent = this.serverError;
    }
  }

  async submit(): Promise<void> {
    if (!this.submittable()) return;
    const status = this.currentStatus();
    if (status !== "pending") {
      const ok = this.confirmStale(
        `This case is already ${status}. Submit another decision anyway?`,
      );
      if (!ok) return;
    }
    this.inFlight = true; // one in-flight submission per case
    this.submitButton.disabled = true;
    try {
      const result = await this.api.submitDecision(this.eventId, {
        decision: this.decision,
        failure_tag: this.tag,
        notes: this.notes.value,
        reviewer: this.reviewer.value,
      });
      this.serverError = "";
      this.onDecided(result.status);
    } catch (err) {
      // show server validation inline, exactly as reported
      this.serverError =
        err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    } finally {
      this.inFlight = false;
      this.refreshGate();
    }
  }
}

// ── Case view ──────────────────────────────────────────────────────────────

export class CaseView {
  readonly root: HTMLElement;
  readonly clock: PlaybackClock;
  readonly curves: Curve[];
  private bevCanvas: HTMLCanvasElement;
  private curveCanvas: HTMLCanvasElement;
  private readout: HTMLElement;
  private scrubber: HTMLInputElement;
  private transform: WorldTransform;
  private lastTick = 0;
  private animating = false;

  constructor(
    private detail: CaseDetail,
    private dt: number,
    form?: HTMLElement,
  ) {
    this.root = el("div", "case-view");
    const ev = detail.event;

    const header = el("div", "case-header");
    header.append(
      el("h2", "", `case ${detail.event_id}`),
      el(
        "div",
        "case-meta",
        `${ev.cls_a} #${ev.track_a} × ${ev.cls_b} #${ev.track_b} · trigger ${ev.trigger} · ` +
          `branch ${ev.branch} · min TTC ${fmt(ev.min_ttc, 2, " s")} · ` +
          `min sep ${fmt(ev.min_sep, 2, " m")} · min TTC∥ ${fmt(ev.min_ttc_long, 2, " s")}`,
      ),
      statusBadge(detail.status),
    );

    this.bevCanvas = document.createElement("canvas");
    this.bevCanvas.className = "bev-canvas";
    this.bevCanvas.width = 640;
    this.bevCanvas.height = 420;
    this.curveCanvas = document.createElement("canvas");
    this.curveCanvas.className = "curve-canvas";
    this.curveCanvas.width = 640;
    this.curveCanvas.height = 330;

    this.curves = [
      buildCurve(ev.series, "sep", dt, "separation [m]"),
      buildCurve(ev.series, "ttc", dt, "TTC [s]"),
      buildCurve(ev.series, "ttc_long", dt, "TTC∥ [s]"),
    ];

    const frames = timelineFrames(detail.windows);
    this.clock = new PlaybackClock(frames, dt, () => this.redraw());
    this.transform = fitTransform(
      windowBounds(detail.windows),
      this.bevCanvas.width,
      this.bevCanvas.height,
    );

    const controls = el("div", "controls");
    const playButton = el("button", "play", "▶");
    playButton.addEventListener("click", () => {
      this.clock.toggle();
      playButton.textContent = this.clock.playing ? "⏸" : "▶";
      if (this.clock.playing) this.animate();
    });
    const stepBack = el("button", "", "⟨");
    stepBack.addEventListener("click", () => this.clock.step(-1));
    const stepForward = el("button", "", "⟩");
    stepForward.addEventListener("click", () => this.clock.step(1));
    this.scrubber = document.createElement("input");
    this.scrubber.type = "range";
    this.scrubber.min = "0";
    this.scrubber.max = String(frames.length - 1);
    this.scrubber.value = "0";
    this.scrubber.addEventListener("input", () => {
      this.clock.pause();
      playButton.textContent = "▶";
      this.clock.seekIndex(Number(this.scrubber.value));
    });
    this.readout = el("div", "readout");
    controls.append(stepBack, playButton, stepForward, this.scrubber, this.readout);

    this.root.append(header, this.bevCanvas, controls, this.curveCanvas);
    if (form) this.root.append(form);
    this.redraw();
  }

  private animate(): void {
    if (this.animating) return;
    this.animating = true;
    this.lastTick = performance.now();
    const loop = (now: number) => {
      this.clock.tick(now - this.lastTick);
      this.lastTick = now;
      if (this.clock.playing) {
        requestAnimationFrame(loop);
      } else {
        this.animating = false;
      }
    };
    requestAnimationFrame(loop);
  }

  /** Frame cursor state shared by the canvas, curves, scrubber and readout. */
  redraw(): void {
    const frame = this.clock.cursorFrame;
    this.scrubber.value = String(this.clock.cursorIndex);
    this.drawBev(frame);
    this.drawCurves(frame);
    this.updateReadout(frame);
  }

  private updateReadout(frame: number): void {
    const t = relativeTime(this.detail.event.series, frame, this.dt);
    const rows = [`frame ${frame} · t = ${t.toFixed(1)} s`];
    // debug coordinate readout: exact world pose of each box this frame
    for (const [i, w] of this.detail.windows.entries()) {
      const p = pointAtFrame(w, frame);
      if (p) {
        rows.push(
          `#${w.track_id} ${w.cls}: x=${p.x.toFixed(2)} y=${p.y.toFixed(2)} ` +
            `yaw=${((p.yaw * 180) / Math.PI).toFixed(1)}° (${p.provenance})`,
        );
      } else {
        rows.push(`#${w.track_id} ${w.cls}: —`);
      }
      void i;
    }
    this.readout.textContent = rows.join("  |  ");
  }

  private drawBev(frame: number): void {
    const ctx = this.bevCanvas.getContext("2d");
    if (!ctx) return; // non-browser environments have no 2d context
    const { width, height } = this.bevCanvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10141a";
    ctx.fillRect(0, 0, width, height);

    for (const [i, w] of this.detail.windows.entries()) {
      const color = TRACK_COLORS[i % TRACK_COLORS.length];
      // trail of past centers
      ctx.strokeStyle = color + "55";
      ctx.lineWidth = 1;
      ctx.beginPath();
      let started = false;
      for (const p of w.points) {
        if (p.frame > frame) break;
        const [sx, sy] = this.transform.toScreen(p.x, p.y);
        if (!started) {
          ctx.moveTo(sx, sy);
          started = true;
        } else {
          ctx.lineTo(sx, sy);
        }
      }
      ctx.stroke();

      const p = pointAtFrame(w, frame);
      if (!p) continue;
      const corners = boxCorners(p.x, p.y, p.yaw, p.dx, p.dy);
      ctx.beginPath();
      for (const [j, [cx, cy]] of corners.entries()) {
        const [sx, sy] = this.transform.toScreen(cx, cy);
        j === 0 ? ctx.moveTo(sx, sy) : ctx.lineTo(sx, sy);
      }
      ctx.closePath();
      ctx.lineWidth = 2;
      // interpolated (gap-filled) frames are drawn dashed, raw solid
      ctx.setLineDash(p.provenance === "interpolated" ? [5, 4] : []);
      ctx.strokeStyle = color;
      ctx.fillStyle = color + "22";
      ctx.fill();
      ctx.stroke();
      ctx.setLineDash([]);
      // heading tick from the box center
      const [hx, hy] = this.transform.toScreen(
        p.x + (Math.cos(p.yaw) * p.dx) / 2,
        p.y + (Math.sin(p.yaw) * p.dx) / 2,
      );
      const [sx, sy] = this.transform.toScreen(p.x, p.y);
      ctx.beginPath();
      ctx.moveTo(sx, sy);
      ctx.lineTo(hx, hy);
      ctx.stroke();
      ctx.fillStyle = color;
      ctx.font = "11px sans-serif";
      ctx.fillText(`#${w.track_id} ${w.cls}`, sx + 6, sy - 6);
    }
  }

  private drawCurves(frame: number): void {
    const ctx = this.curveCanvas.getContext("2d");
    if (!ctx) return;
    const { width } = this.curveCanvas;
    const panelH = this.curveCanvas.height / this.curves.length;
    ctx.clearRect(0, 0, width, this.curveCanvas.height);

    const series = this.detail.event.series;
    if (!series.length) return;
    const tMax = relativeTime(series, series[series.length - 1].frame, this.dt);
    const x = linearScale([0, Math.max(tMax, 1e-6)], [46, width - 10]);
    const cursorT = relativeTime(series, frame, this.dt);
    const keys = ["sep", "ttc", "ttc_long"] as const;

    for (const [i, curve] of this.curves.entries()) {
      const top = i * panelH;
      const [lo, hi] = valueExtent(curve);
      const y = linearScale([lo, hi], [top + panelH - 16, top + 12]);
      ctx.strokeStyle = "#2a3140";
      ctx.strokeRect(46, top + 12, width - 56, panelH - 28);
      ctx.fillStyle = "#9aa4b2";
      ctx.font = "11px sans-serif";
      ctx.fillText(curve.label, 50, top + 10);

      ctx.strokeStyle = CURVE_STYLES[keys[i]];
      ctx.lineWidth = 1.5;
      for (const segment of curve.segments) {
        ctx.beginPath();
        for (const [j, point] of segment.entries()) {
          const px = x.apply(point.t);
          const py = y.apply(point.v);
          j === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
        }
        if (segment.length === 1) {
          // lone sample between gaps: draw a dot, still never a null
          const p = segment[0];
          ctx.moveTo(x.apply(p.t) + 1.5, y.apply(p.v));
          ctx.arc(x.apply(p.t), y.apply(p.v), 1.5, 0, Math.PI * 2);
        }
        ctx.stroke();
      }

      if (curve.min) {
        const mx = x.apply(curve.min.t);
        const my = y.apply(curve.min.v);
        ctx.fillStyle = CURVE_STYLES[keys[i]];
        ctx.beginPath();
        ctx.arc(mx, my, 3, 0, Math.PI * 2);
        ctx.fill();
        ctx.fillText(`min ${curve.min.v.toFixed(2)}`, mx + 6, my - 4);
      }

      // cursor marker, synchronized with the rendered frame by construction
      const cx = x.apply(cursorT);
      ctx.strokeStyle = "#f2c94c";
      ctx.beginPath();
      ctx.moveTo(cx, top + 12);
      ctx.lineTo(cx, top + panelH - 16);
      ctx.stroke();
    }
  }
}
