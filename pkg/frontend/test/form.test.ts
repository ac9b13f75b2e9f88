// @vitest-environment jsdom
import { describe, expect, it, vi } from "vitest";

import { ApiError, ReviewApi } from "../src/api.js";
import { DecisionForm, statusBadge, updateQueueBadge } from "../src/views.js";
import { EventStatus } from "../src/types.js";

function fakeApi(result: Promise<{ record_id: string; status: EventStatus }>): ReviewApi {
  return { submitDecision: vi.fn(() => result) } as unknown as ReviewApi;
}

function build(
  api: ReviewApi,
  status: EventStatus = "pending",
  onDecided: (s: EventStatus) => void = () => {},
  confirmStale: (m: string) => boolean = () => true,
) {
  return new DecisionForm(api, "abc123", () => status, onDecided, confirmStale);
}

function select(form: DecisionForm, decision: string): void {
  const radio = form.root.querySelector<HTMLInputElement>(`input[value="${decision}"]`)!;
  radio.checked = true;
  radio.dispatchEvent(new Event("change"));
}

function pickTag(form: DecisionForm, tag: string): void {
  const dropdown = form.root.querySelector<HTMLSelectElement>("select")!;
  dropdown.value = tag;
  dropdown.dispatchEvent(new Event("change"));
}

function submitButton(form: DecisionForm): HTMLButtonElement {
  return form.root.querySelector<HTMLButtonElement>("button[type=submit]")!;
}

describe("DecisionForm gating", () => {
  it("reject is not submittable until a tag is chosen", () => {
    const api = fakeApi(Promise.resolve({ record_id: "r1", status: "rejected" }));
    const form = build(api);
    select(form, "reject");
    expect(form.submittable()).toBe(false);
    expect(submitButton(form).disabled).toBe(true);
    expect(form.root.querySelector(".form-error")!.textContent).toContain("failure tag");
    pickTag(form, "tracking_break");
    expect(form.submittable()).toBe(true);
    expect(submitButton(form).disabled).toBe(false);
  });

  it("keep requires a positive tag", () => {
    const api = fakeApi(Promise.resolve({ record_id: "r1", status: "kept" }));
    const form = build(api);
    select(form, "keep");
    pickTag(form, "tracking_break");
    expect(form.submittable()).toBe(false);
    pickTag(form, "true_near_miss");
    expect(form.submittable()).toBe(true);
  });

  it("no request is sent while the form is not submittable", async () => {
    const api = fakeApi(Promise.resolve({ record_id: "r1", status: "rejected" }));
    const form = build(api);
    select(form, "reject"); // no tag
    await form.submit();
    expect((api.submitDecision as ReturnType<typeof vi.fn>).mock.calls.length).toBe(0);
  });

  it("successful submission reports the new status", async () => {
    const api = fakeApi(Promise.resolve({ record_id: "r7", status: "kept" }));
    const decided: EventStatus[] = [];
    const form = build(api, "pending", (s) => decided.push(s));
    select(form, "keep");
    pickTag(form, "true_near_miss");
    await form.submit();
    expect(decided).toEqual(["kept"]);
  });

  it("server validation errors render inline", async () => {
    const api = fakeApi(Promise.reject(new ApiError(422, "missing_failure_tag", "nope")));
    const form = build(api);
    select(form, "defer");
    await form.submit();
    const error = form.root.querySelector(".form-error")!.textContent;
    expect(error).toContain("missing_failure_tag");
  });

  it("stale cases warn before resubmission", async () => {
    const api = fakeApi(Promise.resolve({ record_id: "r2", status: "kept" }));
    const confirmations: string[] = [];
    const form = build(api, "rejected", () => {}, (m) => {
      confirmations.push(m);
      return false; // reviewer declines
    });
    select(form, "keep");
    pickTag(form, "borderline");
    await form.submit();
    expect(confirmations.length).toBe(1);
    expect(confirmations[0]).toContain("rejected");
    expect((api.submitDecision as ReturnType<typeof vi.fn>).mock.calls.length).toBe(0);
  });
});

describe("queue badge updates", () => {
  it("replaces the badge in place without reload", () => {
    const container = document.createElement("div");
    const row = document.createElement("button");
    row.dataset.eventId = "abc123";
    row.append(statusBadge("pending"));
    container.append(row);
    updateQueueBadge(container, "abc123", "kept");
    expect(row.querySelector(".badge")!.textContent).toBe("kept");
    expect(row.querySelector(".badge")!.className).toContain("badge-kept");
  });
});
