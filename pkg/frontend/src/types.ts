/** Payload shapes served by the review API. Metric values are never computed
 * here — the client renders exactly what the pipeline persisted. */

export type Decision = "keep" | "reject" | "defer";

export type FailureTag =
  | "tracking_break"
  | "ttc_misuse"
  | "geometry_unstable"
  | "cross_lane_false_conflict"
  | "true_near_miss"
  | "borderline"
  | "other";

export const FAILURE_TAGS: FailureTag[] = [
  "tracking_break",
  "ttc_misuse",
  "geometry_unstable",
  "cross_lane_false_conflict",
  "true_near_miss",
  "borderline",
  "other",
];

/** Tags a keep decision accepts (mirrors the server-side invariant). */
export const KEEP_TAGS: FailureTag[] = ["true_near_miss", "borderline"];

export type EventStatus = "pending" | "kept" | "rejected" | "deferred";

export interface SeriesPoint {
  frame: number;
  sep: number;
  ttc: number | null; // null = not closing (+inf); rendered as a gap
  ttc_long: number | null;
}

export interface EventSummary {
  event_id: string;
  track_a: number;
  track_b: number;
  cls_a: string;
  cls_b: string;
  first_frame: number;
  last_frame: number;
  trigger: "ttc" | "separation" | "both";
  min_sep: number;
  min_ttc: number | null;
  min_ttc_long: number | null;
  argmin_sep_frame: number;
  argmin_ttc_frame: number;
  argmin_ttc_long_frame: number;
  location_x: number;
  location_y: number;
  branch: string;
  status: EventStatus;
}

export interface EventRecord extends EventSummary {
  series: SeriesPoint[];
}

export interface WindowPoint {
  frame: number;
  x: number;
  y: number;
  z: number;
  yaw: number;
  dx: number;
  dy: number;
  dz: number;
  score: number;
  provenance: "raw" | "interpolated";
}

export interface TrackletWindow {
  track_id: number;
  cls: string;
  points: WindowPoint[];
}

export interface QueueEntry {
  event_id: string;
  round_id: string;
  created_at: string;
  status: EventStatus;
  event: EventSummary;
}

export interface CaseDetail {
  event_id: string;
  round_id: string;
  created_at: string;
  status: EventStatus;
  event: EventRecord;
  windows: TrackletWindow[];
}

export interface RoundInfo {
  round_id: string;
  case_count: number;
  created_at: string;
  notes: string;
}

export interface RoundSummary {
  round_id: string;
  total: number;
  decisions: Record<Decision, number>;
  tags: Record<string, number>;
}

export interface HotspotCell {
  cell_x: number;
  cell_y: number;
  count: number;
}

export interface Hotspot {
  cell_size: number;
  n: number;
  cells: HotspotCell[];
}

export interface DecisionBody {
  decision: Decision;
  failure_tag?: FailureTag | null;
  notes?: string;
  reviewer?: string;
}

export interface DecisionResult {
  record_id: string;
  status: EventStatus;
}
