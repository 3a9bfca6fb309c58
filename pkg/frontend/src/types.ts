/** Payload types mirroring the annotation service's HTTP API. */

export interface Partlet {
  name: string;
  conf_soft: number;
  conf_maha: number;
  conf_fused: number;
  mask_point_indices: number[];
}

export interface Prediction {
  shape_id: string;
  category: string | null;
  partlets: Partlet[];
  unlabeled_count: number;
}

export interface Lease {
  reviewer: string;
  granted: number;
  expiry: number;
}

export type ItemStatus = "AUTO_ACCEPTED" | "PENDING" | "LEASED" | "REVIEWED";

export interface Item {
  shape_id: string;
  status: ItemStatus;
  low_confidence: boolean;
  avg_fused_conf: number;
  revision: number;
  prediction: Prediction;
  lease: Lease | null;
  final_partlets: Partlet[] | null;
  review_duration: number;
}

export type VerdictKind = "ACCEPT" | "RELABEL" | "REJECT_PART";

export interface Verdict {
  partlet_index: number;
  verdict: VerdictKind;
  new_label?: string;
}

export interface Decision {
  reviewer: string;
  revision: number;
  verdicts: Verdict[];
}

export interface Stats {
  items: number;
  by_status: Record<string, number>;
  queue_length: number;
}

export interface VocabResponse {
  object_class: string;
  labels: string[];
}

export interface ExportRecord {
  shape_id: string;
  status: ItemStatus;
  review_duration: number;
  category: string | null;
  partlets: Partlet[];
  unlabeled_count: number;
  [key: string]: unknown;
}

export interface ExportDoc {
  format: string;
  items: ExportRecord[];
}
