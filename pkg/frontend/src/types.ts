// Wire types for the review service JSON API. Field names follow the server
// payloads exactly; token_method is null for sentence methods that do not
// consume token scores.

export type Verdict = "correct" | "mislabeled" | "skipped";

export interface MethodPair {
  method: string;
  token_method: string | null;
}

export interface MethodsResponse {
  fingerprint: string;
  default: { method: string; token_method: string };
  methods: MethodPair[];
  token_methods: string[];
}

export interface QueueItem {
  id: number;
  text: string;
  n_tokens: number;
  score: number;
  worst_token_index: number | null;
  verdict: Verdict | null;
}

export interface QueuePage {
  method: string;
  token_method: string | null;
  sort: string;
  filter: string;
  total: number;
  offset: number;
  limit: number;
  sentences: QueueItem[];
}

export interface TopPrediction {
  class: number;
  name: string;
  prob: number;
}

export interface ReviewState {
  verdict: Verdict;
  corrected_labels: number[] | null;
  reviewer_note: string | null;
  timestamp: string;
}

export interface SentenceDetail {
  id: number;
  tokens: string[];
  text: string;
  given_labels: number[];
  given_label_names: string[];
  classes: string[];
  token_method: string;
  quality: number[] | null;
  flags: number[] | null;
  top_predictions: TopPrediction[][] | null;
  review: ReviewState | null;
}

export interface Stats {
  total: number;
  reviewed: number;
  by_verdict: { correct: number; mislabeled: number; skipped: number };
  fraction_reviewed: number;
  precision_so_far: number;
  fingerprint: string;
}

export interface ReviewRequest {
  verdict: Verdict;
  corrected_labels?: number[] | null;
  reviewer_note?: string | null;
  fingerprint?: string | null;
}

export interface ReviewResponse {
  id: number;
  verdict: Verdict;
  stats: Stats;
}

export interface ExportResponse {
  path: string;
  n_corrected: number;
}
