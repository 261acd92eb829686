// Wire types mirroring the engine's JSON schemas. The UI renders exclusively
// from these payloads; no score or label is computed client-side.

export interface MetricSummary {
  id: string;
  name: string;
  family: "model_based" | "rubric_based";
  category: string;
  origin: string;
}

export interface TranscriptTurn {
  index: number;
  role: "seeker" | "supporter";
  text: string;
}

export interface UploadResponse {
  transcript_id: string;
  turn_count: number;
  turns: TranscriptTurn[];
}

export interface EvidenceRef {
  turn: number;
  quote: string;
  start: number | null;
  end: number | null;
  resolved: boolean;
}

export interface RatingEntry {
  kind: "rating";
  metric_id: string;
  metric_version: number;
  scope: string;
  score: number;
  justification: string;
  evidence: EvidenceRef[];
  backend_fingerprint: string;
}

export interface CategoricalEntry {
  kind: "categorical";
  label: string;
  confidence: number;
}

export interface ScoresEntry {
  kind: "scores";
  scores: Record<string, number>;
}

export interface RelationsEntry {
  kind: "relations";
  relations: { emotion_turn: number; cause_turn: number; cause_quote: string }[];
}

export interface FactualityEntry {
  kind: "factuality";
  turn_index: number;
  claims: { text: string; verdict: string; evidence_note: string }[];
  score: number | null;
}

export type TurnEntry =
  | RatingEntry
  | CategoricalEntry
  | ScoresEntry
  | RelationsEntry
  | FactualityEntry;

export interface Aggregates {
  count: number;
  numeric: { mean: number; min: number; max: number } | null;
  categorical: { distribution: Record<string, number>; mode: string } | null;
}

export interface MetricResult {
  metric_id: string;
  family: "model_based" | "rubric_based";
  predictor: string | null;
  turn_entries: Record<string, TurnEntry>;
  session_entry: TurnEntry | null;
  aggregates: Aggregates;
}

export interface MetricErrorEntry {
  metric_id: string;
  stage: string;
  message: string;
  turn_index: number | null;
}

export interface SessionSummary {
  text: string;
  strengths: string[];
  weaknesses: string[];
}

export interface FlaggedTurn {
  turn_index: number;
  metric_id: string;
  reason: "low_rubric_score" | "high_toxicity";
  value: number;
}

export interface Report {
  report_id: string;
  transcript_id: string;
  created_at: string;
  engine_version: string;
  results: MetricResult[];
  errors: MetricErrorEntry[];
  summary: SessionSummary;
  flags: FlaggedTurn[];
}

export type JobStatus = "pending" | "running" | "complete" | "partial_failure" | "failed";

export interface EvaluationJob {
  evaluation_id: string;
  status: JobStatus;
  progress: { done: number; total: number };
  report: Report | null;
  error: string | null;
}

export interface RubricAnchor {
  level: number;
  label: string;
  description: string;
}

export interface RubricDraft {
  id: string;
  name: string;
  category: string;
  definition: string;
  scale: { min: number; max: number };
  anchors: RubricAnchor[];
  references: string[];
  origin?: string;
  version?: number;
}

export interface BuilderSessionState {
  session_id: string;
  description: string;
  constraints: string[];
  current_draft: RubricDraft;
  history: [string, number][];
  state: "drafting" | "finalized" | "abandoned";
}

export interface CalibrationExample {
  snippet: { id: string; source: string; turns: (TranscriptTurn & { timestamp?: string | null })[] };
  expected_score: number;
  rationale: string;
}

export interface QueryAnswer {
  kind: "answer";
  text: string;
  citations: { metric_id: string; scope: string }[];
}

export interface QueryRefusal {
  kind: "refusal";
  reason: "out_of_scope" | "no_relevant_results";
  message: string;
}

export type QueryResult = QueryAnswer | QueryRefusal;

export interface ApiErrorBody {
  error: string;
  message: string;
}
