// Per-tab session state and its invariants. Transitions are pure so they can
// be tested without a DOM.

import type { JobStatus, TranscriptTurn } from "./types.js";

export interface UiSessionState {
  backendModel: string;
  backendEndpoint: string;
  useMock: boolean;
  transcriptId: string | null;
  transcriptTurns: TranscriptTurn[];
  selectedMetricIds: Set<string>;
  activeEvaluationId: string | null;
  activeRubricSessionId: string | null;
}

export function initialState(): UiSessionState {
  return {
    backendModel: "",
    backendEndpoint: "",
    useMock: true,
    transcriptId: null,
    transcriptTurns: [],
    selectedMetricIds: new Set(),
    activeEvaluationId: null,
    activeRubricSessionId: null,
  };
}

// An evaluation can start only when a transcript is uploaded, at least one
// metric is selected, and a backend is configured (mock counts).
export function canStartEvaluation(state: UiSessionState): boolean {
  const backendReady = state.useMock || (state.backendModel !== "" && state.backendEndpoint !== "");
  return backendReady && state.transcriptId !== null && state.selectedMetricIds.size > 0;
}

export function setTranscript(
  state: UiSessionState,
  transcriptId: string,
  turns: TranscriptTurn[],
): UiSessionState {
  return { ...state, transcriptId, transcriptTurns: turns, activeEvaluationId: null };
}

export function toggleMetric(state: UiSessionState, metricId: string): UiSessionState {
  const selected = new Set(state.selectedMetricIds);
  if (selected.has(metricId)) {
    selected.delete(metricId);
  } else {
    selected.add(metricId);
  }
  return { ...state, selectedMetricIds: selected };
}

export function setCategorySelection(
  state: UiSessionState,
  metricIds: string[],
  selected: boolean,
): UiSessionState {
  const next = new Set(state.selectedMetricIds);
  for (const id of metricIds) {
    if (selected) {
      next.add(id);
    } else {
      next.delete(id);
    }
  }
  return { ...state, selectedMetricIds: next };
}

const TERMINAL_STATUSES: ReadonlySet<JobStatus> = new Set([
  "complete",
  "partial_failure",
  "failed",
]);

// Polling stops exactly when the job status is terminal.
export function isTerminal(status: JobStatus): boolean {
  return TERMINAL_STATUSES.has(status);
}
