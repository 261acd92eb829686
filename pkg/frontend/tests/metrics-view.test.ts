// Metric selection screen: grouping and the start-button invariant.

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { initialState, setTranscript, toggleMetric, type UiSessionState } from "../src/state.js";
import type { MetricSummary } from "../src/types.js";
import { renderMetricsScreen } from "../src/views/metrics.js";

const METRICS: MetricSummary[] = [
  { id: "reflection", name: "Reflection", family: "model_based", category: "Reflection", origin: "builtin" },
  { id: "empathy", name: "Empathy", family: "rubric_based", category: "Core Conditions", origin: "literature" },
  { id: "trauma-processing", name: "Trauma Processing", family: "rubric_based", category: "Crisis & Trauma", origin: "literature" },
  { id: "safety-planning", name: "Safety Planning", family: "rubric_based", category: "Crisis & Trauma", origin: "literature" },
  { id: "my-own", name: "My Own", family: "rubric_based", category: "Core Conditions", origin: "custom" },
];

function render(state: UiSessionState): HTMLElement {
  const root = renderMetricsScreen(new ApiClient(""), state, METRICS, {
    onStateChange: () => {},
    onStartEvaluation: () => {},
    refreshMetrics: async () => METRICS,
  });
  document.body.append(root);
  return root;
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("grouping", () => {
  it("shows one model-based group and one group per rubric category", () => {
    const root = render(initialState());
    const legends = [...root.querySelectorAll(".metric-group legend")].map(
      (l) => l.textContent ?? "",
    );
    expect(legends.some((t) => t.includes("Model-based metrics (1)"))).toBe(true);
    expect(legends.some((t) => t.includes("Crisis & Trauma (2)"))).toBe(true);
  });

  it("custom metrics carry a badge", () => {
    const root = render(initialState());
    const badges = root.querySelectorAll(".badge.custom");
    expect(badges).toHaveLength(1);
  });
});

describe("start button invariant", () => {
  it("is disabled without a transcript or selection", () => {
    const root = render(initialState());
    const button = root.querySelector<HTMLButtonElement>("#start-evaluation")!;
    expect(button.disabled).toBe(true);
  });

  it("stays disabled with a transcript but no metric", () => {
    const state = setTranscript(initialState(), "t-1", []);
    const root = render(state);
    expect(root.querySelector<HTMLButtonElement>("#start-evaluation")!.disabled).toBe(true);
  });

  it("enables once a transcript is uploaded and a metric selected", () => {
    let state = setTranscript(initialState(), "t-1", []);
    state = toggleMetric(state, "empathy");
    const root = render(state);
    expect(root.querySelector<HTMLButtonElement>("#start-evaluation")!.disabled).toBe(false);
  });

  it("reflects current selection in checkboxes", () => {
    let state = setTranscript(initialState(), "t-1", []);
    state = toggleMetric(state, "empathy");
    const root = render(state);
    const checked = [...root.querySelectorAll<HTMLInputElement>(".metric-checkbox")]
      .filter((c) => c.checked)
      .map((c) => c.getAttribute("data-metric-id"));
    expect(checked).toEqual(["empathy"]);
  });
});
