import { describe, expect, it } from "vitest";

import { buildSeries, DEFAULT_GEOMETRY, polylinePoints, projectPoint } from "../src/charts.js";
import type { MetricResult } from "../src/types.js";

function rubricResult(scores: Record<string, number>): MetricResult {
  const entries: MetricResult["turn_entries"] = {};
  for (const [turn, score] of Object.entries(scores)) {
    entries[turn] = {
      kind: "rating",
      metric_id: "empathy",
      metric_version: 1,
      scope: `turn:${turn}`,
      score,
      justification: "j",
      evidence: [],
      backend_fingerprint: "f",
    };
  }
  return {
    metric_id: "empathy",
    family: "rubric_based",
    predictor: null,
    turn_entries: entries,
    session_entry: null,
    aggregates: { count: Object.keys(scores).length, numeric: null, categorical: null },
  };
}

describe("buildSeries", () => {
  it("rubric scores map onto the fixed 1-5 axis", () => {
    const series = buildSeries(rubricResult({ 1: 2, 3: 5 }));
    expect(series).not.toBeNull();
    expect(series!.yMin).toBe(1);
    expect(series!.yMax).toBe(5);
    expect(series!.points).toEqual([
      [1, 2],
      [3, 5],
    ]);
  });

  it("points come back sorted by turn index", () => {
    const series = buildSeries(rubricResult({ 9: 1, 2: 3, 5: 4 }));
    expect(series!.points.map((p) => p[0])).toEqual([2, 5, 9]);
  });

  it("attribute scores map onto 0-1 using the primary attribute", () => {
    const result: MetricResult = {
      metric_id: "toxicity-a",
      family: "model_based",
      predictor: "toxicity_a",
      turn_entries: {
        0: { kind: "scores", scores: { toxicity: 0.4, insult: 0.1 } },
        1: { kind: "scores", scores: { toxicity: 0.9, insult: 0.2 } },
      },
      session_entry: null,
      aggregates: { count: 2, numeric: null, categorical: null },
    };
    const series = buildSeries(result);
    expect(series!.yMin).toBe(0);
    expect(series!.yMax).toBe(1);
    expect(series!.points).toEqual([
      [0, 0.4],
      [1, 0.9],
    ]);
  });

  it("ordinal labels map to their label index", () => {
    const result: MetricResult = {
      metric_id: "reflection",
      family: "model_based",
      predictor: "reflection",
      turn_entries: {
        1: { kind: "categorical", label: "non-reflection", confidence: 0.8 },
        3: { kind: "categorical", label: "complex", confidence: 0.9 },
      },
      session_entry: null,
      aggregates: { count: 2, numeric: null, categorical: null },
    };
    const series = buildSeries(result);
    expect(series!.points).toEqual([
      [1, 0],
      [3, 2],
    ]);
    expect(series!.yMax).toBe(2);
  });

  it("nominal labels produce no series", () => {
    const result: MetricResult = {
      metric_id: "emotion-classification",
      family: "model_based",
      predictor: "emotion_cls",
      turn_entries: { 0: { kind: "categorical", label: "joy", confidence: 0.8 } },
      session_entry: null,
      aggregates: { count: 1, numeric: null, categorical: null },
    };
    expect(buildSeries(result)).toBeNull();
  });

  it("factuality entries without scores are skipped", () => {
    const result: MetricResult = {
      metric_id: "fact-general",
      family: "model_based",
      predictor: "fact_general",
      turn_entries: {
        1: { kind: "factuality", turn_index: 1, claims: [], score: null },
        3: { kind: "factuality", turn_index: 3, claims: [], score: 0.5 },
      },
      session_entry: null,
      aggregates: { count: 1, numeric: null, categorical: null },
    };
    const series = buildSeries(result);
    expect(series!.points).toEqual([[3, 0.5]]);
  });
});

describe("geometry", () => {
  it("projects extremes onto the padded frame", () => {
    const series = buildSeries(rubricResult({ 0: 1, 10: 5 }))!;
    const { width, height, pad } = DEFAULT_GEOMETRY;
    const [x0, y0] = projectPoint(series, [0, 1]);
    const [x1, y1] = projectPoint(series, [10, 5]);
    expect(x0).toBeCloseTo(pad);
    expect(y0).toBeCloseTo(height - pad); // lowest score sits at the bottom
    expect(x1).toBeCloseTo(width - pad);
    expect(y1).toBeCloseTo(pad); // highest score sits at the top
  });

  it("polyline string has one coordinate pair per point", () => {
    const series = buildSeries(rubricResult({ 0: 1, 2: 3, 4: 5 }))!;
    expect(polylinePoints(series).split(" ")).toHaveLength(3);
  });
});
