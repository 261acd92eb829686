// Chart geometry for per-metric time series. Scales mirror the engine's:
// rubric scores plot on a fixed 1-5 axis, attribute scores and factuality on
// 0-1, ordinal labels on their label index. Nominal label sets get no chart
// (the view renders a distribution table instead).

import type { MetricResult, TurnEntry } from "./types.js";

// Label orders for the ordinal predictor kinds, mirroring the engine.
const ORDINAL_LABELS: Record<string, string[]> = {
  reflection: ["non-reflection", "simple", "complex"],
  epitome_er: ["none", "weak", "strong"],
  epitome_ip: ["none", "weak", "strong"],
  epitome_ex: ["none", "weak", "strong"],
};

export interface Series {
  points: [number, number][]; // (turn index, value), sorted by turn
  yMin: number;
  yMax: number;
  yLabel: string;
}

function entryValue(entry: TurnEntry, predictor: string | null): number | null {
  switch (entry.kind) {
    case "rating":
      return entry.score;
    case "scores": {
      const first = Object.keys(entry.scores)[0];
      return first === undefined ? null : entry.scores[first];
    }
    case "factuality":
      return entry.score;
    case "categorical": {
      const labels = predictor ? ORDINAL_LABELS[predictor] : undefined;
      if (!labels) return null;
      const index = labels.indexOf(entry.label);
      return index >= 0 ? index : null;
    }
    default:
      return null;
  }
}

/** Build the numeric series for a metric, or null when it has none
 * (nominal labels, relations, or no turn entries). */
export function buildSeries(result: MetricResult): Series | null {
  const points: [number, number][] = [];
  for (const [key, entry] of Object.entries(result.turn_entries)) {
    const value = entryValue(entry, result.predictor);
    if (value !== null) {
      points.push([Number(key), value]);
    }
  }
  if (points.length === 0) return null;
  points.sort((a, b) => a[0] - b[0]);

  if (result.family === "rubric_based") {
    return { points, yMin: 1, yMax: 5, yLabel: "score" };
  }
  const sample = result.turn_entries[String(points[0][0])];
  if (sample.kind === "categorical" && result.predictor && ORDINAL_LABELS[result.predictor]) {
    const labels = ORDINAL_LABELS[result.predictor];
    return { points, yMin: 0, yMax: labels.length - 1, yLabel: "level" };
  }
  return { points, yMin: 0, yMax: 1, yLabel: "value" };
}

export interface ChartGeometry {
  width: number;
  height: number;
  pad: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = { width: 560, height: 120, pad: 10 };

/** Project one (turn, value) point into pixel coordinates using the full
 * series extent. */
export function projectPoint(
  series: Series,
  point: [number, number],
  geometry: ChartGeometry = DEFAULT_GEOMETRY,
): [number, number] {
  const { width, height, pad } = geometry;
  const xs = series.points.map((p) => p[0]);
  const xMin = Math.min(...xs);
  const xSpan = Math.max(1, Math.max(...xs) - xMin);
  const ySpan = Math.max(1e-9, series.yMax - series.yMin);
  const px = pad + ((point[0] - xMin) / xSpan) * (width - 2 * pad);
  const py = height - pad - ((point[1] - series.yMin) / ySpan) * (height - 2 * pad);
  return [px, py];
}

/** Project series points into SVG pixel coordinates ("x,y x,y ..."). */
export function polylinePoints(series: Series, geometry: ChartGeometry = DEFAULT_GEOMETRY): string {
  return series.points
    .map((point) => {
      const [px, py] = projectPoint(series, point, geometry);
      return `${px.toFixed(1)},${py.toFixed(1)}`;
    })
    .join(" ");
}

export function renderChart(series: Series, geometry: ChartGeometry = DEFAULT_GEOMETRY): SVGSVGElement {
  const svgNs = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("viewBox", `0 0 ${geometry.width} ${geometry.height}`);
  svg.setAttribute("width", String(geometry.width));
  svg.setAttribute("height", String(geometry.height));
  svg.setAttribute("class", "metric-chart");
  const polyline = document.createElementNS(svgNs, "polyline");
  polyline.setAttribute("points", polylinePoints(series, geometry));
  polyline.setAttribute("fill", "none");
  polyline.setAttribute("stroke", "#2b6cb0");
  polyline.setAttribute("stroke-width", "1.5");
  svg.appendChild(polyline);
  for (const point of series.points) {
    const [px, py] = projectPoint(series, point, geometry);
    const circle = document.createElementNS(svgNs, "circle");
    circle.setAttribute("cx", px.toFixed(1));
    circle.setAttribute("cy", py.toFixed(1));
    circle.setAttribute("r", "2.5");
    circle.setAttribute("fill", "#2b6cb0");
    svg.appendChild(circle);
  }
  return svg;
}
