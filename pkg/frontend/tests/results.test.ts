// Results screen rendered from a stored report fixture (produced by the
// engine's deterministic mock run).

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { buildSeries } from "../src/charts.js";
import { renderResultsScreen } from "../src/views/results.js";
import type { Report, TranscriptTurn } from "../src/types.js";

// vitest runs with frontend/ as the working directory
const fixture = JSON.parse(
  readFileSync(join(process.cwd(), "tests", "fixtures", "report.json"), "utf-8"),
) as { report: Report; turns: TranscriptTurn[] };

function render(): HTMLElement {
  const root = renderResultsScreen(new ApiClient(""), fixture.report, fixture.turns, "e-1");
  document.body.append(root);
  return root;
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("summary card", () => {
  it("shows the judge-written summary text", () => {
    const root = render();
    const text = root.querySelector("#summary-text")?.textContent ?? "";
    expect(text).toBe(fixture.report.summary.text);
    expect(text.length).toBeGreaterThan(0);
  });

  it("lists every flagged turn", () => {
    const root = render();
    const flagRows = root.querySelectorAll(".flag-list .flag");
    expect(flagRows).toHaveLength(fixture.report.flags.length);
  });
});

describe("metric charts", () => {
  it("renders exactly one chart per metric with a numeric series", () => {
    const root = render();
    const expected = fixture.report.results.filter((r) => buildSeries(r) !== null).length;
    expect(expected).toBeGreaterThan(0);
    expect(root.querySelectorAll("svg.metric-chart")).toHaveLength(expected);
  });

  it("nominal metrics get a label table instead of a chart", () => {
    const root = render();
    const card = root.querySelector('[data-metric-id="emotion-classification"]');
    expect(card).not.toBeNull();
    expect(card!.querySelector("svg.metric-chart")).toBeNull();
    expect(card!.querySelector("table.label-table")).not.toBeNull();
  });
});

describe("turn drill-down with evidence highlighting", () => {
  it("renders one row per transcript turn", () => {
    const root = render();
    expect(root.querySelectorAll(".turn-row")).toHaveLength(fixture.turns.length);
  });

  it("clicking each evidence chip highlights text equal to the span's excerpt", () => {
    const root = render();
    const chips = [...root.querySelectorAll(".evidence-chip")];
    expect(chips.length).toBeGreaterThan(0);

    // gather the original evidence refs by key to compare excerpts
    const refsByKey = new Map<string, { turn: number; start: number; end: number }>();
    for (const result of fixture.report.results) {
      for (const [scopeKey, entry] of Object.entries(result.turn_entries)) {
        if (entry.kind !== "rating") continue;
        entry.evidence.forEach((ref, position) => {
          if (ref.resolved && ref.start !== null && ref.end !== null) {
            refsByKey.set(`${result.metric_id}:${scopeKey}:${position}`, {
              turn: ref.turn,
              start: ref.start,
              end: ref.end,
            });
          }
        });
      }
    }

    for (const chip of chips) {
      (chip as HTMLElement).click();
      const key = chip.getAttribute("data-evidence-key")!;
      const ref = refsByKey.get(key)!;
      expect(ref).toBeDefined();

      const active = [...root.querySelectorAll("mark.evidence-span.active")];
      expect(active.length).toBeGreaterThan(0);
      const highlighted = active.map((m) => m.textContent).join("");
      const expected = fixture.turns[ref.turn].text.slice(ref.start, ref.end);
      expect(highlighted).toBe(expected);
    }
  });

  it("turn text survives segmentation byte-for-byte", () => {
    const root = render();
    const rows = [...root.querySelectorAll(".turn-row")];
    for (const row of rows) {
      const index = Number(row.getAttribute("data-turn-index"));
      const text = row.querySelector(".turn-text")?.textContent;
      expect(text).toBe(fixture.turns[index].text);
    }
  });
});

describe("query box", () => {
  it("renders the input and ask button", () => {
    const root = render();
    expect(root.querySelector("#query-input")).not.toBeNull();
    expect(root.querySelector("#query-button")).not.toBeNull();
  });
});
