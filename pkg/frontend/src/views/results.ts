// Panels E-H: summary card, per-metric charts, turn drill-down with
// evidence highlighting, and the grounded query box.

import { ApiClient } from "../api.js";
import { buildSeries, renderChart } from "../charts.js";
import { clear, el } from "../dom.js";
import { segmentText, type Span } from "../highlight.js";
import type { MetricResult, Report, TranscriptTurn, TurnEntry } from "../types.js";

function summaryCard(report: Report): HTMLElement {
  const card = el("div", { class: "card summary-card", id: "summary-card" });
  card.append(el("h3", {}, ["Session summary"]));
  card.append(
    el("p", { id: "summary-text" }, [report.summary.text || "(no summary text)"]),
  );
  const badges = (ids: string[], cls: string) =>
    ids.map((id) => el("span", { class: `badge ${cls}` }, [id]));
  if (report.summary.strengths.length > 0) {
    card.append(el("p", {}, ["Strengths: ", ...badges(report.summary.strengths, "strength")]));
  }
  if (report.summary.weaknesses.length > 0) {
    card.append(el("p", {}, ["Weaknesses: ", ...badges(report.summary.weaknesses, "weakness")]));
  }
  if (report.flags.length > 0) {
    const list = el("ul", { class: "flag-list" });
    for (const flag of report.flags) {
      list.append(
        el("li", { class: "flag" }, [
          `turn ${flag.turn_index} · ${flag.metric_id} · ${flag.reason} (${flag.value})`,
        ]),
      );
    }
    card.append(el("h4", {}, [`Flagged turns (${report.flags.length})`]), list);
  }
  if (report.errors.length > 0) {
    const list = el("ul", { class: "error-list" });
    for (const error of report.errors) {
      list.append(el("li", {}, [`${error.metric_id} failed (${error.stage}): ${error.message}`]));
    }
    card.append(el("h4", {}, ["Metric errors"]), list);
  }
  return card;
}

function entryChip(metricId: string, entry: TurnEntry): HTMLElement {
  switch (entry.kind) {
    case "rating":
      return el("span", { class: `chip score-${entry.score}`, title: entry.justification }, [
        `${metricId}: ${entry.score}`,
      ]);
    case "categorical":
      return el("span", { class: "chip label" }, [`${metricId}: ${entry.label}`]);
    case "scores": {
      const first = Object.entries(entry.scores)[0];
      return el("span", { class: "chip" }, [`${metricId}: ${first[0]} ${first[1].toFixed(2)}`]);
    }
    case "factuality":
      return el("span", { class: "chip" }, [
        entry.score === null ? `${metricId}: n/a` : `${metricId}: ${entry.score.toFixed(2)}`,
      ]);
    default:
      return el("span", { class: "chip" }, [metricId]);
  }
}

function metricCard(result: MetricResult): HTMLElement {
  const card = el("div", { class: "card metric-card", "data-metric-id": result.metric_id });
  card.append(el("h3", {}, [result.metric_id]));
  const aggregates = result.aggregates;
  if (aggregates.numeric) {
    card.append(
      el("p", { class: "hint" }, [
        `mean ${aggregates.numeric.mean.toFixed(2)} · min ${aggregates.numeric.min} · ` +
          `max ${aggregates.numeric.max} · ${aggregates.count} entries`,
      ]),
    );
  }
  const series = buildSeries(result);
  if (series) {
    card.append(renderChart(series));
  } else if (aggregates.categorical) {
    // nominal label sets render as a distribution table instead of a chart
    const table = el("table", { class: "label-table" });
    table.append(el("tr", {}, [el("th", {}, ["label"]), el("th", {}, ["fraction"])]));
    for (const [label, fraction] of Object.entries(aggregates.categorical.distribution)) {
      table.append(el("tr", {}, [el("td", {}, [label]), el("td", {}, [fraction.toFixed(3)])]));
    }
    card.append(table, el("p", { class: "hint" }, [`mode: ${aggregates.categorical.mode}`]));
  }
  if (result.session_entry?.kind === "rating") {
    card.append(
      el("p", { class: "session-rating" }, [
        `session-level score ${result.session_entry.score}: ${result.session_entry.justification}`,
      ]),
    );
  }
  return card;
}

interface EvidenceTarget {
  key: string;
  turn: number;
  start: number;
  end: number;
}

function turnList(report: Report, turns: TranscriptTurn[]): HTMLElement {
  const container = el("div", { id: "turn-list" });
  container.append(el("h3", {}, ["Turn drill-down"]));

  // collect resolved evidence spans per turn, keyed per chip
  const spansByTurn = new Map<number, Span[]>();
  const targets: EvidenceTarget[] = [];
  for (const result of report.results) {
    const entries: [string, TurnEntry][] = Object.entries(result.turn_entries);
    if (result.session_entry) entries.push(["session", result.session_entry]);
    for (const [scopeKey, entry] of entries) {
      if (entry.kind !== "rating") continue;
      entry.evidence.forEach((ref, position) => {
        if (!ref.resolved || ref.start === null || ref.end === null) return;
        const key = `${result.metric_id}:${scopeKey}:${position}`;
        if (!spansByTurn.has(ref.turn)) spansByTurn.set(ref.turn, []);
        spansByTurn.get(ref.turn)!.push({ start: ref.start, end: ref.end, key });
        targets.push({ key, turn: ref.turn, start: ref.start, end: ref.end });
      });
    }
  }

  const entriesByTurn = new Map<number, HTMLElement[]>();
  for (const result of report.results) {
    for (const [turnKey, entry] of Object.entries(result.turn_entries)) {
      const index = Number(turnKey);
      if (!entriesByTurn.has(index)) entriesByTurn.set(index, []);
      const chip = entryChip(result.metric_id, entry);
      if (entry.kind === "rating") {
        const firstTarget = targets.find(
          (t) => t.key.startsWith(`${result.metric_id}:${turnKey}:`),
        );
        if (firstTarget) {
          chip.classList.add("evidence-chip");
          chip.setAttribute("data-evidence-key", firstTarget.key);
          chip.setAttribute("role", "button");
        }
      }
      entriesByTurn.get(index)!.push(chip);
    }
  }

  for (const turn of turns) {
    const row = el("div", { class: `turn-row ${turn.role}`, "data-turn-index": String(turn.index) });
    row.append(el("span", { class: "turn-label" }, [`[${turn.index}] ${turn.role}`]));
    const textBox = el("p", { class: "turn-text" });
    const segments = segmentText(turn.text, spansByTurn.get(turn.index) ?? []);
    for (const segment of segments) {
      if (segment.keys.length === 0) {
        textBox.append(segment.text);
      } else {
        textBox.append(
          el("mark", { class: "evidence-span", "data-span-keys": segment.keys.join(" ") }, [
            segment.text,
          ]),
        );
      }
    }
    row.append(textBox);
    const chips = entriesByTurn.get(turn.index);
    if (chips) {
      row.append(el("div", { class: "chip-row" }, chips));
    }
    container.append(row);
  }

  // chip click -> highlight exactly the owning span and scroll to it
  container.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const chip = target.closest?.(".evidence-chip") as HTMLElement | null;
    if (!chip) return;
    const key = chip.getAttribute("data-evidence-key");
    if (!key) return;
    for (const mark of container.querySelectorAll("mark.evidence-span")) {
      const keys = (mark.getAttribute("data-span-keys") ?? "").split(" ");
      mark.classList.toggle("active", keys.includes(key));
    }
    const active = container.querySelector("mark.evidence-span.active");
    (active as HTMLElement | null)?.scrollIntoView?.({ block: "center" });
  });

  return container;
}

function queryBox(api: ApiClient, evaluationId: string): HTMLElement {
  const box = el("div", { class: "card", id: "query-box" });
  box.append(el("h3", {}, ["Ask about these results"]));
  const input = el("input", {
    type: "text",
    id: "query-input",
    placeholder: "e.g. What was the empathy score at turn 5?",
  });
  const button = el("button", { id: "query-button" }, ["Ask"]);
  const thread = el("div", { id: "query-thread" });
  box.append(el("div", { class: "chat-input" }, [input, button]), thread);

  button.addEventListener("click", async () => {
    const question = input.value.trim();
    if (!question) return;
    input.value = "";
    thread.append(el("div", { class: "chat-message you" }, [question]));
    try {
      const result = await api.query(evaluationId, question);
      if (result.kind === "answer") {
        const chips = result.citations.map((c) =>
          el("span", { class: "badge citation" }, [`${c.metric_id} @ ${c.scope}`]),
        );
        thread.append(
          el("div", { class: "chat-message assistant answer" }, [
            el("p", {}, [result.text]),
            el("p", { class: "citations" }, chips),
          ]),
        );
      } else {
        thread.append(
          el("div", { class: "chat-message assistant refusal" }, [
            el("strong", {}, [`refused (${result.reason})`]),
            el("p", {}, [result.message]),
          ]),
        );
      }
    } catch (error) {
      thread.append(
        el("div", { class: "chat-message assistant refusal" }, [String(error)]),
      );
    }
  });
  return box;
}

export function renderResultsScreen(
  api: ApiClient,
  report: Report,
  turns: TranscriptTurn[],
  evaluationId: string,
): HTMLElement {
  const root = el("section", { class: "panel", id: "results-panel" });
  root.append(el("h2", {}, ["3 · Results"]));
  root.append(summaryCard(report));
  const charts = el("div", { id: "metric-cards" });
  for (const result of report.results) {
    charts.append(metricCard(result));
  }
  root.append(charts);
  root.append(turnList(report, turns));
  root.append(queryBox(api, evaluationId));
  return root;
}

export function renderProgress(done: number, total: number): HTMLElement {
  const root = el("section", { class: "panel", id: "results-panel" });
  root.append(el("h2", {}, ["3 · Results"]));
  const percent = total > 0 ? Math.round((100 * done) / total) : 0;
  root.append(
    el("div", { class: "card" }, [
      el("p", { id: "progress-text" }, [`evaluating… ${done}/${total} work items (${percent}%)`]),
      el("progress", { max: String(Math.max(1, total)), value: String(done) }),
    ]),
  );
  return root;
}

export { clear };
