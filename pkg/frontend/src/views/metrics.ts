// Panel C/D: grouped metric selection plus the rubric-builder chat.

import { ApiClient } from "../api.js";
import { clear, el } from "../dom.js";
import type { UiSessionState } from "../state.js";
import { canStartEvaluation, setCategorySelection, toggleMetric } from "../state.js";
import type { MetricSummary } from "../types.js";
import { renderRubricChat } from "./rubricChat.js";

export interface MetricsCallbacks {
  onStateChange(next: UiSessionState): void;
  onStartEvaluation(): void;
  refreshMetrics(): Promise<MetricSummary[]>;
}

const MODEL_GROUP = "Model-based metrics";

function groupMetrics(metrics: MetricSummary[]): Map<string, MetricSummary[]> {
  const groups = new Map<string, MetricSummary[]>();
  for (const metric of metrics) {
    const group = metric.family === "model_based" ? MODEL_GROUP : metric.category;
    if (!groups.has(group)) groups.set(group, []);
    groups.get(group)!.push(metric);
  }
  return groups;
}

export function renderMetricsScreen(
  api: ApiClient,
  state: UiSessionState,
  metrics: MetricSummary[],
  callbacks: MetricsCallbacks,
): HTMLElement {
  const root = el("section", { class: "panel", id: "metrics-panel" });
  root.append(el("h2", {}, ["2 · Select metrics"]));

  const list = el("div", { id: "metric-groups" });
  for (const [group, members] of groupMetrics(metrics)) {
    const groupBox = el("fieldset", { class: "metric-group" });
    const allToggle = el("input", { type: "checkbox", class: "group-toggle" });
    allToggle.checked = members.every((m) => state.selectedMetricIds.has(m.id));
    allToggle.addEventListener("change", () => {
      callbacks.onStateChange(
        setCategorySelection(state, members.map((m) => m.id), allToggle.checked),
      );
    });
    groupBox.append(el("legend", {}, [allToggle, ` ${group} (${members.length})`]));
    for (const metric of members) {
      const checkbox = el("input", {
        type: "checkbox",
        class: "metric-checkbox",
        "data-metric-id": metric.id,
      });
      checkbox.checked = state.selectedMetricIds.has(metric.id);
      checkbox.addEventListener("change", () => {
        callbacks.onStateChange(toggleMetric(state, metric.id));
      });
      const badge =
        metric.origin === "custom" ? el("span", { class: "badge custom" }, ["custom"]) : "";
      groupBox.append(el("label", { class: "metric-row" }, [checkbox, ` ${metric.name}`, badge]));
    }
    list.append(groupBox);
  }
  root.append(list);

  const startButton = el("button", { id: "start-evaluation", class: "primary" }, [
    "Run evaluation",
  ]);
  startButton.disabled = !canStartEvaluation(state);
  startButton.addEventListener("click", () => callbacks.onStartEvaluation());
  const hint = el("p", { class: "hint" }, [
    canStartEvaluation(state)
      ? `${state.selectedMetricIds.size} metric(s) selected`
      : "upload a transcript and select at least one metric to start",
  ]);
  root.append(startButton, hint);

  const chatHost = el("div", { id: "rubric-chat-host" });
  const newMetricButton = el("button", { id: "new-metric-button" }, ["New metric…"]);
  newMetricButton.addEventListener("click", () => {
    clear(chatHost);
    chatHost.append(
      renderRubricChat(api, {
        async onFinalized() {
          await callbacks.refreshMetrics();
        },
      }),
    );
  });
  root.append(el("h3", {}, ["Custom metrics"]), newMetricButton, chatHost);
  return root;
}
