// Single-page bootstrap: three panels (configure, metrics, results) over the
// documented HTTP API. Evaluation progress is polled; polling stops at a
// terminal status.

import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { canStartEvaluation, initialState, isTerminal, type UiSessionState } from "./state.js";
import type { MetricSummary } from "./types.js";
import { renderConfigureScreen } from "./views/configure.js";
import { renderMetricsScreen } from "./views/metrics.js";
import { renderProgress, renderResultsScreen } from "./views/results.js";

const POLL_INTERVAL_MS = 400;

export class App {
  private state: UiSessionState = initialState();
  private metrics: MetricSummary[] = [];
  private pollTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly rootElement: HTMLElement,
  ) {}

  async start(): Promise<void> {
    this.metrics = await this.api.listMetrics();
    this.render();
  }

  private setState(next: UiSessionState): void {
    this.state = next;
    this.render();
  }

  private async refreshMetrics(): Promise<MetricSummary[]> {
    this.metrics = await this.api.listMetrics();
    this.render();
    return this.metrics;
  }

  private async startEvaluation(): Promise<void> {
    if (!canStartEvaluation(this.state) || this.state.transcriptId === null) return;
    const overrides: Record<string, unknown> = {};
    if (this.state.useMock) {
      overrides["predictors.mock"] = true;
    } else {
      if (this.state.backendModel) overrides["judge.model_name"] = this.state.backendModel;
      if (this.state.backendEndpoint) overrides["judge.endpoint_url"] = this.state.backendEndpoint;
    }
    try {
      const evaluationId = await this.api.startEvaluation(
        this.state.transcriptId,
        [...this.state.selectedMetricIds],
        overrides,
      );
      this.setState({ ...this.state, activeEvaluationId: evaluationId });
      this.poll(evaluationId);
    } catch (error) {
      const host = this.rootElement.querySelector("#results-host") as HTMLElement | null;
      if (host) {
        clear(host);
        host.append(
          el("p", { class: "status error" }, [
            `could not start evaluation: ${error instanceof Error ? error.message : String(error)}`,
          ]),
        );
      }
    }
  }

  private poll(evaluationId: string): void {
    if (this.pollTimer !== null) clearTimeout(this.pollTimer);
    const tick = async () => {
      const job = await this.api.getEvaluation(evaluationId);
      if (this.state.activeEvaluationId !== evaluationId) return; // superseded
      if (isTerminal(job.status)) {
        this.pollTimer = null;
        this.renderJobResult(job.status, job.report, job.error, evaluationId, job.progress);
        return;
      }
      this.renderJobResult(job.status, null, null, evaluationId, job.progress);
      this.pollTimer = setTimeout(tick, POLL_INTERVAL_MS);
    };
    this.pollTimer = setTimeout(tick, POLL_INTERVAL_MS);
  }

  private renderJobResult(
    status: string,
    report: import("./types.js").Report | null,
    error: string | null,
    evaluationId: string,
    progress: { done: number; total: number },
  ): void {
    const host = this.rootElement.querySelector("#results-host") as HTMLElement | null;
    if (!host) return;
    clear(host);
    if (report !== null) {
      host.append(
        renderResultsScreen(this.api, report, this.state.transcriptTurns, evaluationId),
      );
      if (status === "partial_failure") {
        host.prepend(
          el("p", { class: "status error" }, [
            "some metrics failed; details are listed in the summary card",
          ]),
        );
      }
    } else if (status === "failed") {
      host.append(el("p", { class: "status error" }, [`evaluation failed: ${error ?? "unknown"}`]));
    } else {
      host.append(renderProgress(progress.done, progress.total));
    }
  }

  render(): void {
    clear(this.rootElement);
    this.rootElement.append(
      el("header", {}, [
        el("h1", {}, ["Dialogue audit"]),
        el("p", { class: "hint" }, [
          "score support conversations with model-based and rubric-based metrics",
        ]),
      ]),
    );
    this.rootElement.append(
      renderConfigureScreen(this.api, this.state, {
        onStateChange: (next) => this.setState(next),
      }),
    );
    this.rootElement.append(
      renderMetricsScreen(this.api, this.state, this.metrics, {
        onStateChange: (next) => this.setState(next),
        onStartEvaluation: () => void this.startEvaluation(),
        refreshMetrics: () => this.refreshMetrics(),
      }),
    );
    this.rootElement.append(el("div", { id: "results-host" }));
  }
}

declare global {
  interface Window {
    dialogueAuditApp?: App;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = new App(new ApiClient(""), document.getElementById("app")!);
  window.dialogueAuditApp = app;
  void app.start();
}
