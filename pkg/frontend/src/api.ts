// Typed client for the engine's HTTP API. Every call goes through the same
// service that backs the CLI; the browser never talks to model providers.

import type {
  ApiErrorBody,
  BuilderSessionState,
  CalibrationExample,
  EvaluationJob,
  MetricSummary,
  QueryResult,
  UploadResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.error;
    this.status = status;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${base}${path}`, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, body as ApiErrorBody);
  }
  return body as T;
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private get<T>(path: string): Promise<T> {
    return request<T>(this.base, path);
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return request<T>(this.base, path, { method: "POST", body: JSON.stringify(payload) });
  }

  async listMetrics(): Promise<MetricSummary[]> {
    const body = await this.get<{ metrics: MetricSummary[] }>("/api/metrics");
    return body.metrics;
  }

  uploadTranscript(format: string, content: string): Promise<UploadResponse> {
    return this.post("/api/transcripts", { format, content });
  }

  async startEvaluation(
    transcriptId: string,
    metricIds: string[],
    configOverrides: Record<string, unknown> = {},
  ): Promise<string> {
    const body = await this.post<{ evaluation_id: string }>("/api/evaluations", {
      transcript_id: transcriptId,
      metric_ids: metricIds,
      config_overrides: configOverrides,
    });
    return body.evaluation_id;
  }

  getEvaluation(evaluationId: string): Promise<EvaluationJob> {
    return this.get(`/api/evaluations/${evaluationId}`);
  }

  draftRubric(description: string, constraints: string[] = []): Promise<BuilderSessionState> {
    return this.post("/api/rubrics/draft", { description, constraints });
  }

  reviseRubric(sessionId: string, feedback: string): Promise<BuilderSessionState> {
    return this.post(`/api/rubrics/${sessionId}/revise`, { feedback });
  }

  async calibrationExamples(sessionId: string, n: number): Promise<CalibrationExample[]> {
    const body = await this.post<{ examples: CalibrationExample[] }>(
      `/api/rubrics/${sessionId}/examples`,
      { n },
    );
    return body.examples;
  }

  async finalizeRubric(sessionId: string): Promise<string> {
    const body = await this.post<{ metric_id: string }>(`/api/rubrics/${sessionId}/finalize`, {});
    return body.metric_id;
  }

  query(evaluationId: string, question: string): Promise<QueryResult> {
    return this.post("/api/query", { evaluation_id: evaluationId, question });
  }
}
