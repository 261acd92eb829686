// Panel A/B: backend configuration and transcript upload.

import { ApiClient, ApiError } from "../api.js";
import { el } from "../dom.js";
import type { UiSessionState } from "../state.js";
import { setTranscript } from "../state.js";

export interface ConfigureCallbacks {
  onStateChange(next: UiSessionState): void;
}

export function renderConfigureScreen(
  api: ApiClient,
  state: UiSessionState,
  callbacks: ConfigureCallbacks,
): HTMLElement {
  const root = el("section", { class: "panel", id: "configure-panel" });
  root.append(el("h2", {}, ["1 · Configure and upload"]));

  // backend fields: the service reads keys from its environment, never from
  // the browser; these fields only pick the model identity.
  const endpointInput = el("input", {
    type: "text",
    id: "backend-endpoint",
    placeholder: "judge endpoint URL (blank = server default)",
    value: state.backendEndpoint,
  });
  const modelInput = el("input", {
    type: "text",
    id: "backend-model",
    placeholder: "judge model name",
    value: state.backendModel,
  });
  const mockToggle = el("input", { type: "checkbox", id: "mock-toggle" });
  mockToggle.checked = state.useMock;

  endpointInput.addEventListener("change", () => {
    callbacks.onStateChange({ ...state, backendEndpoint: endpointInput.value.trim() });
  });
  modelInput.addEventListener("change", () => {
    callbacks.onStateChange({ ...state, backendModel: modelInput.value.trim() });
  });
  mockToggle.addEventListener("change", () => {
    callbacks.onStateChange({ ...state, useMock: mockToggle.checked });
  });

  root.append(
    el("div", { class: "field-grid" }, [
      el("label", {}, ["Endpoint", endpointInput]),
      el("label", {}, ["Model", modelInput]),
      el("label", { class: "inline" }, [mockToggle, " offline mock backends"]),
      el("p", { class: "hint" }, [
        "API keys are read from the server's environment; they never pass through the browser.",
      ]),
    ]),
  );

  const formatSelect = el("select", { id: "transcript-format" });
  for (const fmt of ["plain_text", "chat_json", "chat_export"]) {
    formatSelect.append(el("option", { value: fmt }, [fmt]));
  }
  const fileInput = el("input", { type: "file", id: "transcript-file" });
  const textArea = el("textarea", {
    id: "transcript-text",
    rows: "6",
    placeholder: "…or paste a transcript here (Seeker:/Supporter: lines, or JSON)",
  });
  const uploadButton = el("button", { id: "upload-button" }, ["Upload transcript"]);
  const status = el("p", { class: "status", id: "upload-status" });

  async function upload(content: string): Promise<void> {
    status.textContent = "uploading…";
    status.className = "status";
    try {
      const uploaded = await api.uploadTranscript(formatSelect.value, content);
      status.textContent = `transcript ${uploaded.transcript_id} · ${uploaded.turn_count} turns`;
      status.className = "status ok";
      callbacks.onStateChange(setTranscript(state, uploaded.transcript_id, uploaded.turns));
    } catch (error) {
      // errors surface verbatim from the API, including line numbers
      status.textContent = error instanceof ApiError ? error.message : String(error);
      status.className = "status error";
    }
  }

  uploadButton.addEventListener("click", async () => {
    const file = fileInput.files?.[0];
    if (file) {
      await upload(await file.text());
    } else if (textArea.value.trim()) {
      await upload(textArea.value);
    } else {
      status.textContent = "choose a file or paste a transcript first";
      status.className = "status error";
    }
  });

  root.append(
    el("div", { class: "field-grid" }, [
      el("label", {}, ["Format", formatSelect]),
      el("label", {}, ["File", fileInput]),
      textArea,
      uploadButton,
      status,
    ]),
  );
  return root;
}
