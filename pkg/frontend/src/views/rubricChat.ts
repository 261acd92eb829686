// Panel D: the draft -> revise -> calibrate -> finalize chat for custom rubrics.

import { ApiClient, ApiError } from "../api.js";
import { clear, el } from "../dom.js";
import type { BuilderSessionState, RubricDraft } from "../types.js";

export interface RubricChatCallbacks {
  onFinalized(metricId: string): void | Promise<void>;
}

function draftCard(draft: RubricDraft): HTMLElement {
  const card = el("div", { class: "draft-card" });
  card.append(
    el("h4", {}, [`${draft.name} `, el("code", {}, [draft.id])]),
    el("p", { class: "hint" }, [`${draft.category} · version ${draft.version ?? 1}`]),
    el("p", {}, [draft.definition]),
  );
  const anchorList = el("ul", { class: "anchors" });
  for (const anchor of draft.anchors) {
    anchorList.append(el("li", {}, [`${anchor.level} = ${anchor.description}`]));
  }
  card.append(anchorList);
  return card;
}

export function renderRubricChat(api: ApiClient, callbacks: RubricChatCallbacks): HTMLElement {
  const root = el("div", { class: "rubric-chat", id: "rubric-chat" });
  const log = el("div", { class: "chat-log", id: "rubric-chat-log" });
  const status = el("p", { class: "status", id: "rubric-chat-status" });
  root.append(el("h4", {}, ["New rubric metric"]), log, status);

  let session: BuilderSessionState | null = null;

  function say(role: "you" | "assistant", node: Node | string): void {
    log.append(el("div", { class: `chat-message ${role}` }, [node]));
  }

  function fail(error: unknown): void {
    if (error instanceof ApiError && error.code === "draft_invalid") {
      // show the violation list from the API verbatim
      status.textContent = `draft invalid: ${error.message}`;
    } else {
      status.textContent = error instanceof Error ? error.message : String(error);
    }
    status.className = "status error";
  }

  const descriptionInput = el("input", {
    type: "text",
    id: "rubric-description",
    placeholder: "describe the construct to measure",
  });
  const draftButton = el("button", { id: "rubric-draft-button" }, ["Draft rubric"]);
  const draftRow = el("div", { class: "chat-input" }, [descriptionInput, draftButton]);

  const feedbackInput = el("input", {
    type: "text",
    id: "rubric-feedback",
    placeholder: "feedback for the next revision",
  });
  const reviseButton = el("button", { id: "rubric-revise-button" }, ["Revise"]);
  const examplesButton = el("button", { id: "rubric-examples-button" }, ["Show examples"]);
  const finalizeButton = el("button", { id: "rubric-finalize-button", class: "primary" }, [
    "Finalize",
  ]);
  const refineRow = el("div", { class: "chat-input hidden", id: "rubric-refine-row" }, [
    feedbackInput,
    reviseButton,
    examplesButton,
    finalizeButton,
  ]);

  draftButton.addEventListener("click", async () => {
    const description = descriptionInput.value.trim();
    if (!description) return;
    say("you", description);
    status.textContent = "drafting…";
    status.className = "status";
    try {
      session = await api.draftRubric(description);
      say("assistant", draftCard(session.current_draft));
      draftRow.classList.add("hidden");
      refineRow.classList.remove("hidden");
      status.textContent = "";
    } catch (error) {
      fail(error);
    }
  });

  reviseButton.addEventListener("click", async () => {
    if (!session) return;
    const feedback = feedbackInput.value.trim();
    if (!feedback) return;
    say("you", feedback);
    feedbackInput.value = "";
    try {
      session = await api.reviseRubric(session.session_id, feedback);
      say("assistant", draftCard(session.current_draft));
      status.textContent = "";
    } catch (error) {
      fail(error);
    }
  });

  examplesButton.addEventListener("click", async () => {
    if (!session) return;
    try {
      const examples = await api.calibrationExamples(session.session_id, 3);
      const box = el("div", { class: "examples", id: "calibration-examples" });
      for (const example of examples) {
        const snippet = el("div", { class: "example" });
        snippet.append(el("strong", {}, [`expected score ${example.expected_score}`]));
        for (const turn of example.snippet.turns) {
          snippet.append(el("p", { class: `snippet-turn ${turn.role}` }, [
            `${turn.role}: ${turn.text}`,
          ]));
        }
        snippet.append(el("p", { class: "hint" }, [example.rationale]));
        box.append(snippet);
      }
      say("assistant", box);
      status.textContent = "";
    } catch (error) {
      fail(error);
    }
  });

  finalizeButton.addEventListener("click", async () => {
    if (!session) return;
    try {
      const metricId = await api.finalizeRubric(session.session_id);
      say("assistant", el("p", {}, [`Registered custom metric `, el("code", {}, [metricId])]));
      status.textContent = `metric ${metricId} added to the selection list`;
      status.className = "status ok";
      clear(refineRow);
      await callbacks.onFinalized(metricId);
    } catch (error) {
      fail(error);
    }
  });

  root.append(draftRow, refineRow);
  return root;
}
