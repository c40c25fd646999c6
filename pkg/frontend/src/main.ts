// Page wiring: one session per tab, state re-rendered wholesale on change.

import { StudyApi, StudySummary } from "./api.js";
import { renderBoard } from "./board.js";
import { SessionController, SessionState, canGuess, canStep } from "./state.js";
import { renderSummary, renderTranscript } from "./transcript.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export function mount(base: string = ""): SessionController {
  const api = new StudyApi(base);
  const controller = new SessionController(api, render);

  const boardHost = el<HTMLDivElement>("board");
  const transcriptHost = el<HTMLDivElement>("transcript");
  const summaryHost = el<HTMLDivElement>("summary");
  const statusHost = el<HTMLParagraphElement>("status");
  const stepBtn = el<HTMLButtonElement>("step");
  const guessBtn = el<HTMLButtonElement>("guess");
  const newBtn = el<HTMLButtonElement>("new-session");
  const checkpointInput = el<HTMLInputElement>("checkpoint");
  const seedInput = el<HTMLInputElement>("scene-seed");

  function render(state: SessionState, summary: StudySummary | null) {
    boardHost.replaceChildren();
    if (state.scene) {
      boardHost.appendChild(
        renderBoard(
          state.scene,
          state.selected,
          { onSelect: (id) => controller.select(id) },
          state.result?.target_id ?? null,
        ),
      );
    }
    transcriptHost.replaceChildren(renderTranscript(state.rounds));
    summaryHost.replaceChildren(renderSummary(controller.summary));
    stepBtn.disabled = !canStep(state);
    guessBtn.disabled = !canGuess(state);
    if (state.error) {
      statusHost.textContent = `error: ${state.error}`;
      statusHost.className = "status error";
    } else if (state.result) {
      statusHost.textContent = state.result.correct
        ? "correct! that was the target."
        : `wrong - the target was object ${state.result.target_id}`;
      statusHost.className = state.result.correct ? "status win" : "status lose";
    } else if (state.phase === "terminal") {
      statusHost.textContent = "dialogue finished - click an object and guess";
      statusHost.className = "status";
    } else if (state.phase === "active") {
      statusHost.textContent =
        `round ${state.rounds.length}/${state.jMax} - step for the next question or guess now`;
      statusHost.className = "status";
    } else {
      statusHost.textContent = "start a session";
      statusHost.className = "status";
    }
  }

  newBtn.addEventListener("click", () => {
    void controller.start(checkpointInput.value || "demo", Number(seedInput.value) || 0);
  });
  stepBtn.addEventListener("click", () => void controller.step());
  guessBtn.addEventListener("click", () => void controller.guess());

  render(controller.state, null);
  return controller;
}

declare global {
  interface Window {
    guessgame: { mount: typeof mount };
  }
}

if (typeof window !== "undefined") {
  window.guessgame = { mount };
}
