import { describe, expect, it } from "vitest";
import type { SessionCreated, StepResult } from "../src/api.js";
import {
  applyCreated,
  applyGuess,
  applySelection,
  applyStep,
  canGuess,
  canStep,
  initialState,
} from "../src/state.js";

const created: SessionCreated = {
  session_id: "abc",
  j_max: 5,
  mode: "greedy",
  scene: {
    id: 0,
    objects: [
      { id: 0, category: "dog", attributes: { color: "red" }, box: [0, 0, 0.3, 0.3] },
      { id: 1, category: "cat", attributes: {}, box: [0.5, 0.5, 0.9, 0.9] },
    ],
  },
  transcript: [],
};

describe("session state", () => {
  it("starts idle and becomes active on creation", () => {
    const s0 = initialState();
    expect(s0.phase).toBe("idle");
    expect(canStep(s0)).toBe(false);
    const s1 = applyCreated(s0, created);
    expect(s1.phase).toBe("active");
    expect(s1.rounds).toEqual([]);
    expect(canStep(s1)).toBe(true);
    expect(canGuess(s1)).toBe(false);
  });

  it("appends rounds from step results and stops at the terminal marker", () => {
    let s = applyCreated(initialState(), created);
    const step1: StepResult = { round: 1, question: "is it red ?", answer: "Yes", terminal: false };
    s = applyStep(s, step1);
    expect(s.rounds).toHaveLength(1);
    expect(s.rounds[0].answer).toBe("Yes");
    const stepEnd: StepResult = { round: null, question: null, answer: null, terminal: true };
    s = applyStep(s, stepEnd);
    expect(s.rounds).toHaveLength(1); // terminal marker adds no round
    expect(s.phase).toBe("terminal");
    expect(canStep(s)).toBe(false);
  });

  it("marks terminal on the same response as the last question", () => {
    let s = applyCreated(initialState(), created);
    s = applyStep(s, { round: 1, question: "is it red ?", answer: "No", terminal: true });
    expect(s.rounds).toHaveLength(1);
    expect(s.phase).toBe("terminal");
  });

  it("selection enables guessing while active or terminal", () => {
    let s = applyCreated(initialState(), created);
    s = applySelection(s, 1);
    expect(s.selected).toBe(1);
    expect(canGuess(s)).toBe(true);
    s = applyStep(s, { round: null, question: null, answer: null, terminal: true });
    expect(canGuess(s)).toBe(true);
  });

  it("records the server verdict and freezes afterwards", () => {
    let s = applyCreated(initialState(), created);
    s = applySelection(s, 0);
    s = applyGuess(s, { correct: false, target_id: 1 });
    expect(s.phase).toBe("guessed");
    expect(s.result?.target_id).toBe(1);
    expect(canStep(s)).toBe(false);
    expect(canGuess(s)).toBe(false);
    const after = applySelection(s, 1);
    expect(after.selected).toBe(0); // selection locked after guessing
  });
});
