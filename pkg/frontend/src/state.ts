// Client session state. The server is authoritative: the client never
// computes correctness or transcripts itself, it only mirrors responses.
// After a reload the whole state is recoverable from the transcript endpoint.

import {
  GuessResult,
  QaRound,
  SceneView,
  SessionCreated,
  StepResult,
  StudyApi,
  StudySummary,
} from "./api.js";

export type Phase = "idle" | "active" | "terminal" | "guessed";

export interface SessionState {
  phase: Phase;
  sessionId: string | null;
  scene: SceneView | null;
  jMax: number;
  rounds: QaRound[];
  selected: number | null;
  result: GuessResult | null;
  error: string | null;
}

export function initialState(): SessionState {
  return {
    phase: "idle",
    sessionId: null,
    scene: null,
    jMax: 0,
    rounds: [],
    selected: null,
    result: null,
    error: null,
  };
}

export function applyCreated(state: SessionState, created: SessionCreated): SessionState {
  return {
    ...initialState(),
    phase: "active",
    sessionId: created.session_id,
    scene: created.scene,
    jMax: created.j_max,
    rounds: [...created.transcript],
  };
}

export function applyStep(state: SessionState, step: StepResult): SessionState {
  const rounds =
    step.question !== null && step.round !== null && step.answer !== null
      ? [...state.rounds, { round: step.round, question: step.question, answer: step.answer }]
      : state.rounds;
  return { ...state, rounds, phase: step.terminal ? "terminal" : state.phase };
}

export function applySelection(state: SessionState, objectId: number | null): SessionState {
  if (state.phase === "guessed") return state;
  return { ...state, selected: objectId };
}

export function applyGuess(state: SessionState, result: GuessResult): SessionState {
  return { ...state, phase: "guessed", result };
}

export function canStep(state: SessionState): boolean {
  return state.phase === "active";
}

export function canGuess(state: SessionState): boolean {
  return (state.phase === "active" || state.phase === "terminal") && state.selected !== null;
}

/** Drives one session against the service; holds the current state and
 * notifies subscribers after every transition. */
export class SessionController {
  state: SessionState = initialState();
  summary: StudySummary | null = null;
  private guessInFlight = false;

  constructor(
    private api: StudyApi,
    private onChange: (state: SessionState, summary: StudySummary | null) => void,
  ) {}

  private emit() {
    this.onChange(this.state, this.summary);
  }

  private fail(err: unknown) {
    this.state = { ...this.state, error: err instanceof Error ? err.message : String(err) };
    this.emit();
  }

  async start(checkpoint: string, sceneSeed: number, groupId?: string) {
    try {
      const created = await this.api.createSession({
        checkpoint,
        scene_seed: sceneSeed,
        group_id: groupId,
      });
      this.state = applyCreated(this.state, created);
      this.emit();
    } catch (err) {
      this.fail(err);
    }
  }

  async step() {
    if (!canStep(this.state) || !this.state.sessionId) return;
    try {
      const step = await this.api.step(this.state.sessionId);
      this.state = applyStep(this.state, step);
      this.emit();
    } catch (err) {
      this.fail(err);
    }
  }

  select(objectId: number | null) {
    this.state = applySelection(this.state, objectId);
    this.emit();
  }

  async guess() {
    if (!canGuess(this.state) || !this.state.sessionId || this.guessInFlight) return;
    this.guessInFlight = true; // double-click protection
    try {
      const result = await this.api.guess(this.state.sessionId, this.state.selected!);
      this.state = applyGuess(this.state, result);
      this.summary = await this.api.summary();
      this.emit();
    } catch (err) {
      this.fail(err);
    } finally {
      this.guessInFlight = false;
    }
  }

  /** Re-sync from the server (e.g. after a page reload with a session id). */
  async resume(sessionId: string, scene: SceneView, jMax: number) {
    try {
      const transcript = await this.api.transcript(sessionId);
      this.state = {
        ...initialState(),
        phase: transcript.terminal ? "terminal" : "active",
        sessionId,
        scene,
        jMax,
        rounds: transcript.rounds,
      };
      this.emit();
    } catch (err) {
      this.fail(err);
    }
  }
}
