// Typed client for the study service. The client holds no game logic:
// every payload is passed through as the server sent it.

export interface SceneObjectView {
  id: number;
  category: string;
  attributes: Record<string, string>;
  box: [number, number, number, number];
}

export interface SceneView {
  id: number;
  objects: SceneObjectView[];
}

export interface SessionCreated {
  session_id: string;
  j_max: number;
  mode: string;
  scene: SceneView;
  transcript: QaRound[];
}

export interface StepResult {
  round: number | null;
  question: string | null;
  answer: string | null;
  terminal: boolean;
}

export interface QaRound {
  round: number;
  question: string;
  answer: string;
}

export interface TranscriptView {
  session_id: string;
  terminal: boolean;
  rounds: QaRound[];
}

export interface GuessResult {
  correct: boolean;
  target_id: number;
}

export interface StudySummary {
  overall: { sessions: number; correct: number; accuracy: number | null };
  by_checkpoint: Record<string, { sessions: number; correct: number; accuracy: number }>;
  groups?: { n_groups: number; majority_correct: number; accuracy: number };
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(base + path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { detail?: string }).detail ?? resp.statusText);
  }
  return body as T;
}

export class StudyApi {
  constructor(public base: string) {}

  createSession(opts: {
    checkpoint: string;
    scene_seed: number;
    session_seed?: number;
    mode?: string;
    group_id?: string;
  }): Promise<SessionCreated> {
    return request(this.base, "/sessions", { method: "POST", body: JSON.stringify(opts) });
  }

  step(sessionId: string): Promise<StepResult> {
    return request(this.base, `/sessions/${sessionId}/step`, { method: "POST" });
  }

  guess(sessionId: string, objectId: number): Promise<GuessResult> {
    return request(this.base, `/sessions/${sessionId}/guess`, {
      method: "POST",
      body: JSON.stringify({ object_id: objectId }),
    });
  }

  transcript(sessionId: string): Promise<TranscriptView> {
    return request(this.base, `/sessions/${sessionId}/transcript`);
  }

  summary(): Promise<StudySummary> {
    return request(this.base, "/study/summary");
  }

  health(): Promise<{ status: string }> {
    return request(this.base, "/healthz");
  }
}
