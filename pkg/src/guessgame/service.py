"""Session HTTP API for the human-guesser study.

The trained questioner and the oracle play; a human watches question-answer
pairs accumulate and submits a guess. The service holds per-session state and
delegates every game-semantics decision to the core modules (decoding,
oracle answering, posterior bookkeeping all go through the same functions the
trainer uses). The target id never appears in any payload until the guess is
submitted. Completed sessions append to a line-delimited study ledger.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .checkpoint import Checkpoint, load_checkpoint
from .config import DECODE_MODES
from .features import QuestionerState
from .oracle import OracleConfig
from .policy import decode_question
from .seeding import derive_seed, rng_for
from .trainer import RoundRecord, apply_round
from .world import Scene, assign_target, generate_scene

LEDGER_SCHEMA_VERSION = 1


@dataclass
class ServiceSettings:
    checkpoint_dir: str | Path = "."
    ledger_path: str | Path = "study-ledger.jsonl"
    ttl_minutes: float = 30.0
    decode_mode: str = "greedy"


@dataclass
class _Session:
    id: str
    checkpoint_id: str
    ckpt: Checkpoint
    scene: Scene
    target_id: int
    state: QuestionerState
    rng_tokens: object
    rng_oracle: object
    mode: str
    group_id: str | None
    created_at: float
    last_access: float
    rounds: list[RoundRecord] = field(default_factory=list)
    terminal: bool = False
    status: str = "active"  # active | guessed | expired
    lock: threading.Lock = field(default_factory=threading.Lock)
    prev_p: float | None = None


class CreateSessionRequest(BaseModel):
    checkpoint: str
    scene_seed: int
    session_seed: int | None = None
    mode: str | None = None
    group_id: str | None = None


class GuessRequest(BaseModel):
    object_id: int


def _scene_view(scene: Scene) -> dict:
    return {
        "id": scene.id,
        "objects": [
            {
                "id": o.id,
                "category": o.category,
                "attributes": dict(o.attributes),
                "box": list(o.box),
            }
            for o in scene.objects
        ],
    }


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings()
    app = FastAPI(title="guessgame study service")
    sessions: dict[str, _Session] = {}
    ckpt_cache: dict[str, Checkpoint] = {}
    ledger_path = Path(settings.ledger_path)
    ledger_lock = threading.Lock()

    def load_ckpt(name: str) -> Checkpoint:
        if name not in ckpt_cache:
            path = Path(settings.checkpoint_dir) / f"{name}.npz"
            if not path.exists():
                raise HTTPException(status_code=404, detail=f"unknown checkpoint {name!r}")
            ckpt_cache[name] = load_checkpoint(path)
        return ckpt_cache[name]

    def get_session(sid: str) -> _Session:
        sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(status_code=404, detail="unknown session")
        now = time.monotonic()
        if sess.status == "active" and now - sess.last_access > settings.ttl_minutes * 60.0:
            sess.status = "expired"
        if sess.status == "expired":
            raise HTTPException(status_code=409, detail="session expired")
        sess.last_access = now
        return sess

    def append_ledger(rec: dict) -> None:
        with ledger_lock:
            new = not ledger_path.exists() or ledger_path.stat().st_size == 0
            with open(ledger_path, "a", encoding="utf-8") as fh:
                if new:
                    from . import __version__

                    fh.write(json.dumps({
                        "kind": "header", "schema": LEDGER_SCHEMA_VERSION,
                        "code_version": __version__,
                    }) + "\n")
                fh.write(json.dumps(rec) + "\n")

    @app.get("/healthz")
    def healthz():
        from . import __version__, backend_name

        return {"status": "ok", "version": __version__, "backend": backend_name()}

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        ckpt = load_ckpt(req.checkpoint)
        mode = req.mode or settings.decode_mode
        if mode not in DECODE_MODES:
            raise HTTPException(status_code=422, detail=f"mode must be one of {DECODE_MODES}")
        scene = generate_scene(ckpt.config.world, req.scene_seed, scene_id=0, split="test")
        target = assign_target(scene, derive_seed(req.scene_seed, "service-target")).target_id
        session_seed = req.session_seed
        if session_seed is None:
            session_seed = int(uuid.uuid4().int & 0x7FFF_FFFF)
        now = time.monotonic()
        sess = _Session(
            id=uuid.uuid4().hex,
            checkpoint_id=req.checkpoint,
            ckpt=ckpt,
            scene=scene,
            target_id=target,
            state=QuestionerState.initial(ckpt.featurizer, scene),
            rng_tokens=rng_for(session_seed, "tokens"),
            rng_oracle=rng_for(session_seed, "oracle"),
            mode=mode,
            group_id=req.group_id,
            created_at=now,
            last_access=now,
        )
        sessions[sess.id] = sess
        return {
            "session_id": sess.id,
            "j_max": ckpt.config.rewards.j_max,
            "mode": mode,
            "scene": _scene_view(scene),
            "transcript": [],
        }

    @app.post("/sessions/{sid}/step")
    def step_session(sid: str):
        sess = get_session(sid)
        with sess.lock:
            if sess.status != "active":
                raise HTTPException(status_code=409, detail=f"session is {sess.status}")
            if sess.terminal:
                raise HTTPException(status_code=409, detail="dialogue already ended")
            cfg = sess.ckpt.config
            tokens = decode_question(
                sess.ckpt.policy, sess.state, sess.mode,
                rng=sess.rng_tokens, beam_width=cfg.questioner.beam_width,
            )
            vocab = sess.ckpt.grammar.vocab
            if tokens == (vocab.tokens[vocab.end_id],):
                sess.terminal = True
                return {"round": None, "question": None, "answer": None, "terminal": True}
            node = sess.ckpt.grammar.walk(tokens)
            pred_idx = sess.ckpt.grammar.leaf_predicate(node)
            rec = apply_round(
                sess.state, tokens, pred_idx, sess.target_id,
                OracleConfig(epsilon=cfg.oracle.epsilon), sess.rng_oracle, sess.prev_p,
            )
            sess.prev_p = rec.p_target
            sess.rounds.append(rec)
            if len(sess.rounds) >= cfg.rewards.j_max:
                sess.terminal = True
            return {
                "round": len(sess.rounds),
                "question": " ".join(rec.question),
                "answer": rec.answer.label,
                "terminal": sess.terminal,
            }

    @app.post("/sessions/{sid}/guess")
    def submit_guess(sid: str, req: GuessRequest):
        sess = get_session(sid)
        with sess.lock:
            if sess.status != "active":
                raise HTTPException(status_code=409, detail="guess already submitted")
            if not 0 <= req.object_id < sess.scene.n_objects:
                raise HTTPException(status_code=422, detail="invalid object id")
            sess.status = "guessed"
            correct = req.object_id == sess.target_id
            append_ledger(
                {
                    "kind": "session",
                    "session_id": sess.id,
                    "checkpoint": sess.checkpoint_id,
                    "group_id": sess.group_id,
                    "rounds_seen": len(sess.rounds),
                    "correct": correct,
                    "guess": req.object_id,
                    "target": sess.target_id,
                    "elapsed_s": round(time.monotonic() - sess.created_at, 3),
                }
            )
            return {"correct": correct, "target_id": sess.target_id}

    @app.get("/sessions/{sid}/transcript")
    def transcript(sid: str):
        sess = get_session(sid)
        return {
            "session_id": sess.id,
            "terminal": sess.terminal,
            "rounds": [
                {"round": i + 1, "question": " ".join(r.question), "answer": r.answer.label}
                for i, r in enumerate(sess.rounds)
            ],
        }

    @app.get("/study/summary")
    def study_summary():
        return summarize_ledger(ledger_path)

    return app


def summarize_ledger(path: str | Path) -> dict:
    """Aggregate human accuracy, per-checkpoint and majority-vote by group."""
    records = []
    path = Path(path)
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                if rec.get("kind") == "session":
                    records.append(rec)
    by_ckpt: dict[str, list[bool]] = {}
    groups: dict[str, list[bool]] = {}
    for rec in records:
        by_ckpt.setdefault(rec["checkpoint"], []).append(rec["correct"])
        if rec.get("group_id"):
            groups.setdefault(rec["group_id"], []).append(rec["correct"])
    n = len(records)
    correct = sum(r["correct"] for r in records)
    out = {
        "overall": {"sessions": n, "correct": correct, "accuracy": correct / n if n else None},
        "by_checkpoint": {
            k: {"sessions": len(v), "correct": sum(v), "accuracy": sum(v) / len(v)}
            for k, v in sorted(by_ckpt.items())
        },
    }
    if groups:
        wins = sum(1 for v in groups.values() if 2 * sum(v) > len(v))
        out["groups"] = {
            "n_groups": len(groups),
            "majority_correct": wins,
            "accuracy": wins / len(groups),
        }
    return out
