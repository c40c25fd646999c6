"""Append-only episode logs and replay verification.

Each line is one self-contained episode: the scene, the target, the episode
seed and the action token ids, plus the rewards and returns that were
observed. Replaying the actions through a fresh environment with the same
seed must reproduce rewards, returns and the outcome exactly; `verify_log`
checks that for every line. Reward attachment is the subtlest contract in
the package, which is why this exists as a first-class artifact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .config import Config, config_hash, parse_config, serialize_config
from .features import Featurizer
from .grammar import build_grammar
from .trainer import Trajectory, replay_episode
from .world import Scene, scene_from_record, scene_to_record

EPISODE_SCHEMA_VERSION = 1


def episode_record(traj: Trajectory, scene: Scene) -> dict:
    return {
        "kind": "episode",
        "schema": EPISODE_SCHEMA_VERSION,
        "scene": scene_to_record(scene),
        "target_id": traj.target_id,
        "seed": traj.seed,
        "actions": traj.actions.tolist(),
        "rewards": traj.rewards.tolist(),
        "returns": traj.returns.tolist(),
        "success": traj.success,
        "guessed": traj.guessed,
        "rounds": traj.n_rounds,
        "ended_by_stop": traj.ended_by_stop,
    }


class EpisodeWriter:
    def __init__(self, path: str | Path, cfg: Config):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")
        if self._fh.tell() == 0:
            from . import __version__

            header = {
                "kind": "header",
                "schema": EPISODE_SCHEMA_VERSION,
                "config_toml": serialize_config(cfg),
                "config_hash": config_hash(cfg),
                "code_version": __version__,
            }
            self._fh.write(json.dumps(header) + "\n")

    def write(self, traj: Trajectory, scene: Scene) -> None:
        self._fh.write(json.dumps(episode_record(traj, scene)) + "\n")

    def close(self) -> None:
        self._fh.close()


@dataclass
class ReplayReport:
    n_verified: int
    mismatches: list[str]

    @property
    def ok(self) -> bool:
        return not self.mismatches


def verify_log(path: str | Path) -> ReplayReport:
    """Re-execute every episode in a log and compare against the record."""
    path = Path(path)
    cfg = None
    featurizer = None
    n = 0
    mismatches: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            rec = json.loads(line)
            if rec.get("kind") == "header":
                cfg = parse_config(rec["config_toml"])
                grammar = build_grammar(cfg.world, cfg.grammar, cfg.questioner.m_max)
                featurizer = Featurizer(grammar, cfg.rewards.j_max)
                continue
            if rec.get("kind") != "episode":
                continue
            if featurizer is None:
                raise ValueError(f"{path}: episode before header (line {lineno})")
            scene = scene_from_record(rec["scene"])
            traj = replay_episode(
                scene, rec["target_id"], rec["actions"], cfg.oracle, cfg.rewards,
                featurizer, rec["seed"],
            )
            problems = []
            if traj.rewards.tolist() != rec["rewards"]:
                problems.append("rewards")
            if traj.returns.tolist() != rec["returns"]:
                problems.append("returns")
            if traj.success != rec["success"] or traj.guessed != rec["guessed"]:
                problems.append("outcome")
            if traj.n_rounds != rec["rounds"] or traj.ended_by_stop != rec["ended_by_stop"]:
                problems.append("shape")
            if problems:
                mismatches.append(f"line {lineno}: {', '.join(problems)} differ")
            n += 1
    return ReplayReport(n_verified=n, mismatches=mismatches)
