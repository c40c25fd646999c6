"""Versioned single-file checkpoints.

One .npz per checkpoint: policy and baseline arrays plus a JSON metadata
blob holding the full configuration, the vocabulary, the grammar hash, the
epoch counter and the seeding state (master seed + epoch; component streams
are re-derived, so this is the complete RNG state). Loading rebuilds the
grammar from the stored config and refuses a file whose grammar hash does
not match.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baseline import BaselineNet
from .config import Config, config_hash, parse_config, serialize_config
from .features import Featurizer
from .grammar import Grammar, build_grammar
from .policy import Policy

CHECKPOINT_FORMAT = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(
    path: str | Path,
    cfg: Config,
    master_seed: int,
    epoch: int,
    policy: Policy,
    baseline: BaselineNet,
    grammar: Grammar,
    target_log: dict[int, set] | None = None,
    kind: str = "rl",
) -> Path:
    from . import __version__

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "kind": kind,
        "epoch": int(epoch),
        "master_seed": int(master_seed),
        "rng": {"scheme": "hash-derive-v1", "master_seed": int(master_seed), "next_epoch": int(epoch)},
        "config_toml": serialize_config(cfg),
        "config_hash": config_hash(cfg),
        "code_version": __version__,
        "vocab": list(grammar.vocab.tokens),
        "templates": [list(t) for t in grammar.templates],
        "grammar_hash": grammar.hash(),
        "optimizer": {"lr": cfg.trainer.lr, "baseline_lr": cfg.trainer.baseline_lr},
        "target_log": {str(k): sorted(v) for k, v in (target_log or {}).items()},
    }
    np.savez(
        path,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        policy_w=policy.w,
        policy_b=policy.b,
        baseline_w1=baseline.w1,
        baseline_b1=baseline.b1,
        baseline_w2=baseline.w2,
        baseline_b2=np.array([baseline.b2]),
    )
    return path


@dataclass
class Checkpoint:
    path: Path
    meta: dict
    config: Config
    policy: Policy
    baseline: BaselineNet
    grammar: Grammar
    featurizer: Featurizer

    @property
    def epoch(self) -> int:
        return self.meta["epoch"]

    @property
    def master_seed(self) -> int:
        return self.meta["master_seed"]

    @property
    def target_log(self) -> dict[int, set]:
        return {int(k): set(v) for k, v in self.meta.get("target_log", {}).items()}


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path}: unsupported checkpoint format {meta.get('format')}")
        cfg = parse_config(meta["config_toml"])
        grammar = build_grammar(cfg.world, cfg.grammar, cfg.questioner.m_max)
        if grammar.hash() != meta["grammar_hash"]:
            raise CheckpointError(f"{path}: grammar hash mismatch with stored config")
        if list(grammar.vocab.tokens) != meta["vocab"]:
            raise CheckpointError(f"{path}: vocabulary mismatch with stored config")
        policy = Policy(w=data["policy_w"].copy(), b=data["policy_b"].copy())
        baseline = BaselineNet(
            w1=data["baseline_w1"].copy(),
            b1=data["baseline_b1"].copy(),
            w2=data["baseline_w2"].copy(),
            b2=float(data["baseline_b2"][0]),
        )
    featurizer = Featurizer(grammar, cfg.rewards.j_max)
    if policy.w.shape != (len(grammar.vocab), featurizer.dim):
        raise CheckpointError(f"{path}: policy shape does not match grammar/features")
    return Checkpoint(
        path=path, meta=meta, config=cfg, policy=policy, baseline=baseline,
        grammar=grammar, featurizer=featurizer,
    )
