"""Evaluation protocol and analysis studies.

Two game sources: NewObject plays on training scenes but only with targets
never used during training (enforced against the recorded target log),
NewImage plays on held-out scenes. Inference mode
is sampling, greedy or beam. On top of per-game records sit the three
analyses: forced-guess success per round, the ascending-trend percentage of
the target probability in successful games, and the share of questions whose
per-object answers are not all identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config, config_hash, with_reward_variant
from .features import Featurizer
from .grammar import build_grammar
from .oracle import OracleConfig
from .policy import Policy, decode_question
from .rewards import RewardConfig
from .seeding import derive_seed, rng_for
from .trainer import (
    Trajectory,
    _PlanActor,
    _PolicyActor,
    generate_expert_episodes,
    pretrain_supervised,
    rollout_batch,
    run_episode,
    trainable_targets,
    train,
)
from .world import Scene, make_splits

SPLIT_MODES = ("NewObject", "NewImage")
INFER_MODES = ("sampling", "greedy", "beam")
ABLATION_VARIANTS = ("supervised", "sole", "rg", "rg+rp", "rg+ri", "full")


@dataclass
class EvalResult:
    success_rate: float
    n_games: int
    records: list[Trajectory]
    mean_rounds: float
    mean_rounds_successful: float | None

    def to_summary(self) -> dict:
        return {
            "success": self.success_rate,
            "n_games": self.n_games,
            "mean_rounds": self.mean_rounds,
            "mean_rounds_successful": self.mean_rounds_successful,
        }


def _make_actor(policy: Policy, infer_mode: str, beam_width: int):
    if infer_mode == "sampling":
        return _PolicyActor(policy)
    if infer_mode == "greedy":
        return _PlanActor(lambda state, rng: decode_question(policy, state, "greedy"))
    if infer_mode == "beam":
        return _PlanActor(
            lambda state, rng: decode_question(policy, state, "beam", beam_width=beam_width)
        )
    raise ValueError(f"unknown inference mode {infer_mode!r}")


def evaluate(
    policy: Policy,
    scenes: list[Scene],
    split_mode: str,
    infer_mode: str,
    n_games: int,
    seed: int,
    featurizer: Featurizer,
    oracle_cfg: OracleConfig,
    reward_cfg: RewardConfig,
    target_log: dict[int, set] | None = None,
    beam_width: int = 5,
) -> EvalResult:
    """Play n_games and report the fraction where the guess hit the target."""
    if not scenes:
        raise ValueError("empty scene set")
    if split_mode not in SPLIT_MODES:
        raise ValueError(f"split_mode must be one of {SPLIT_MODES}")
    if split_mode == "NewObject":
        log = target_log or {}
        eligible = [
            (s, [i for i in range(s.n_objects) if i not in log.get(s.id, set())])
            for s in scenes
        ]
        eligible = [(s, ids) for s, ids in eligible if ids]
        if not eligible:
            raise ValueError("no unseen targets remain on the training scenes")
    else:
        eligible = [(s, list(range(s.n_objects))) for s in scenes]

    jobs = []
    for i in range(n_games):
        pick = rng_for(seed, "eval-pick", i)
        scene, ids = eligible[int(pick.integers(len(eligible)))]
        target = int(ids[int(pick.integers(len(ids)))])
        jobs.append((scene, target, derive_seed(seed, "eval-episode", i)))

    records: list[Trajectory] = []
    n_success = 0
    tables: dict = {}
    if infer_mode == "sampling":
        # token-level sampling is exactly the training engine
        empty_f = np.empty((0, featurizer.dim))
        empty_m = np.empty((0, len(featurizer.grammar.vocab)), dtype=np.uint8)
        for lo in range(0, n_games, 256):
            for tr in rollout_batch(jobs[lo : lo + 256], featurizer, policy, oracle_cfg,
                                    reward_cfg, table_cache=tables):
                tr.features = empty_f  # step records are dead weight for analysis
                tr.masks = empty_m
                records.append(tr)
        n_success = sum(tr.success for tr in records)
    else:
        for scene, target, ep_seed in jobs:
            if scene.id not in tables:
                tables[scene.id] = featurizer.table(scene)
            actor = _make_actor(policy, infer_mode, beam_width)
            traj = run_episode(
                actor, featurizer, scene, target, oracle_cfg, reward_cfg, ep_seed,
                record_steps=False, table=tables[scene.id],
            )
            records.append(traj)
            n_success += traj.success

    rounds_all = [tr.n_rounds for tr in records]
    rounds_win = [tr.n_rounds for tr in records if tr.success]
    return EvalResult(
        success_rate=n_success / n_games,
        n_games=n_games,
        records=records,
        mean_rounds=float(np.mean(rounds_all)),
        mean_rounds_successful=float(np.mean(rounds_win)) if rounds_win else None,
    )


def round_success_curve(records: list[Trajectory], j_max: int) -> list[dict]:
    """Success counts/ratios if the guess were forced at each round r."""
    out = []
    n = len(records)
    for r in range(1, j_max + 1):
        count = 0
        for tr in records:
            if tr.rounds:
                post = tr.rounds[min(r, len(tr.rounds)) - 1].posterior
                forced = int(np.argmax(post))
            else:
                forced = 0  # uniform prior, lowest-id tie break
            count += forced == tr.target_id
        out.append({"round": r, "successes": count, "ratio": count / n if n else 0.0})
    return out


def progressive_trend_pct(records: list[Trajectory]) -> float | None:
    """Share of successful games whose target probability never decreases
    across rounds. None when there are no successful games."""
    wins = [tr for tr in records if tr.success]
    if not wins:
        return None
    ascending = 0
    for tr in wins:
        seq = [r.p_target for r in tr.rounds]
        ascending += all(b >= a for a, b in zip(seq, seq[1:]))
    return 100.0 * ascending / len(wins)


def high_quality_pct(records: list[Trajectory]) -> float | None:
    """Share of questions in successful games whose per-object answers are
    not all identical. None when successful games asked no questions."""
    total = 0
    good = 0
    for tr in records:
        if not tr.success:
            continue
        total += len(tr.rounds)
        good += sum(r.informative for r in tr.rounds)
    if total == 0:
        return None
    return 100.0 * good / total


# -- ablation runner -------------------------------------------------------------


@dataclass
class AblationReport:
    variants: tuple[str, ...]
    seeds: tuple[int, ...]
    cells: dict  # (variant, split, mode) -> list of per-seed success rates
    studies: dict  # variant -> {"trend_pct", "quality_pct", "mean_rounds_successful"}
    config_hash: str
    code_version: str

    def mean(self, variant: str, split: str, mode: str) -> float:
        return float(np.mean(self.cells[(variant, split, mode)]))

    def std(self, variant: str, split: str, mode: str) -> float:
        return float(np.std(self.cells[(variant, split, mode)]))

    def to_json(self) -> dict:
        return {
            "kind": "ablation-report",
            "schema": 1,
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "seeds": list(self.seeds),
            "variants": list(self.variants),
            "cells": {
                f"{v}/{s}/{m}": vals for (v, s, m), vals in sorted(self.cells.items())
            },
            "studies": self.studies,
        }

    def render_table(self) -> str:
        lines = []
        width = max(len(v) for v in self.variants) + 2
        for split in SPLIT_MODES:
            lines.append(f"{split}  (mean +/- std over {len(self.seeds)} seeds)")
            header = "variant".ljust(width) + "".join(m.rjust(18) for m in INFER_MODES)
            lines.append(header)
            lines.append("-" * len(header))
            for v in self.variants:
                row = v.ljust(width)
                for m in INFER_MODES:
                    vals = self.cells[(v, split, m)]
                    row += f"{np.mean(vals):7.3f} +/- {np.std(vals):5.3f}".rjust(18)
                lines.append(row)
            lines.append("")
        return "\n".join(lines)


@dataclass
class SeedRun:
    """Everything trained for one seed of the ablation."""

    pretrained: Policy
    variant_policies: dict = field(default_factory=dict)
    variant_logs: dict = field(default_factory=dict)
    train_scenes: list[Scene] = field(default_factory=list)
    test_scenes: list[Scene] = field(default_factory=list)
    featurizer: Featurizer | None = None


def pretrain_for_seed(cfg: Config, seed: int) -> tuple[Policy, dict, SeedRun]:
    """Expert-demonstration pretraining shared by all variants of one seed."""
    grammar = build_grammar(cfg.world, cfg.grammar, cfg.questioner.m_max)
    featurizer = Featurizer(grammar, cfg.rewards.j_max)
    train_scenes, test_scenes = make_splits(
        cfg.sizes.n_train_scenes, cfg.sizes.n_test_scenes, cfg.world, derive_seed(seed, "world")
    )
    allowed = {
        s.id: trainable_targets(s, seed, cfg.trainer.target_holdout) for s in train_scenes
    }
    episodes = generate_expert_episodes(
        featurizer, train_scenes, cfg.pretrain.episodes, cfg.oracle, cfg.rewards,
        seed, cfg.pretrain.stop_threshold, allowed,
    )
    policy = Policy.zeros(len(grammar.vocab), featurizer.dim)
    pretrain_supervised(
        episodes, policy, cfg.pretrain.epochs, cfg.pretrain.batch, cfg.pretrain.lr, seed
    )
    log: dict[int, set] = {s.id: set() for s in train_scenes}
    for ep in episodes:
        log[ep.scene_id].add(ep.target_id)
    run = SeedRun(
        pretrained=policy, train_scenes=train_scenes, test_scenes=test_scenes,
        featurizer=featurizer,
    )
    return policy, log, run


def run_ablation(
    cfg: Config,
    seeds: list[int],
    out_dir: str | Path | None = None,
    checkpoint_dir: str | Path | None = None,
) -> AblationReport:
    """Train every reward variant for every seed and tabulate success rates."""
    from . import __version__

    if len(seeds) < 3:
        raise ValueError("ablation needs at least 3 seeds")
    cells = {(v, s, m): [] for v in ABLATION_VARIANTS for s in SPLIT_MODES for m in INFER_MODES}
    # analysis studies read pooled greedy dialogs: argmax decoding exposes the
    # trained choice structure without exploration noise
    pooled: dict[str, list[Trajectory]] = {v: [] for v in ABLATION_VARIANTS}

    for seed in seeds:
        pretrained, pre_log, run = pretrain_for_seed(cfg, seed)
        for variant in ABLATION_VARIANTS:
            if variant == "supervised":
                policy = pretrained
                baseline = None
                target_log = {k: set(v) for k, v in pre_log.items()}
            else:
                vcfg = with_reward_variant(cfg, variant)
                result = train(vcfg, master_seed=seed, warm_start=pretrained)
                policy = result.policy
                baseline = result.baseline
                target_log = {
                    sid: result.target_log.get(sid, set()) | pre_log.get(sid, set())
                    for sid in pre_log
                }
            run.variant_policies[variant] = policy
            run.variant_logs[variant] = target_log
            if checkpoint_dir is not None:
                from .baseline import BaselineNet
                from .checkpoint import save_checkpoint

                if baseline is None:
                    baseline = BaselineNet.init(
                        run.featurizer.dim, cfg.trainer.baseline_hidden,
                        rng_for(seed, "baseline-init"),
                    )
                save_checkpoint(
                    Path(checkpoint_dir) / f"{variant.replace('+', '-')}-seed{seed}.npz",
                    cfg, seed, cfg.trainer.epochs, policy, baseline,
                    run.featurizer.grammar, target_log, kind="ablation",
                )

            for split in SPLIT_MODES:
                scenes = run.train_scenes if split == "NewObject" else run.test_scenes
                for mode in INFER_MODES:
                    res = evaluate(
                        policy, scenes, split, mode, cfg.eval.n_games,
                        derive_seed(seed, f"ablate-{variant}-{split}-{mode}"),
                        run.featurizer, cfg.oracle, cfg.rewards,
                        target_log=target_log, beam_width=cfg.questioner.beam_width,
                    )
                    cells[(variant, split, mode)].append(res.success_rate)
                    if mode == "greedy":
                        pooled[variant].extend(res.records)

    studies = {}
    for variant in ABLATION_VARIANTS:
        recs = pooled[variant]
        wins = [tr.n_rounds for tr in recs if tr.success]
        studies[variant] = {
            "trend_pct": progressive_trend_pct(recs),
            "quality_pct": high_quality_pct(recs),
            "mean_rounds_successful": float(np.mean(wins)) if wins else None,
        }

    report = AblationReport(
        variants=ABLATION_VARIANTS, seeds=tuple(seeds), cells=cells, studies=studies,
        config_hash=config_hash(cfg), code_version=__version__,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "ablation-report.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, indent=2)
        with open(out_dir / "ablation-table.txt", "w", encoding="utf-8") as fh:
            fh.write(report.render_table())
    return report
