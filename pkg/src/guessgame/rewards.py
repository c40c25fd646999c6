"""Round-level rewards and their mapping onto per-step rewards and returns.

Three shaped components: a terminal goal reward 1 + lambda * j_max / J on
success (0 on failure), a per-round progressive reward equal to the change in
the guesser's target probability (rounds after the first only), and a flat
informativeness bonus eta when a question's per-object answers are not all
identical. Round rewards attach to the step that emitted the round's "?";
the goal reward attaches to the terminal step. Returns are undiscounted
suffix sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import Answer


@dataclass(frozen=True)
class RewardConfig:
    lambda_: float = 0.1
    eta: float = 0.1
    j_max: int = 5
    goal: bool = True
    progressive: bool = True
    informativeness: bool = True
    sole_reward: bool = False

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ValueError("rewards.lambda: must be >= 0")
        if self.eta < 0:
            raise ValueError("rewards.eta: must be >= 0")
        if self.j_max < 1:
            raise ValueError("rewards.j_max: must be >= 1")
        if self.sole_reward and (self.goal or self.progressive or self.informativeness):
            raise ValueError(
                "rewards.sole_reward: mutually exclusive with goal/progressive/informativeness"
            )


@dataclass(frozen=True)
class StepReward:
    t: int
    value: float


@dataclass(frozen=True)
class RoundOutcome:
    """What the reward assembly needs to know about one completed round."""

    n_steps: int  # tokens emitted for this question, including "?"
    progressive: float | None  # p_j - p_{j-1}; None for round 1
    informative: bool


@dataclass(frozen=True)
class TerminalOutcome:
    success: bool
    rounds: int
    ended_by_stop: bool  # True when "<End>" was emitted (extra terminal step)


def goal_reward(success: bool, rounds: int, cfg: RewardConfig) -> float:
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if rounds > cfg.j_max:
        raise ValueError(f"rounds {rounds} exceeds j_max {cfg.j_max}")
    if not success:
        return 0.0
    return 1.0 + cfg.lambda_ * cfg.j_max / rounds


def progressive_reward(p_now: float, p_prev: float) -> float:
    return p_now - p_prev


def informativeness_reward(answers: list[Answer], cfg: RewardConfig) -> float:
    if not answers:
        raise ValueError("empty answer list")
    return cfg.eta if any(a != answers[0] for a in answers) else 0.0


def _terminal_goal_value(terminal: TerminalOutcome, cfg: RewardConfig) -> float:
    if cfg.sole_reward:
        return 1.0 if terminal.success else 0.0
    if not cfg.goal:
        return 0.0
    # an immediate "<End>" has zero rounds; the bonus is capped at its J=1 value
    return goal_reward(terminal.success, max(terminal.rounds, 1), cfg)


def assemble_step_rewards(
    rounds: list[RoundOutcome], terminal: TerminalOutcome, cfg: RewardConfig
) -> list[StepReward]:
    if terminal.rounds != len(rounds):
        raise ValueError(f"terminal says {terminal.rounds} rounds, got {len(rounds)} records")
    if not terminal.ended_by_stop and len(rounds) != cfg.j_max:
        raise ValueError("episode without '<End>' must have run exactly j_max rounds")
    for j, rec in enumerate(rounds, start=1):
        if rec.n_steps < 1:
            raise ValueError("round with no steps")
        if (rec.progressive is None) != (j == 1):
            raise ValueError("progressive reward present iff round > 1")

    return [StepReward(t=t, value=v) for t, v in enumerate(reward_values(rounds, terminal, cfg))]


def reward_values(
    rounds: list[RoundOutcome], terminal: TerminalOutcome, cfg: RewardConfig
) -> list[float]:
    """Step reward values only (the fast path used by the rollout engines;
    assemble_step_rewards validates the episode shape first)."""
    n_steps = sum(r.n_steps for r in rounds) + (1 if terminal.ended_by_stop else 0)
    values = [0.0] * n_steps

    if not cfg.sole_reward:
        t = 0
        for rec in rounds:
            t += rec.n_steps
            value = 0.0
            if cfg.progressive and rec.progressive is not None:
                value += rec.progressive
            if cfg.informativeness and rec.informative:
                value += cfg.eta
            values[t - 1] += value  # the step that emitted this round's "?"

    values[n_steps - 1] += _terminal_goal_value(terminal, cfg)
    return values


def returns(step_rewards) -> np.ndarray:
    """Q_t as the within-episode suffix sum of step rewards."""
    if isinstance(step_rewards, np.ndarray):
        vals = step_rewards.astype(np.float64, copy=False)
    else:
        vals = np.asarray(
            [s.value if isinstance(s, StepReward) else float(s) for s in step_rewards],
            dtype=np.float64,
        )
    return np.cumsum(vals[::-1])[::-1].copy()
