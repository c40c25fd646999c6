"""Experiment configuration.

TOML file with one section per subsystem; every value has a default, so an
empty file is a complete configuration. Validation errors always name the
offending key and the allowed range. serialize_config() emits a canonical
TOML text whose hash is embedded in every artifact the harness writes.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .grammar import GrammarSpec
from .oracle import OracleConfig
from .rewards import RewardConfig
from .world import AttributeSpec, GenConfig

DECODE_MODES = ("sampling", "greedy", "beam")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class QuestionerConfig:
    m_max: int = 12
    beam_width: int = 5


@dataclass(frozen=True)
class TrainerConfig:
    lr: float = 0.001
    baseline_lr: float = 0.01
    batch: int = 64
    epochs: int = 100
    baseline_hidden: int = 32
    baseline_steps: int = 1
    checkpoint_every: int = 0  # 0: final checkpoint only
    target_holdout: float = 0.25
    log_episodes: bool = False
    expected_score: bool = False  # score summed over all legal actions instead of the sampled one
    entropy_bonus: float = 0.0
    normalize_advantage: bool = False


@dataclass(frozen=True)
class PretrainConfig:
    episodes: int = 256
    epochs: int = 5
    lr: float = 0.05
    batch: int = 32
    stop_threshold: float = 0.95


@dataclass(frozen=True)
class WorldSizes:
    n_train_scenes: int = 64
    n_test_scenes: int = 32


@dataclass(frozen=True)
class EvalConfig:
    n_games: int = 1000


@dataclass(frozen=True)
class HarnessConfig:
    workers: int = 0  # 0: use available cores
    log_dir: str = "runs"


@dataclass(frozen=True)
class ServiceConfig:
    ttl_minutes: float = 30.0
    decode_mode: str = "greedy"
    checkpoint_dir: str = "."


@dataclass(frozen=True)
class Config:
    world: GenConfig = field(default_factory=GenConfig)
    sizes: WorldSizes = field(default_factory=WorldSizes)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    grammar: GrammarSpec = field(default_factory=GrammarSpec)
    questioner: QuestionerConfig = field(default_factory=QuestionerConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)


def default_config() -> Config:
    return Config()


class _Section:
    def __init__(self, name: str, raw: dict):
        self.name = name
        self.raw = dict(raw)

    def take(self, key, kind, default, lo=None, hi=None, hi_excl=None, choices=None):
        if key not in self.raw:
            return default
        val = self.raw.pop(key)
        where = f"{self.name}.{key}"
        if kind is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if kind is int and isinstance(val, bool):
            raise ConfigError(f"{where}: expected integer, got boolean")
        if not isinstance(val, kind):
            raise ConfigError(f"{where}: expected {kind.__name__}, got {type(val).__name__}")
        if lo is not None and val < lo:
            raise ConfigError(f"{where}: must be >= {lo} (got {val})")
        if hi is not None and val > hi:
            raise ConfigError(f"{where}: must be <= {hi} (got {val})")
        if hi_excl is not None and val >= hi_excl:
            raise ConfigError(f"{where}: must be < {hi_excl} (got {val})")
        if choices is not None and val not in choices:
            raise ConfigError(f"{where}: must be one of {choices} (got {val!r})")
        return val

    def take_str_list(self, key, default):
        if key not in self.raw:
            return default
        val = self.raw.pop(key)
        where = f"{self.name}.{key}"
        if not isinstance(val, list) or not all(isinstance(x, str) for x in val):
            raise ConfigError(f"{where}: expected a list of strings")
        return tuple(val)

    def finish(self):
        for key in self.raw:
            raise ConfigError(f"{self.name}.{key}: unknown key")


def _parse_world(raw: dict) -> tuple[GenConfig, WorldSizes]:
    attrs_raw = raw.pop("attributes", None)
    sec = _Section("world", raw)
    categories = sec.take_str_list("categories", GenConfig().categories)
    n_min = sec.take("n_objects_min", int, 8, lo=2)
    n_max = sec.take("n_objects_max", int, max(8, n_min), lo=n_min)
    sizes = WorldSizes(
        n_train_scenes=sec.take("n_train_scenes", int, 64, lo=1),
        n_test_scenes=sec.take("n_test_scenes", int, 32, lo=1),
    )
    sec.finish()
    if attrs_raw is None:
        attributes = GenConfig().attributes
    else:
        if not isinstance(attrs_raw, dict):
            raise ConfigError("world.attributes: expected a table of attribute tables")
        attributes = {}
        for name, spec in attrs_raw.items():
            asec = _Section(f"world.attributes.{name}", spec)
            values = asec.take_str_list("values", None)
            if not values:
                raise ConfigError(f"world.attributes.{name}.values: required, non-empty")
            presence = asec.take("presence", float, 1.0, lo=0.0, hi=1.0)
            asec.finish()
            attributes[name] = AttributeSpec(values=values, presence=presence)
    return (
        GenConfig(
            categories=categories,
            attributes=attributes,
            n_objects_min=n_min,
            n_objects_max=n_max,
        ),
        sizes,
    )


def parse_config(text: str) -> Config:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config parse error: {e}") from e

    known = {
        "world", "oracle", "grammar", "questioner", "rewards",
        "trainer", "pretrain", "eval", "harness", "service",
    }
    for key in doc:
        if key not in known:
            raise ConfigError(f"{key}: unknown section")

    world, sizes = _parse_world(doc.get("world", {}))

    sec = _Section("oracle", doc.get("oracle", {}))
    oracle = OracleConfig(epsilon=sec.take("epsilon", float, 0.0, lo=0.0, hi_excl=1.0))
    sec.finish()

    sec = _Section("grammar", doc.get("grammar", {}))
    grammar = GrammarSpec(
        categories=sec.take("categories", bool, True),
        attributes=sec.take("attributes", bool, True),
        spatial=sec.take("spatial", bool, True),
    )
    sec.finish()

    sec = _Section("questioner", doc.get("questioner", {}))
    questioner = QuestionerConfig(
        m_max=sec.take("m_max", int, 12, lo=2),
        beam_width=sec.take("beam_width", int, 5, lo=1),
    )
    sec.finish()

    sec = _Section("rewards", doc.get("rewards", {}))
    try:
        rewards = RewardConfig(
            lambda_=sec.take("lambda", float, 0.1, lo=0.0),
            eta=sec.take("eta", float, 0.1, lo=0.0),
            j_max=sec.take("j_max", int, 5, lo=1),
            goal=sec.take("goal", bool, True),
            progressive=sec.take("progressive", bool, True),
            informativeness=sec.take("informativeness", bool, True),
            sole_reward=sec.take("sole_reward", bool, False),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    sec.finish()

    sec = _Section("trainer", doc.get("trainer", {}))
    trainer = TrainerConfig(
        lr=sec.take("lr", float, 0.001, lo=0.0),
        baseline_lr=sec.take("baseline_lr", float, 0.01, lo=0.0),
        batch=sec.take("batch", int, 64, lo=1),
        epochs=sec.take("epochs", int, 100, lo=0),
        baseline_hidden=sec.take("baseline_hidden", int, 32, lo=1),
        baseline_steps=sec.take("baseline_steps", int, 1, lo=1),
        checkpoint_every=sec.take("checkpoint_every", int, 0, lo=0),
        target_holdout=sec.take("target_holdout", float, 0.25, lo=0.0, hi_excl=1.0),
        log_episodes=sec.take("log_episodes", bool, False),
        expected_score=sec.take("expected_score", bool, False),
        entropy_bonus=sec.take("entropy_bonus", float, 0.0, lo=0.0),
        normalize_advantage=sec.take("normalize_advantage", bool, False),
    )
    sec.finish()

    sec = _Section("pretrain", doc.get("pretrain", {}))
    pretrain = PretrainConfig(
        episodes=sec.take("episodes", int, 256, lo=1),
        epochs=sec.take("epochs", int, 5, lo=0),
        lr=sec.take("lr", float, 0.05, lo=0.0),
        batch=sec.take("batch", int, 32, lo=1),
        stop_threshold=sec.take("stop_threshold", float, 0.95, lo=0.0, hi=1.0),
    )
    sec.finish()

    sec = _Section("eval", doc.get("eval", {}))
    eval_cfg = EvalConfig(n_games=sec.take("n_games", int, 1000, lo=1))
    sec.finish()

    sec = _Section("harness", doc.get("harness", {}))
    harness = HarnessConfig(
        workers=sec.take("workers", int, 0, lo=0),
        log_dir=sec.take("log_dir", str, "runs"),
    )
    sec.finish()

    sec = _Section("service", doc.get("service", {}))
    service = ServiceConfig(
        ttl_minutes=sec.take("ttl_minutes", float, 30.0, lo=0.1),
        decode_mode=sec.take("decode_mode", str, "greedy", choices=DECODE_MODES),
        checkpoint_dir=sec.take("checkpoint_dir", str, "."),
    )
    sec.finish()

    return Config(
        world=world,
        sizes=sizes,
        oracle=oracle,
        grammar=grammar,
        questioner=questioner,
        rewards=rewards,
        trainer=trainer,
        pretrain=pretrain,
        eval=eval_cfg,
        harness=harness,
        service=service,
    )


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value)}")


def serialize_config(cfg: Config) -> str:
    lines = []

    def section(name, pairs):
        lines.append(f"[{name}]")
        for k, v in pairs:
            lines.append(f"{k} = {_fmt(v)}")
        lines.append("")

    section("world", [
        ("categories", cfg.world.categories),
        ("n_objects_min", cfg.world.n_objects_min),
        ("n_objects_max", cfg.world.n_objects_max),
        ("n_train_scenes", cfg.sizes.n_train_scenes),
        ("n_test_scenes", cfg.sizes.n_test_scenes),
    ])
    for name, attr in cfg.world.attributes.items():
        section(f"world.attributes.{name}", [
            ("values", attr.values),
            ("presence", attr.presence),
        ])
    section("oracle", [("epsilon", cfg.oracle.epsilon)])
    section("grammar", [
        ("categories", cfg.grammar.categories),
        ("attributes", cfg.grammar.attributes),
        ("spatial", cfg.grammar.spatial),
    ])
    section("questioner", [
        ("m_max", cfg.questioner.m_max),
        ("beam_width", cfg.questioner.beam_width),
    ])
    section("rewards", [
        ("lambda", cfg.rewards.lambda_),
        ("eta", cfg.rewards.eta),
        ("j_max", cfg.rewards.j_max),
        ("goal", cfg.rewards.goal),
        ("progressive", cfg.rewards.progressive),
        ("informativeness", cfg.rewards.informativeness),
        ("sole_reward", cfg.rewards.sole_reward),
    ])
    section("trainer", [
        ("lr", cfg.trainer.lr),
        ("baseline_lr", cfg.trainer.baseline_lr),
        ("batch", cfg.trainer.batch),
        ("epochs", cfg.trainer.epochs),
        ("baseline_hidden", cfg.trainer.baseline_hidden),
        ("baseline_steps", cfg.trainer.baseline_steps),
        ("checkpoint_every", cfg.trainer.checkpoint_every),
        ("target_holdout", cfg.trainer.target_holdout),
        ("log_episodes", cfg.trainer.log_episodes),
        ("expected_score", cfg.trainer.expected_score),
        ("entropy_bonus", cfg.trainer.entropy_bonus),
        ("normalize_advantage", cfg.trainer.normalize_advantage),
    ])
    section("pretrain", [
        ("episodes", cfg.pretrain.episodes),
        ("epochs", cfg.pretrain.epochs),
        ("lr", cfg.pretrain.lr),
        ("batch", cfg.pretrain.batch),
        ("stop_threshold", cfg.pretrain.stop_threshold),
    ])
    section("eval", [("n_games", cfg.eval.n_games)])
    section("harness", [
        ("workers", cfg.harness.workers),
        ("log_dir", cfg.harness.log_dir),
    ])
    section("service", [
        ("ttl_minutes", cfg.service.ttl_minutes),
        ("decode_mode", cfg.service.decode_mode),
        ("checkpoint_dir", cfg.service.checkpoint_dir),
    ])
    return "\n".join(lines)


def config_hash(cfg: Config) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()[:12]


def with_reward_variant(cfg: Config, variant: str) -> Config:
    """Reward-flag presets used by the ablation table."""
    presets = {
        "full": dict(goal=True, progressive=True, informativeness=True, sole_reward=False),
        "rg+rp": dict(goal=True, progressive=True, informativeness=False, sole_reward=False),
        "rg+ri": dict(goal=True, progressive=False, informativeness=True, sole_reward=False),
        "rg": dict(goal=True, progressive=False, informativeness=False, sole_reward=False),
        "sole": dict(goal=False, progressive=False, informativeness=False, sole_reward=True),
    }
    if variant not in presets:
        raise ConfigError(f"unknown reward variant {variant!r}")
    return replace(cfg, rewards=replace(cfg.rewards, **presets[variant]))
