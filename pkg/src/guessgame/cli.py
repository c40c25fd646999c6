"""Command-line entry point.

Subcommands: gen-world, pretrain, train, eval, ablate, serve, play, replay.
Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime failure.
GUESSGAME_CONFIG supplies the config path when --config is omitted;
GUESSGAME_LOG_DIR overrides the configured log directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import Config, ConfigError, config_hash, default_config, load_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_cfg(args) -> Config:
    path = args.config or os.environ.get("GUESSGAME_CONFIG")
    if path is None:
        return default_config()
    return load_config(path)


def _log_dir(cfg: Config, override: str | None = None) -> Path:
    return Path(override or os.environ.get("GUESSGAME_LOG_DIR") or cfg.harness.log_dir)


def _seeds(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip() != ""]


def cmd_gen_world(args) -> int:
    from .world import make_splits, write_scenes

    cfg = _load_cfg(args)
    train, test = make_splits(
        args.n_train or cfg.sizes.n_train_scenes,
        args.n_test or cfg.sizes.n_test_scenes,
        cfg.world,
        args.seed,
    )
    from . import __version__

    extra = {"config_hash": config_hash(cfg), "code_version": __version__, "seed": args.seed}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scenes(out, train + test, header_extra=extra)
    print(f"wrote {len(train)} train + {len(test)} test scenes to {out}")
    return EXIT_OK


def cmd_pretrain(args) -> int:
    from .baseline import BaselineNet
    from .checkpoint import save_checkpoint
    from .evaluation import pretrain_for_seed
    from .seeding import rng_for

    cfg = _load_cfg(args)
    policy, log, run = pretrain_for_seed(cfg, args.seed)
    out_dir = _log_dir(cfg, args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"pretrain-seed{args.seed}.npz"
    baseline = BaselineNet.init(
        run.featurizer.dim, cfg.trainer.baseline_hidden, rng_for(args.seed, "baseline-init")
    )
    save_checkpoint(path, cfg, args.seed, 0, policy, baseline,
                    run.featurizer.grammar, log, kind="pretrain")
    print(f"pretrained on {cfg.pretrain.episodes} expert episodes -> {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .checkpoint import load_checkpoint
    from .trainer import train

    cfg = _load_cfg(args)
    out_dir = _log_dir(cfg, args.out_dir)
    kwargs = {}
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        cfg = ckpt.config
        kwargs.update(
            start_epoch=ckpt.epoch,
            start_policy=ckpt.policy,
            start_baseline=ckpt.baseline,
            target_log=ckpt.target_log,
        )
        master_seed = ckpt.master_seed
    else:
        master_seed = args.seed
        if args.warm_start:
            kwargs["warm_start"] = load_checkpoint(args.warm_start).policy
    result = train(cfg, master_seed=master_seed, out_dir=out_dir,
                   run_name=args.run_name, **kwargs)
    last = result.epoch_stats[-1] if result.epoch_stats else {}
    print(
        f"trained {cfg.trainer.epochs} epochs; final train success "
        f"{last.get('success', float('nan')):.3f}; checkpoint {result.checkpoint_path}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    from .checkpoint import load_checkpoint
    from .evaluation import evaluate
    from .seeding import derive_seed
    from .world import make_splits

    ckpt = load_checkpoint(args.checkpoint)
    cfg = ckpt.config
    train_scenes, test_scenes = make_splits(
        cfg.sizes.n_train_scenes, cfg.sizes.n_test_scenes, cfg.world,
        derive_seed(ckpt.master_seed, "world"),
    )
    scenes = train_scenes if args.split == "NewObject" else test_scenes
    res = evaluate(
        ckpt.policy, scenes, args.split, args.mode, args.games, args.seed,
        ckpt.featurizer, cfg.oracle, cfg.rewards,
        target_log=ckpt.target_log, beam_width=cfg.questioner.beam_width,
    )
    from . import __version__

    summary = {
        "split": args.split, "mode": args.mode, **res.to_summary(),
        "config_hash": config_hash(cfg), "code_version": __version__,
    }
    print(json.dumps(summary))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .evaluation import run_ablation

    cfg = _load_cfg(args)
    out_dir = _log_dir(cfg, args.out_dir)
    report = run_ablation(cfg, _seeds(args.seeds), out_dir=out_dir,
                          checkpoint_dir=args.checkpoint_dir)
    print(report.render_table())
    print(f"report written to {out_dir}/ablation-report.json")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app

    cfg = _load_cfg(args)
    settings = ServiceSettings(
        checkpoint_dir=args.checkpoint_dir or cfg.service.checkpoint_dir,
        ledger_path=args.ledger or "study-ledger.jsonl",
        ttl_minutes=cfg.service.ttl_minutes,
        decode_mode=cfg.service.decode_mode,
    )
    uvicorn.run(create_app(settings), host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_play(args) -> int:
    from .checkpoint import load_checkpoint
    from .oracle import OracleConfig
    from .policy import decode_question
    from .features import QuestionerState
    from .seeding import derive_seed, rng_for
    from .trainer import apply_round
    from .world import assign_target, generate_scene

    ckpt = load_checkpoint(args.checkpoint)
    cfg = ckpt.config
    scene = generate_scene(cfg.world, args.scene_seed, scene_id=0, split="test")
    target = assign_target(scene, derive_seed(args.scene_seed, "service-target")).target_id
    state = QuestionerState.initial(ckpt.featurizer, scene)
    rng_tokens = rng_for(args.session_seed, "tokens")
    rng_oracle = rng_for(args.session_seed, "oracle")

    print("objects:")
    for obj in scene.objects:
        attrs = " ".join(f"{k}={v}" for k, v in obj.attributes.items()) or "-"
        x0, y0, x1, y1 = obj.box
        print(f"  [{obj.id}] {obj.category:<8} {attrs:<28} box=({x0:.2f},{y0:.2f},{x1:.2f},{y1:.2f})")
    print("the questioner will ask; answer comes from the oracle. guess when ready.")

    rounds = 0
    prev_p = None
    reply = ""
    vocab = ckpt.grammar.vocab
    while rounds < cfg.rewards.j_max:
        tokens = decode_question(ckpt.policy, state, args.mode, rng=rng_tokens,
                                 beam_width=cfg.questioner.beam_width)
        if tokens == (vocab.tokens[vocab.end_id],):
            print("questioner is confident and stops asking.")
            break
        node = ckpt.grammar.walk(tokens)
        rec = apply_round(state, tokens, ckpt.grammar.leaf_predicate(node), target,
                          OracleConfig(epsilon=cfg.oracle.epsilon), rng_oracle, prev_p)
        prev_p = rec.p_target
        rounds += 1
        print(f"Q{rounds}: {' '.join(rec.question)}   A: {rec.answer.label}")
        if rounds < cfg.rewards.j_max:
            reply = input("press enter for next question, or type an object id to guess: ").strip()
            if reply:
                break
    guess_id = None
    while guess_id is None:
        text = reply or input("your guess (object id): ").strip()
        reply = ""
        try:
            gid = int(text)
        except ValueError:
            continue
        if 0 <= gid < scene.n_objects:
            guess_id = gid
    correct = guess_id == target
    print(f"{'correct!' if correct else 'wrong.'} target was object {target}")
    return EXIT_OK


def cmd_replay(args) -> int:
    from .episodes import verify_log

    report = verify_log(args.episode)
    if report.ok:
        print(f"verified {report.n_verified} episodes: rewards and returns reproduce exactly")
        return EXIT_OK
    for msg in report.mismatches[:20]:
        print(f"mismatch: {msg}", file=sys.stderr)
    return EXIT_RUNTIME


def build_parser() -> _Parser:
    p = _Parser(prog="guessgame", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-world", help="generate scene splits to a file")
    sp.add_argument("--config", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-train", type=int, default=None)
    sp.add_argument("--n-test", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_world)

    sp = sub.add_parser("pretrain", help="supervised pretraining from expert dialogs")
    sp.add_argument("--config", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default=None)
    sp.set_defaults(func=cmd_pretrain)

    sp = sub.add_parser("train", help="REINFORCE training")
    sp.add_argument("--config", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default=None)
    sp.add_argument("--run-name", default="train")
    sp.add_argument("--warm-start", default=None, help="checkpoint to initialize the policy from")
    sp.add_argument("--resume", default=None, help="checkpoint to continue from")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split", choices=("NewObject", "NewImage"), default="NewImage")
    sp.add_argument("--mode", choices=("sampling", "greedy", "beam"), default="greedy")
    sp.add_argument("--games", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("ablate", help="train and tabulate all reward variants")
    sp.add_argument("--config", default=None)
    sp.add_argument("--seeds", default="1,2,3,4,5")
    sp.add_argument("--out-dir", default=None)
    sp.add_argument("--checkpoint-dir", default=None)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("serve", help="run the human-study HTTP service")
    sp.add_argument("--config", default=None)
    sp.add_argument("--checkpoint-dir", default=None)
    sp.add_argument("--ledger", default=None)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("play", help="terminal human-guesser session")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--scene-seed", type=int, default=0)
    sp.add_argument("--session-seed", type=int, default=0)
    sp.add_argument("--mode", choices=("sampling", "greedy", "beam"), default="greedy")
    sp.set_defaults(func=cmd_play)

    sp = sub.add_parser("replay", help="re-execute a logged episode file and verify rewards")
    sp.add_argument("--episode", required=True)
    sp.set_defaults(func=cmd_replay)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: file not found: {e.filename or e}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as e:  # runtime failures map to a stable exit code
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
