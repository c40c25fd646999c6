"""Benchmark the compiled kernels against the numpy reference backend.

Times the low-level kernels on realistic shapes and the end-to-end training
hot path (batched rollouts) under each backend. Run from the repo root:

    python benchmarks/bench_backends.py [--batch 32] [--updates 20]
"""

import argparse
import time

import numpy as np

from guessgame._kernels import pyref

try:
    from guessgame import _ckernels
except ImportError:
    _ckernels = None


def _bench(fn, *args, repeat=2000):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels():
    rng = np.random.default_rng(0)
    n_obj, n_pred, v_size = 8, 16, 24
    post = rng.random(n_obj)
    post /= post.sum()
    codes = rng.integers(0, 3, size=(n_pred, n_obj)).astype(np.int8)
    asked = (rng.random(n_pred) < 0.3).astype(np.uint8)
    f_dim = pyref.feature_dim(v_size, n_pred)
    feats = rng.normal(size=f_dim)
    w = rng.normal(size=(v_size, f_dim))
    b = rng.normal(size=v_size)
    mask = np.zeros(v_size, dtype=np.uint8)
    mask[[0, 2, 5, 7, 9]] = 1
    probs = pyref.policy_probs(w, b, feats, mask)

    rows = 32
    post_b = np.tile(post, (rows, 1))
    codes_b = np.tile(codes, (rows, 1, 1))
    asked_b = np.tile(asked, (rows, 1))
    ints = np.ones(rows, dtype=np.int64)
    logits_b = rng.normal(size=(rows, v_size))
    masks_b = np.tile(mask, (rows, 1))
    u_b = rng.random(rows)

    cases = [
        ("featurize", lambda impl: impl.featurize(post, codes, asked, 3, 2, 1, 5, 12, v_size)),
        ("policy_probs", lambda impl: impl.policy_probs(w, b, feats, mask)),
        ("sample_index", lambda impl: impl.sample_index(probs, 0.37)),
        ("bayes_update", lambda impl: impl.bayes_update(post, codes[0], 1, 0.1)),
        ("info_gains", lambda impl: impl.info_gains(post, codes)),
        ("featurize_batch(32)", lambda impl: impl.featurize_batch(
            post_b, codes_b, asked_b, ints, ints, ints, 5, 12, v_size)),
        ("masked_softmax_batch(32)", lambda impl: impl.masked_softmax_batch(logits_b, masks_b)),
        ("sample_index_batch(32)", lambda impl: impl.sample_index_batch(
            pyref.masked_softmax_batch(logits_b, masks_b), u_b)),
    ]
    print(f"{'kernel':<26}{'python':>12}{'compiled':>12}{'speedup':>9}")
    for name, call in cases:
        t_py = _bench(lambda: call(pyref))
        if _ckernels is None:
            print(f"{name:<26}{t_py * 1e6:>10.1f}us{'-':>12}{'-':>9}")
            continue
        t_c = _bench(lambda: call(_ckernels))
        print(f"{name:<26}{t_py * 1e6:>10.1f}us{t_c * 1e6:>10.1f}us{t_py / t_c:>8.1f}x")


def bench_rollouts(batch: int, updates: int):
    import guessgame._kernels as kernels
    from guessgame.config import default_config
    from guessgame.features import Featurizer
    from guessgame.grammar import build_grammar
    from guessgame.policy import Policy
    from guessgame.trainer import rollout_batch
    from guessgame.world import make_splits

    cfg = default_config()
    grammar = build_grammar(cfg.world, cfg.grammar, cfg.questioner.m_max)
    feat = Featurizer(grammar, cfg.rewards.j_max)
    scenes, _ = make_splits(16, 1, cfg.world, seed=0)
    rng = np.random.default_rng(1)
    policy = Policy(
        w=rng.normal(0, 0.4, (len(grammar.vocab), feat.dim)),
        b=rng.normal(0, 0.4, len(grammar.vocab)),
    )
    jobs = [
        (scenes[i % len(scenes)], int(rng.integers(8)), 100 + i) for i in range(batch)
    ]
    cache: dict = {}
    rollout_batch(jobs, feat, policy, cfg.oracle, cfg.rewards, table_cache=cache)  # warm
    t0 = time.perf_counter()
    episodes = 0
    for _ in range(updates):
        out = rollout_batch(jobs, feat, policy, cfg.oracle, cfg.rewards, table_cache=cache)
        episodes += len(out)
    dt = time.perf_counter() - t0
    print(
        f"rollout_batch[{kernels.backend_name()}]: "
        f"{episodes / dt:,.0f} episodes/s ({dt / updates * 1e3:.1f} ms per batch of {batch})"
    )


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--updates", type=int, default=20)
    args = ap.parse_args()
    print("== kernel microbenchmarks ==")
    bench_kernels()
    print("\n== training hot path (active backend) ==")
    bench_rollouts(args.batch, args.updates)
    print("rerun with GUESSGAME_BACKEND=python to time the fallback end to end")
