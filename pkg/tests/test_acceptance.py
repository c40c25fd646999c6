"""Acceptance suite: exact and property criteria plus desk-scale trend
reproduction. One test per criterion; each prints a PASS/FAIL line with the
measured quantities. The trend block (criteria 10-14) trains every reward
variant over five seeds once per session and reuses the results."""

import time
from pathlib import Path

import numpy as np
import pytest

from guessgame.baseline import BaselineNet
from guessgame.config import load_config
from guessgame.evaluation import evaluate, run_ablation
from guessgame.features import Featurizer, QuestionerState
from guessgame.grammar import build_grammar
from guessgame.guesser import init_posterior, update_posterior
from guessgame.oracle import Answer, OracleConfig, answer_all, truth_answer
from guessgame.policy import Policy, action_distribution, decode_question, grad_log_prob
from guessgame.rewards import RewardConfig, goal_reward, informativeness_reward, returns
from guessgame.seeding import derive_seed
from guessgame.trainer import (
    expert_episode,
    gradient_from_steps,
    replay_episode,
    rollout_batch,
    supervised_nll,
)
from guessgame.world import generate_scene, make_splits

DESK = load_config(Path(__file__).resolve().parent.parent / "configs" / "desk.toml")
GRAMMAR = build_grammar(DESK.world, DESK.grammar, DESK.questioner.m_max)
FEAT = Featurizer(GRAMMAR, DESK.rewards.j_max)
V, F = len(GRAMMAR.vocab), FEAT.dim
SEEDS = [1, 2, 3, 4, 5]


def report(criterion, ok, detail):
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def _random_policy(rng, scale=0.5):
    return Policy(w=rng.normal(0, scale, (V, F)), b=rng.normal(0, scale, V))


def test_criterion_01_goal_reward_arithmetic():
    t0 = time.time()
    cfg = RewardConfig(lambda_=0.1, j_max=5)
    expected = {1: 1.5, 2: 1.25, 3: 1.0 + 0.5 / 3.0, 4: 1.125, 5: 1.1}
    ok = all(
        abs(goal_reward(True, j, cfg) - v) <= 1e-12 and goal_reward(False, j, cfg) == 0.0
        for j, v in expected.items()
    )
    report(1, ok and time.time() - t0 < 1.0, f"values {sorted(expected.values())} in {time.time()-t0:.2f}s")


def test_criterion_02_progressive_telescoping():
    t0 = time.time()
    rng = np.random.default_rng(0)
    scenes, _ = make_splits(32, 1, DESK.world, seed=0)
    worst = 0.0
    n = 0
    while n < 10_000:
        policy = _random_policy(rng)
        jobs = [
            (scenes[int(rng.integers(len(scenes)))], int(rng.integers(8)), 10_000 + n + k)
            for k in range(min(500, 10_000 - n))
        ]
        for traj in rollout_batch(jobs, FEAT, policy, DESK.oracle, DESK.rewards):
            if traj.rounds:
                p_seq = [r.p_target for r in traj.rounds]
                tele = sum(r.progressive for r in traj.rounds[1:])
                worst = max(worst, abs(tele - (p_seq[-1] - p_seq[0])))
            n += 1
    dt = time.time() - t0
    report(2, worst <= 1e-9 and dt < 30, f"max telescoping error {worst:.2e} over 10000 rollouts in {dt:.1f}s")


def test_criterion_03_informativeness_oracle():
    t0 = time.time()
    rng = np.random.default_rng(1)
    cfg = RewardConfig(eta=0.1, j_max=5)
    ok = True
    for i in range(10_000):
        scene = generate_scene(DESK.world, seed=int(rng.integers(4000)))
        question = GRAMMAR.question_for(int(rng.integers(GRAMMAR.n_predicates)))
        answers = answer_all(question, scene)
        got = informativeness_reward(answers, cfg)
        brute = any(a != b for a in answers for b in answers)
        ok = ok and got == (0.1 if brute else 0.0) and got in (0.0, 0.1)
        if not ok:
            break
    dt = time.time() - t0
    report(3, ok and dt < 30, f"10000 scene/question pairs agree with the brute scan in {dt:.1f}s")


def _rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8)


def test_criterion_04_gradient_checks():
    t0 = time.time()
    rng = np.random.default_rng(2)
    h = 1e-5
    n_points = 100
    coords_per_point = 30
    worst = {"score": 0.0, "nll": 0.0, "mse": 0.0}

    scene = generate_scene(DESK.world, seed=5)
    episode = expert_episode(FEAT, scene, 2, OracleConfig(0.1), DESK.rewards, seed=8)

    for _ in range(n_points):
        # log-probability score gradient
        state = QuestionerState.initial(FEAT, generate_scene(DESK.world, seed=int(rng.integers(500))))
        policy = _random_policy(rng)
        mask = GRAMMAR.mask(state.node)
        action = int(rng.choice(np.flatnonzero(mask)))
        analytic = grad_log_prob(policy, state, action).flat()
        flat = policy.flat()
        probe = policy.copy()
        for i in rng.choice(flat.size, size=coords_per_point, replace=False):
            up, dn = flat.copy(), flat.copy()
            up[i] += h
            dn[i] -= h
            probe.set_flat(up)
            hi = np.log(action_distribution(probe, state)[action])
            probe.set_flat(dn)
            lo = np.log(action_distribution(probe, state)[action])
            fd = (hi - lo) / (2 * h)
            if abs(analytic[i]) + abs(fd) > 1e-10:
                worst["score"] = max(worst["score"], float(_rel_err(analytic[i], fd)))

        # supervised NLL gradient
        policy = _random_policy(rng, scale=0.2)
        nll_grad = -gradient_from_steps(
            policy, episode.features, episode.actions, episode.masks,
            np.ones(episode.n_steps), 1,
        ).flat()
        flat = policy.flat()
        for i in rng.choice(flat.size, size=coords_per_point, replace=False):
            up, dn = flat.copy(), flat.copy()
            up[i] += h
            dn[i] -= h
            probe.set_flat(up)
            hi = supervised_nll(probe, [episode])
            probe.set_flat(dn)
            lo = supervised_nll(probe, [episode])
            fd = (hi - lo) / (2 * h)
            if abs(nll_grad[i]) + abs(fd) > 1e-10:
                worst["nll"] = max(worst["nll"], float(_rel_err(nll_grad[i], fd)))

        # baseline MSE gradient
        net = BaselineNet.init(16, hidden=6, rng=rng)
        feats = rng.normal(0, 1, (12, 16))
        targets = rng.normal(0, 1, 12)
        _, (dw1, db1, dw2, db2) = net.loss_and_grads(feats, targets)
        analytic = np.concatenate([dw1.ravel(), db1, dw2, [db2]])
        phi = net.flat()
        for i in rng.choice(phi.size, size=min(coords_per_point, phi.size), replace=False):
            up, dn = phi.copy(), phi.copy()
            up[i] += h
            dn[i] -= h
            net.set_flat(up)
            hi, _ = net.loss_and_grads(feats, targets)
            net.set_flat(dn)
            lo, _ = net.loss_and_grads(feats, targets)
            fd = (hi - lo) / (2 * h)
            if abs(analytic[i]) + abs(fd) > 1e-10:
                worst["mse"] = max(worst["mse"], float(_rel_err(analytic[i], fd)))

    dt = time.time() - t0
    ok = all(w < 1e-5 for w in worst.values()) and dt < 60
    report(4, ok, f"max rel err score={worst['score']:.2e} nll={worst['nll']:.2e} "
                  f"mse={worst['mse']:.2e} at {n_points} points in {dt:.1f}s")


def test_criterion_05_posterior_correctness():
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst = 0.0
    support_ok = True
    for i in range(10_000):
        scene = generate_scene(DESK.world, seed=int(rng.integers(3000)))
        noisy = i % 2 == 0
        eps = 0.1 if noisy else 0.0
        post = init_posterior(scene)
        likelihood = np.ones(scene.n_objects)
        target = int(rng.integers(scene.n_objects))
        support = set(range(scene.n_objects))
        for _ in range(int(rng.integers(1, 5))):
            question = GRAMMAR.question_for(int(rng.integers(GRAMMAR.n_predicates)))
            if eps == 0.0:
                observed = truth_answer(question, scene.objects[target])
            else:
                observed = Answer(int(rng.integers(3)))
            post = update_posterior(post, question, observed, scene, eps)
            for n, obj in enumerate(scene.objects):
                match = truth_answer(question, obj) == observed
                likelihood[n] *= (1 - eps) if match else eps / 2
            if eps == 0.0:
                consistent = {
                    n for n in support
                    if truth_answer(question, scene.objects[n]) == observed
                }
                got = {int(k) for k in np.flatnonzero(post.probs > 0)}
                support_ok = support_ok and got == consistent
                support = consistent
        z = likelihood.sum()
        if z > 0:
            worst = max(worst, float(np.abs(post.probs - likelihood / z).max()))
    dt = time.time() - t0
    report(5, worst <= 1e-9 and support_ok and dt < 60,
           f"max one-shot deviation {worst:.2e}, zero-noise support exact={support_ok}, {dt:.1f}s")


def test_criterion_06_returns_exact():
    rng = np.random.default_rng(4)
    ok = True
    for _ in range(1000):
        r = rng.normal(size=int(rng.integers(1, 61)))
        brute = np.array([r[t:].sum() for t in range(r.size)])
        got = returns(r)
        ok = ok and np.allclose(got, brute, atol=1e-12) and got.shape == brute.shape
    report(6, ok, "suffix sums equal the quadratic recomputation on 1000 vectors")


def test_criterion_07_mdp_fidelity_and_replay():
    rng = np.random.default_rng(5)
    scenes, _ = make_splits(16, 1, DESK.world, seed=3)
    qmark, end = GRAMMAR.vocab.qmark_id, GRAMMAR.vocab.end_id
    cases_ok = True
    replay_ok = True
    bound_ok = True
    for i in range(2000):
        scene = scenes[i % len(scenes)]
        target = int(rng.integers(scene.n_objects))
        policy = _random_policy(rng)
        traj = rollout_batch(
            [(scene, target, 40_000 + i)], FEAT, policy, DESK.oracle, DESK.rewards
        )[0]
        bound_ok = bound_ok and traj.n_steps <= DESK.questioner.m_max * DESK.rewards.j_max
        # transition structure: continuations stay inside the trie, "?" closes
        # exactly the recorded rounds, "<End>" appears only as a final action
        closes = int((traj.actions == qmark).sum())
        ends = int((traj.actions == end).sum())
        cases_ok = cases_ok and closes == traj.n_rounds
        cases_ok = cases_ok and ends == (1 if traj.ended_by_stop else 0)
        if traj.ended_by_stop:
            cases_ok = cases_ok and traj.actions[-1] == end
        back = replay_episode(
            scene, target, traj.actions.tolist(), DESK.oracle, DESK.rewards, FEAT, traj.seed
        )
        replay_ok = (
            replay_ok
            and np.array_equal(back.rewards, traj.rewards)
            and np.array_equal(back.returns, traj.returns)
            and back.success == traj.success
        )
    report(7, cases_ok and replay_ok and bound_ok,
           f"2000 episodes: transitions ok={cases_ok}, T bound ok={bound_ok}, replay exact={replay_ok}")


def test_criterion_08_estimator_sanity():
    rng = np.random.default_rng(6)
    feats = rng.normal(0, 1, F)
    mask = np.zeros(V, dtype=np.uint8)
    mask[[2, 5]] = 1
    rewards = {2: 1.0, 5: 0.2}
    policy = _random_policy(rng, scale=0.3)
    probs = policy.probs(feats, mask)
    acts = np.array([2, 5])
    p_vec = np.array([probs[2], probs[5]])

    def episode_grads(baseline_value):
        # per-episode score-times-advantage for the two enumerable outcomes
        out = {}
        for a in acts:
            coef = -probs.copy()
            coef[a] += 1.0
            adv = rewards[a] - baseline_value
            out[a] = np.concatenate([(np.outer(coef, feats) * adv).ravel(), coef * adv])
        return out

    exact = sum(p * g for p, g in zip(p_vec, episode_grads(0.0).values()))

    n = 100_000
    draws = rng.choice(acts, size=n, p=p_vec)
    grads = episode_grads(0.0)
    counts = {a: int((draws == a).sum()) for a in acts}
    mc = sum(counts[a] * grads[a] for a in acts) / n
    # per-coordinate variance of the estimator
    second = sum(counts[a] * grads[a] ** 2 for a in acts) / n
    var = second - mc**2
    se = np.sqrt(var / n)
    z = np.abs(mc - exact) / np.maximum(se, 1e-12)
    within = float(z.max())

    e_r = sum(p * rewards[a] for p, a in zip(p_vec, acts))
    grads_b = episode_grads(e_r)
    mean_b = sum(counts[a] * grads_b[a] for a in acts) / n
    second_b = sum(counts[a] * grads_b[a] ** 2 for a in acts) / n
    var_b = second_b - mean_b**2
    reduced = float(var_b.sum()) < float(var.sum())

    report(8, within <= 3.0 and reduced,
           f"max |z|={within:.2f} over coordinates; baseline variance "
           f"{var_b.sum():.3e} < {var.sum():.3e}: {reduced}")


def test_criterion_09_beam_dominance():
    rng = np.random.default_rng(7)
    dominated = True
    width_one = True
    for i in range(1000):
        scene = generate_scene(DESK.world, seed=int(rng.integers(900)))
        state = QuestionerState.initial(FEAT, scene)
        policy = _random_policy(rng, scale=1.0)
        greedy = decode_question(policy, state, "greedy")
        beam5 = decode_question(policy, state, "beam", beam_width=5)
        width_one = width_one and decode_question(policy, state, "beam", beam_width=1) == greedy

        def logprob(tokens):
            node, m, last, total = GRAMMAR.root, 0, state.last_token, 0.0
            for tok in tokens:
                tid = GRAMMAR.vocab.index[tok]
                f = FEAT.featurize(state.posterior.probs, state.table, state.asked,
                                   last, state.round_j, m)
                total += float(np.log(policy.probs(f, GRAMMAR.mask(node))[tid]))
                if tid == GRAMMAR.vocab.end_id:
                    break
                node = GRAMMAR.child(node, tid)
                if GRAMMAR.leaf_predicate(node) != -1:
                    break
                last, m = tid, m + 1
            return total

        dominated = dominated and logprob(beam5) >= logprob(greedy) - 1e-12
    report(9, dominated and width_one,
           f"beam(5) >= greedy on 1000 pairs: {dominated}; beam(1) == greedy: {width_one}")


# -- trend reproduction (shared desk-scale training) ---------------------------


@pytest.fixture(scope="module")
def desk_runs():
    t0 = time.time()
    ablation = run_ablation(DESK, SEEDS)
    wall = time.time() - t0
    print(f"\n[desk training] {len(SEEDS)} seeds x {len(ablation.variants)} variants "
          f"in {wall/60:.1f} min")
    return ablation


def test_criterion_10_learning(desk_runs):
    policy = Policy.zeros(V, F)
    _, test_scenes = make_splits(
        DESK.sizes.n_train_scenes, DESK.sizes.n_test_scenes, DESK.world, derive_seed(1, "world")
    )
    chance = evaluate(
        policy, test_scenes, "NewImage", "greedy", 10_000, 99, FEAT, DESK.oracle, DESK.rewards
    ).success_rate
    full = desk_runs.mean("full", "NewImage", "greedy")
    ok = abs(chance - 0.125) <= 0.02 and full >= 0.80
    report(10, ok, f"untrained greedy {chance:.4f} (chance 0.125 +/- 0.02), "
                   f"trained full {full:.4f} >= 0.80")


def test_criterion_11_ablation_ordering(desk_runs):
    m = {v: desk_runs.mean(v, "NewImage", "greedy") for v in desk_runs.variants}
    guard = -0.01 - 1e-9  # one percentage point, with float headroom
    chain = [
        ("full", "rg+rp"), ("rg+rp", "rg"),
        ("full", "rg+ri"), ("rg+ri", "rg"),
        ("rg", "sole"), ("sole", "supervised"),
    ]
    gaps = {f"{a}-{b}": m[a] - m[b] for a, b in chain}
    ok = all(g >= guard for g in gaps.values()) and (m["full"] - m["supervised"]) >= 0.05
    detail = ", ".join(f"{k}={100*v:+.1f}pp" for k, v in gaps.items())
    report(11, ok, f"{detail}; full-supervised={100*(m['full']-m['supervised']):+.1f}pp (>= +5)")


def test_criterion_12_fewer_rounds(desk_runs):
    full = desk_runs.studies["full"]["mean_rounds_successful"]
    sole = desk_runs.studies["sole"]["mean_rounds_successful"]
    ok = full is not None and sole is not None and full <= sole
    report(12, ok, f"mean successful rounds: full {full} <= sole {sole}")


def test_criterion_13_progressive_trend(desk_runs):
    full = desk_runs.studies["full"]["trend_pct"]
    sole = desk_runs.studies["sole"]["trend_pct"]
    gap = full - sole
    report(13, gap >= 3.0, f"ascending-trend pct: full {full:.2f} vs sole {sole:.2f} "
                           f"(gap {gap:+.2f}, need >= +3)")


def test_criterion_14_informativeness(desk_runs):
    full = desk_runs.studies["full"]["quality_pct"]
    sole = desk_runs.studies["sole"]["quality_pct"]
    gap = full - sole
    report(14, gap >= 1.0, f"high-quality pct: full {full:.2f} vs sole {sole:.2f} "
                           f"(gap {gap:+.2f}, need >= +1)")
