"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also repeated in the terminal summary.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np
import pytest

from sleeping_experts.bandit import (
    BanditHATT,
    ChosenLossQuery,
    Level,
    bandit_defaults,
    bandit_hatt_bound,
    level_bound,
    round_environment,
    round_losses,
)
from sleeping_experts.batch import NumpyUniforms, bandit_hatt_replicates, hatt_replicates, hopp_replicates
from sleeping_experts.cli import main as cli_main
from sleeping_experts.core import Ranking, RoundTrace, comparator_loss_of, make_environment
from sleeping_experts.envgen import GeneratorSpec, generate, z01_conditional_mean, z01_to_z0
from sleeping_experts.hatt import PairHedgeBank, hatt_bound, pair_certificate, run_tournament
from sleeping_experts.hedge import Hedge, hedge_bound
from sleeping_experts.hopp import hopp_bound
from sleeping_experts.oracle import best_ranking, best_ranking_bruteforce, solve
from sleeping_experts.rng import Stream, generator
from sleeping_experts.runner import check_rankings, level_rankings, replay

SEED = 20240611
CLASSES = ("exactly-one", "exactly-two", "unconstrained")
BINARY_KINDS = ("planted-ranking", "uniform-random", "adversarial-rotation")
REQUIRED = {"exactly-one": 1, "exactly-two": 2, "unconstrained": 1}

RESULTS: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:2d}: {detail}"
    RESULTS.append(line)
    print(line)


def random_spec(gen: np.random.Generator, N: int, K: int, T: int, cls: str, max_eps: float) -> GeneratorSpec:
    kind = BINARY_KINDS[int(gen.integers(len(BINARY_KINDS)))]
    return GeneratorSpec(kind, N, K, T, float(gen.uniform(0, max_eps)), cls, int(gen.integers(2**63)))


# Level: exact total-loss bound and per-round potential.


@pytest.fixture(scope="module")
def level_runs():
    start = time.perf_counter()
    runs = []
    for i in range(500):
        gen = generator(SEED, i, "level-envs")
        cls = CLASSES[i % 3]
        N = int(gen.integers(2, 9))
        K = int(gen.integers(REQUIRED[cls], N + 1))
        T = int(gen.integers(1, 2001))
        env = generate(random_spec(gen, N, K, T, cls, 0.5), gen)
        best, lstar = best_ranking(env)
        rankings = level_rankings(N, gen, [best])
        result = replay(env, Level(N), check_invariants=True, rankings=rankings, lstar=lstar)
        runs.append((env, lstar, result))
    return runs, time.perf_counter() - start


def test_criterion_01_level_total_loss(level_runs):
    runs, elapsed = level_runs
    worst = max(r.total_loss - level_bound(env.N, lstar) for env, lstar, r in runs)
    classes = {env.zero_count_class for env, _, _ in runs}
    ok = worst <= 0 and classes == set(CLASSES) and elapsed < 60
    report(1, ok, f"500 envs, max(total - (N L* + N(N-1)/2)) = {worst:g}, {elapsed:.1f}s")
    assert ok


def test_criterion_02_level_potential(level_runs):
    runs, _ = level_runs
    bad = [v for _, _, r in runs for v in r.violations if v.check in ("level-potential", "level-sum")]
    report(2, not bad, f"{len(bad)} potential/sum violations over {sum(env.T for env, _, _ in runs)} rounds")
    assert not bad, bad[:3]


# HATT and HOPP: bounds across repeats, certificate checks at every round.


@pytest.fixture(scope="module")
def hatt_runs():
    start = time.perf_counter()
    runs = []
    for i in range(100):
        gen = generator(SEED, i, "hatt-envs")
        N = int(gen.integers(2, 11))
        K = int(gen.integers(2, min(6, N) + 1))
        env = generate(random_spec(gen, N, K, 2000, "exactly-one", 0.3), gen)
        best, lstar, exact = solve(env)
        assert exact
        rankings = check_rankings(N, gen, [best])
        res = hatt_replicates(env, NumpyUniforms(gen, 50), 50, eta=1.0, rankings=rankings)
        runs.append((env, lstar, res))
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def hopp_runs():
    start = time.perf_counter()
    runs = []
    for i in range(100):
        gen = generator(SEED, i, "hopp-envs")
        N = int(gen.integers(2, 11))
        K = int(gen.integers(2, min(6, N) + 1))
        env = generate(random_spec(gen, N, K, 1000, "exactly-two", 0.3), gen)
        best, lstar, exact = solve(env)
        assert exact
        rankings = check_rankings(N, gen, [best])
        res = hopp_replicates(env, NumpyUniforms(gen, 50), 50, eta=1.0, rankings=rankings)
        runs.append((env, lstar, res))
    return runs, time.perf_counter() - start


def test_criterion_03_hatt_bound(hatt_runs):
    runs, elapsed = hatt_runs
    slack = [hatt_bound(1.0, env.K, env.N, lstar) + 3 * res.standard_error - res.mean for env, lstar, res in runs]
    ok = min(slack) >= 0 and elapsed < 120
    report(3, ok, f"100 envs x 50 repeats, min slack {min(slack):.2f}, {elapsed:.1f}s")
    assert ok


def test_criterion_04_certificate_checks_and_hopp_bound(hatt_runs, hopp_runs):
    hatt_bad = [v for _, _, res in hatt_runs[0] for v in res.violations]
    hopp_bad = [v for _, _, res in hopp_runs[0] for v in res.violations]
    loose = [hopp_bound(1.0, env.K, env.N, lstar, pair_term=True) + 3 * res.standard_error - res.mean for env, lstar, res in hopp_runs[0]]
    tight = [hopp_bound(1.0, env.K, env.N, lstar) + 3 * res.standard_error - res.mean for env, lstar, res in hopp_runs[0]]
    ok = not hatt_bad and not hopp_bad and min(loose) >= 0
    report(
        4,
        ok,
        f"HATT certificate violations {len(hatt_bad)}, HOPP certificate violations {len(hopp_bad)}, "
        f"HOPP bound min slack {min(loose):.2f} (without the pair term: {min(tight):.2f}), {hopp_runs[1]:.1f}s",
    )
    assert ok, (hatt_bad[:3], hopp_bad[:3])


# Hedge with general loss range.


def _hedge_expected_losses(losses: np.ndarray, eta: float) -> np.ndarray:
    """``sum_t p_t . l_t`` per repeat for full-information Hedge; ``losses`` is (reps, T, n)."""
    reps, T, n = losses.shape
    cum = np.zeros((reps, n))
    total = np.zeros(reps)
    for t in range(T):
        lw = -eta * cum
        w = np.exp(lw - lw.max(axis=1, keepdims=True))
        p = w / w.sum(axis=1, keepdims=True)
        total += (p * losses[:, t]).sum(axis=1)
        cum += losses[:, t]
    return total


def _hedge_scalar(losses: np.ndarray, eta: float, R: float) -> float:
    h = Hedge(range(losses.shape[1]), eta, R)
    total = 0.0
    for row in losses.tolist():
        total += math.fsum(p * x for p, x in zip(h.probabilities(), row))
        h.update(row)
    return total


def test_criterion_05_hedge_bound():
    start = time.perf_counter()
    lines, ok = [], True
    for n, R, eta in itertools.product((2, 3), (1, 4), (0.5, 1.0)):
        gen = generator(SEED, n * 100 + R * 10 + int(eta * 2), "hedge")
        losses = R * gen.random((200, 2000, n))
        # Weights move by eta * loss, matching Hedge's update for range R.
        got = _hedge_expected_losses(losses, eta)
        for k in range(5):
            assert _hedge_scalar(losses[k], eta, R) == pytest.approx(got[k], rel=1e-9)
        best = losses.sum(axis=1).min(axis=1)
        se = got.std(ddof=1) / math.sqrt(len(got))
        slack = hedge_bound(eta, R, n, float(best.mean())) + 3 * se - got.mean()
        per_repeat = all(g <= hedge_bound(eta, R, n, float(b)) for g, b in zip(got, best))
        ok &= slack >= 0 and per_repeat
        lines.append(f"n={n} R={R} eta={eta}: slack {slack:.2f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30
    report(5, ok, f"8 configs x 200 repeats, {'; '.join(lines)}; {elapsed:.1f}s")
    assert ok


# Bandit-HATT.


def test_criterion_06_bandit_hatt_bound():
    start = time.perf_counter()
    slack = []
    for i in range(50):
        gen = generator(SEED, i, "bandit-envs")
        N = int(gen.integers(2, 9))
        K = int(gen.integers(2, min(5, N) + 1))
        T = 5000
        env = generate(random_spec(gen, N, K, T, "exactly-one", 0.3), gen)
        _, lstar, _ = solve(env)
        mu, eta = bandit_defaults(N, K, T)
        res = bandit_hatt_replicates(env, NumpyUniforms(gen, 100), 100, mu, eta)
        slack.append(bandit_hatt_bound(K, N, T, mu, eta, lstar) + 3 * res.standard_error - res.mean)
    elapsed = time.perf_counter() - start
    ok = min(slack) >= 0 and elapsed < 300
    report(6, ok, f"50 envs x 100 repeats, min slack {min(slack):.1f}, {elapsed:.1f}s")
    assert ok


class _HeldTournament:
    """Replays fixed tournament uniforms, then draws fresh ones for exploration."""

    def __init__(self, fixed, gen):
        self.fixed = list(fixed)
        self.k = 0
        self.gen = gen

    def reset(self):
        self.k = 0

    def random(self):
        if self.k < len(self.fixed):
            self.k += 1
            return self.fixed[self.k - 1]
        return float(self.gen.random())


def test_criterion_07_estimator_unbiased():
    n_draws = 100_000
    lines, ok = [], True
    for K in (3, 5):
        gen = generator(SEED, K, "estimator")
        mu = 0.4
        bank = PairHedgeBank(0.1, K / mu)
        for a, b in itertools.combinations(range(K), 2):
            bank.get((a, b)).log_weights[0] = float(gen.normal())
        avail = tuple(range(K))
        z = int(gen.integers(K))
        rnd = RoundTrace(1, avail, tuple(0.0 if a == z else 1.0 for a in avail))
        fixed = gen.random(K - 1).tolist()
        outcome = run_tournament(avail, bank, _HeldTournament(fixed, gen))
        truth = pair_certificate(1, outcome, z).charged
        learner = BanditHATT(_HeldTournament(fixed, gen), K, mu, 0.1)
        learner.bank = bank
        saved = bank.snapshot()
        samples = np.zeros((n_draws, K))
        for s in range(n_draws):
            learner.rng.reset()
            learner.step(avail, ChosenLossQuery(rnd))
            assert learner.outcome.consulted == outcome.consulted
            for i, v in learner.pair_losses.items():
                samples[s, i] = v
            if learner.updated:
                for key, lw in saved.items():
                    bank.hedges[key].log_weights = list(lw)
        means = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / math.sqrt(n_draws)
        for i in avail:
            target = 1.0 if i in truth else 0.0
            ok &= abs(means[i] - target) <= 3 * se[i] + (0 if i in truth else 1e-12)
        lines.append(f"K={K} means {np.round(means, 3).tolist()} target charged {sorted(truth)}")
    report(7, ok, "; ".join(lines))
    assert ok


def test_criterion_08_z01_reduction():
    start = time.perf_counter()
    calls, zero_ok, mean_ok = 0, True, True
    worst = 0.0
    per_case = 1_000_000 // 6 + 1
    for K in (3, 5, 8):
        rng = Stream.from_key(SEED, K, "z01")
        for one_zero in (True, False):
            pos = K // 2
            losses = tuple((0.0 if k == pos else 1.0) if one_zero else (1.0 if k == pos else 0.0) for k in range(K))
            r = RoundTrace(1, tuple(range(K)), losses)
            sums = np.zeros(K)
            for _ in range(per_case):
                out = z01_to_z0(r, K, rng).losses
                if out.count(0.0) != 1:
                    zero_ok = False
                sums += out
            calls += per_case
            means = sums / per_case
            # binary outputs: variance is m(1 - m)
            se = np.sqrt(means * (1 - means) / per_case)
            for a in range(K):
                target = z01_conditional_mean(K, losses[a], one_zero)
                dev = abs(means[a] - target)
                if se[a]:
                    worst = max(worst, dev / se[a])
                mean_ok &= dev <= 3 * se[a]
    ok = zero_ok and mean_ok and calls >= 1_000_000
    report(8, ok, f"{calls} calls, one zero every time: {zero_ok}, worst deviation {worst:.2f} SE, {time.perf_counter() - start:.1f}s")
    assert ok


def test_criterion_09_oracle_soundness():
    mismatches, beaten, checked = 0, 0, 0
    for i in range(200):
        gen = generator(SEED, i, "oracle")
        N = int(gen.integers(1, 5))
        env = generate(random_spec(gen, N, N, int(gen.integers(1, 60)), "unconstrained", 0.5), gen) if N > 1 else make_environment(
            [RoundTrace(t + 1, (0,), (float(gen.integers(2)),)) for t in range(5)], 1, 1, "unconstrained"
        )
        if best_ranking(env) != best_ranking_bruteforce(env):
            mismatches += 1
    for i, N in enumerate((3, 5, 8)):
        gen = generator(SEED, i, "oracle-random-rankings")
        env = generate(random_spec(gen, N, N, 200, CLASSES[i], 0.5), gen)
        _, lstar = best_ranking(env)
        for _ in range(1000):
            checked += 1
            if comparator_loss_of(Ranking.random(N, gen), env) < lstar:
                beaten += 1
    ok = mismatches == 0 and beaten == 0
    report(9, ok, f"200 envs N<=4: {mismatches} mismatches; {checked} random rankings: {beaten} below L*")
    assert ok


def test_criterion_10_real_valued_reduction():
    start = time.perf_counter()
    lines, ok = [], True
    for N in range(2, 7):
        env = generate(GeneratorSpec("real-valued", N, N, 2000, 0.0, "unconstrained", SEED + N))
        totals, lstars = [], []
        for rep in range(100):
            rounded = round_environment(env, Stream.from_key(SEED, rep, f"rounding-{N}"))
            _, lstar, exact = solve(rounded)
            assert exact
            result = replay(rounded, Level(N))
            totals.append(result.total_loss)
            lstars.append(lstar)
        totals = np.array(totals)
        se = totals.std(ddof=1) / math.sqrt(len(totals))
        slack = N * np.mean(lstars) + N * (N - 1) / 2 + 3 * se - totals.mean()
        ok &= slack >= 0
        lines.append(f"N={N} slack {slack:.1f}")
    rng = Stream.from_key(SEED, 0, "rounding-means")
    worst = 0.0
    for r in generate(GeneratorSpec("real-valued", 6, 6, 3, 0.0, "unconstrained", SEED)).rounds:
        sums = np.zeros(len(r.available))
        for _ in range(100_000):
            sums += round_losses(r, rng).losses
        worst = max(worst, float(np.abs(sums / 100_000 - np.array(r.losses)).max()))
    ok &= worst <= 0.01
    report(10, ok, f"{'; '.join(lines)}; max rounding-mean error {worst:.4f}; {time.perf_counter() - start:.1f}s")
    assert ok


def test_criterion_11_reproducible_runs(tmp_path):
    top = 'algorithm = ["hatt", "bandit-hatt", "level", "per-subset", "ranking-hedge"]\ntrials = 6\nseed = 314159\ncheck_invariants = true\nalphas = [1.0, 2.0]\n'
    env = '[env]\nkind = "planted-ranking"\nN = 6\nK = 4\nT = 400\nepsilon = 0.2\nzero_count_class = "exactly-one"\n'
    (tmp_path / "serial.toml").write_text(top + "workers = 1\n" + env)
    (tmp_path / "parallel.toml").write_text(top + "workers = 4\n" + env)
    hopp = 'algorithm = "hopp"\ntrials = 3\nseed = 5\nworkers = 2\n[env]\nkind = "uniform-random"\nN = 6\nK = 5\nT = 300\nzero_count_class = "exactly-two"\n'
    (tmp_path / "hopp.toml").write_text(hopp)
    codes, trees = [], {}
    for name, cfg in [("a", "serial"), ("b", "serial"), ("c", "parallel"), ("d", "parallel"), ("e", "hopp"), ("f", "hopp")]:
        codes.append(cli_main(["run", str(tmp_path / f"{cfg}.toml"), "--out", str(tmp_path / name)]))
        trees[name] = {p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())}
    ok = (
        codes == [0] * 6
        and trees["a"] == trees["b"] == trees["c"] == trees["d"]
        and trees["e"] == trees["f"]
        and {"summary.csv", "report.jsonl"} <= set(trees["a"])
        and "rounds.csv" in trees["e"]
    )
    report(11, ok, f"exit codes {codes}; serial/parallel outputs identical: {trees['a'] == trees['c']}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
