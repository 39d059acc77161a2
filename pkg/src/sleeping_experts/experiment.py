"""Seeded multi-trial experiments with CSV and JSONL output.

The environment is built once (generated from the root seed or read from a
trace). Trial ``k`` of algorithm ``name`` draws from the streams
``(seed, k, name)`` and, for its invariant-check rankings and loss
rounding, ``(seed, k, "rankings")`` and ``(seed, k, "rounding")``. Trials
may run in worker processes; results are assembled in trial order, so the
output files do not depend on the worker count.
"""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import REAL, ConfigError, Environment, Ranking, comparator_cumulative, validate_environment
from .envgen import GeneratorSpec, generate
from .oracle import solve
from .rng import Stream, generator
from .runner import (
    ALGORITHMS,
    ReplayResult,
    Violation,
    check_compatible,
    check_rankings,
    level_rankings,
    make_learner,
    prepare_level_environment,
    replay,
)
from .traces import read_trace

SUMMARY_HEADER = ("trial", "algorithm", "N", "K", "T", "total_loss", "lstar", "alpha", "approx_regret", "seed")
ROUNDS_HEADER = ("trial", "t", "chosen", "loss", "cum_loss", "cum_comparator")
ENV_KEYS = {"kind", "N", "K", "T", "epsilon", "zero_count_class", "trace_path", "seed"}
TOP_KEYS = {"algorithm", "env", "trials", "seed", "eta", "mu", "check_invariants", "alphas", "out_dir", "workers"}


@dataclass(frozen=True)
class Config:
    algorithms: tuple[str, ...]
    env: dict
    trials: int = 1
    seed: int = 0
    eta: float | None = None
    mu: float | None = None
    check_invariants: bool = False
    alphas: tuple[float, ...] = (1.0,)
    out_dir: str = "results"
    workers: int = 1
    base_dir: Path = field(default=Path("."), compare=False)

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path = Path(".")) -> "Config":
        unknown = set(data) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "algorithm" not in data:
            raise ConfigError("config needs an 'algorithm'")
        algs = data["algorithm"]
        algs = (algs,) if isinstance(algs, str) else tuple(algs)
        for a in algs:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
        env = dict(data.get("env", {}))
        if set(env) - ENV_KEYS:
            raise ConfigError(f"unknown env keys {sorted(set(env) - ENV_KEYS)}")
        if "trace_path" not in env and "kind" not in env:
            raise ConfigError("env needs either 'kind' or 'trace_path'")
        trials = int(data.get("trials", 1))
        if trials < 1:
            raise ConfigError(f"trials must be positive, got {trials}")
        seed = int(data.get("seed", 0))
        if not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        workers = int(data.get("workers", 1))
        if workers < 1:
            raise ConfigError(f"workers must be positive, got {workers}")
        alphas = data.get("alphas", [1.0])
        return cls(
            algorithms=algs,
            env=env,
            trials=trials,
            seed=seed,
            eta=None if data.get("eta") is None else float(data["eta"]),
            mu=None if data.get("mu") is None else float(data["mu"]),
            check_invariants=bool(data.get("check_invariants", False)),
            alphas=tuple(float(a) for a in alphas),
            out_dir=str(data.get("out_dir", "results")),
            workers=workers,
            base_dir=base_dir,
        )

    def with_overrides(self, seed: int | None = None, out_dir: str | None = None, check_invariants: bool | None = None) -> "Config":
        changes: dict[str, Any] = {}
        if seed is not None:
            if not 0 <= seed < 2**64:
                raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
            changes["seed"] = seed
        if out_dir is not None:
            changes["out_dir"] = out_dir
        if check_invariants:
            changes["check_invariants"] = True
        return replace(self, **changes)

    @property
    def out_path(self) -> Path:
        p = Path(self.out_dir)
        return p if p.is_absolute() else self.base_dir / p


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return Config.from_dict(data, path.parent)


def generator_spec(config: Config) -> GeneratorSpec:
    env = config.env
    try:
        return GeneratorSpec(
            kind=env["kind"],
            N=int(env["N"]),
            K=int(env.get("K", env["N"])),
            T=int(env["T"]),
            epsilon=float(env.get("epsilon", 0.0)),
            zero_count_class=env.get("zero_count_class", "exactly-one"),
            seed=int(env.get("seed", config.seed)),
        )
    except KeyError as exc:
        raise ConfigError(f"env is missing {exc.args[0]!r}") from None


def build_environment(config: Config) -> Environment:
    """Read the configured trace or generate the configured environment."""
    if "trace_path" in config.env:
        path = Path(config.env["trace_path"])
        env = read_trace(path if path.is_absolute() else config.base_dir / path)
    else:
        env = generate(generator_spec(config))
    problems = validate_environment(env)
    if problems:
        raise ConfigError(f"invalid environment: {problems[0]} ({len(problems)} problem(s))")
    return env


@dataclass
class TrialResult:
    trial: int
    algorithm: str
    lstar: float
    lstar_exact: bool
    best: Ranking
    replay: ReplayResult
    comparator: list[float]


@dataclass(frozen=True)
class _Solved:
    best: Ranking
    lstar: float
    exact: bool
    comparator: list[float]


def _solve(env: Environment) -> _Solved:
    best, lstar, exact = solve(env)
    return _Solved(best, lstar, exact, comparator_cumulative(best, env))


def run_trial(config: Config, env: Environment, algorithm: str, trial: int, solved: _Solved) -> TrialResult:
    """One trial against the comparator ``solved``.

    Level on a real-valued environment plays a rounded copy instead and is
    compared with that copy's own best ranking.
    """
    play_env = env
    if algorithm == "level" and env.loss_mode == REAL:
        play_env = prepare_level_environment(env, Stream.from_key(config.seed, trial, "rounding"))
        solved = _solve(play_env)
    rng = Stream.from_key(config.seed, trial, algorithm)
    learner = make_learner(algorithm, play_env, rng, config.eta, config.mu)
    rankings: list[Ranking] = []
    if config.check_invariants:
        gen = generator(config.seed, trial, "rankings")
        if algorithm == "level":
            rankings = level_rankings(play_env.N, gen, [solved.best])
        else:
            rankings = check_rankings(play_env.N, gen, [solved.best])
    result = replay(
        play_env,
        learner,
        check_invariants=config.check_invariants,
        rankings=rankings,
        lstar=solved.lstar if solved.exact else None,
    )
    return TrialResult(trial, algorithm, solved.lstar, solved.exact, solved.best, result, solved.comparator)


def _run_task(args) -> TrialResult:
    return run_trial(*args)


@dataclass
class ExperimentResult:
    trials: list[TrialResult]
    env: Environment

    @property
    def violations(self) -> list[tuple[int, str, Violation]]:
        return [(t.trial, t.algorithm, v) for t in self.trials for v in t.replay.violations]


def run_experiment(config: Config) -> ExperimentResult:
    """Run every configured algorithm for every trial and write the result files."""
    env = build_environment(config)
    for a in config.algorithms:
        check_compatible(a, env)
    solved = _solve(env)
    tasks = [
        (config, env, a, k, solved)
        for a in config.algorithms
        for k in range(config.trials)
    ]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            trials = list(pool.map(_run_task, tasks))
    else:
        trials = [_run_task(t) for t in tasks]
    result = ExperimentResult(trials, env)
    write_outputs(config, result)
    return result


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def write_outputs(config: Config, result: ExperimentResult) -> None:
    out = config.out_path
    out.mkdir(parents=True, exist_ok=True)
    env = result.env
    multi = len(config.algorithms) > 1
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for tr in result.trials:
            total = tr.replay.total_loss
            for alpha in config.alphas:
                w.writerow([tr.trial, tr.algorithm, env.N, env.K, env.T, _fmt(total), _fmt(tr.lstar), _fmt(alpha), _fmt(total - alpha * tr.lstar), config.seed])
    for alg in config.algorithms:
        name = f"rounds-{alg}.csv" if multi else "rounds.csv"
        with open(out / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ROUNDS_HEADER)
            for tr in result.trials:
                if tr.algorithm != alg:
                    continue
                cum = 0.0
                for rec, comp in zip(tr.replay.records, tr.comparator):
                    cum += rec.loss
                    w.writerow([tr.trial, rec.t, rec.chosen, _fmt(rec.loss), _fmt(cum), _fmt(comp)])
    with open(out / "report.jsonl", "w", encoding="utf-8") as fh:
        for tr in result.trials:
            total = tr.replay.total_loss
            rec = {
                "trial": tr.trial,
                "algorithm": tr.algorithm,
                "seed": config.seed,
                "N": env.N,
                "K": env.K,
                "T": env.T,
                "learner_loss": total,
                "comparator_loss": tr.lstar,
                "best_ranking": list(tr.best.order),
                "approx_regret": {repr(a): total - a * tr.lstar for a in config.alphas},
                "lstar_exact": tr.lstar_exact,
                "violations": [str(v) for v in tr.replay.violations],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
