"""Episode execution, regret accounting, horizon sweeps and rate fits."""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .besov import BesovParams
from .instances import (
    AdversarialOracle,
    ObjectiveInstance,
    SmoothnessWarning,
    build_theta,
    choose_j_noiseless,
)
from .strategies import Strategy, Trace
from .wavelets import format_float, get_wavelet

__all__ = [
    "DomainViolation",
    "RegretReport",
    "RateFit",
    "EpisodeResult",
    "episode_seed",
    "episode_streams",
    "run_episode",
    "fit_loglog",
    "sweep_rates",
    "lower_bound_game",
    "phase_diagram",
    "noisy_simple_exponent",
    "target_exponent",
    "RESULTS_HEADER",
    "results_csv",
]

log = logging.getLogger(__name__)

RESULTS_HEADER = "experiment,strategy,instance,T,rep,seed,simple_regret,cumulative_regret"


class DomainViolation(RuntimeError):
    """A strategy emitted a query outside [0, 1]^d; the episode is aborted."""

    def __init__(self, t: int, x):
        super().__init__(f"query {t} at {np.asarray(x).tolist()} lies outside [0, 1]^d")
        self.t = t
        self.x = x


def episode_seed(base_seed: int, T: int, rep: int) -> int:
    """Stable 64-bit seed for episode (T, rep): first word of numpy's
    SeedSequence hash of the triple."""
    ss = np.random.SeedSequence([int(base_seed) & (2**64 - 1), int(T), int(rep)])
    return int(ss.generate_state(1, np.uint64)[0])


def episode_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (strategy, noise) generators derived from one episode seed."""
    s_strategy, s_noise = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(s_strategy), np.random.default_rng(s_noise)


@dataclass
class RegretReport:
    simple_regret: float
    cumulative_regret: float
    instantaneous: np.ndarray
    instance: str
    strategy: str
    seed: int | None
    clamped: int = 0


def _checked(x, dim: int, t: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dim or not all(0.0 <= v <= 1.0 for v in x.tolist()):
        raise DomainViolation(t, x)
    return x


def _regret_report(gaps: np.ndarray, instance: str, strategy: str, seed) -> RegretReport:
    clamped = int(np.sum(gaps < 0))
    if clamped:
        log.info("clamped %d negative gaps (grid-approximate maximum)", clamped)
        gaps = np.maximum(gaps, 0.0)
    return RegretReport(float(gaps[-1]), float(np.sum(gaps)), gaps, instance, strategy, seed, clamped)


def run_episode(
    strategy: Strategy, instance: ObjectiveInstance, T: int, seed: int
) -> tuple[Trace, RegretReport]:
    """Query/observe loop for T rounds; regret uses the true objective."""
    if strategy.dim != instance.dim:
        raise ValueError(f"strategy dimension {strategy.dim} != instance dimension {instance.dim}")
    if strategy.requires_noiseless and instance.noise.noisy:
        raise ValueError(f"{strategy.name} requires noiseless observations")
    rng_strategy, rng_noise = episode_streams(seed)
    trace = Trace(T, instance.dim, seed, instance.description)
    values = np.empty(T)
    for t in range(T):
        x = _checked(strategy.next_query(trace, rng_strategy), instance.dim, t + 1)
        values[t] = float(instance.objective(x))
        if instance.noise.noisy:
            y = values[t] + instance.noise.eta * float(rng_noise.standard_normal())
        else:
            y = values[t]
        trace.append(x, y)
    gaps = instance.max_value - values
    return trace, _regret_report(gaps, instance.description, strategy.describe(), seed)


def fit_loglog(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least squares of log(value) on log(T): (slope, intercept, r_squared)."""
    pts = sorted((float(t), float(v)) for t, v in points)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    if any(v <= 0 or t <= 0 for t, v in pts):
        raise ValueError("log-log fit needs positive horizons and values")
    x = np.log([t for t, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return float(slope), float(intercept), r2


@dataclass
class EpisodeResult:
    T: int
    rep: int
    seed: int
    simple_regret: float
    cumulative_regret: float
    strategy: str
    instance: str


@dataclass
class RateFit:
    horizons: list[int]
    mean_regret: list[float]
    std_error: list[float]
    slope: float
    intercept: float
    r_squared: float
    target_exponent: float
    tolerance: float
    within_tolerance: bool
    regret_kind: str
    excluded: list[int] = field(default_factory=list)
    episodes: list[EpisodeResult] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "regret": self.regret_kind,
            "horizons": self.horizons,
            "mean_regret": self.mean_regret,
            "std_error": self.std_error,
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "target_exponent": self.target_exponent,
            "tolerance": self.tolerance,
            "within_tolerance": self.within_tolerance,
            "excluded_horizons": self.excluded,
        }


def _run_one(args) -> EpisodeResult:
    strategy_factory, instance_factory, T, rep, seed = args
    instance = instance_factory(T, seed)
    strategy = strategy_factory(T, instance.dim)
    _, rep_report = run_episode(strategy, instance, T, seed)
    return EpisodeResult(
        T, rep, seed, rep_report.simple_regret, rep_report.cumulative_regret,
        rep_report.strategy, rep_report.instance,
    )


def sweep_rates(
    strategy_factory: Callable[[int, int], Strategy],
    instance_factory: Callable[[int, int], ObjectiveInstance],
    horizons: Sequence[int],
    reps: int,
    base_seed: int,
    regret_kind: str = "simple",
    target_exponent: float = math.nan,
    tolerance: float = 0.1,
    workers: int = 1,
) -> RateFit:
    """Mean regret per horizon over ``reps`` seeded episodes, then a log-log fit.

    ``strategy_factory(T, dim)`` and ``instance_factory(T, episode_seed)``
    build fresh objects per episode; with ``workers > 1`` they must pickle.
    """
    if regret_kind not in ("simple", "cumulative"):
        raise ValueError(f"regret kind must be 'simple' or 'cumulative', got {regret_kind!r}")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    horizons = sorted({int(T) for T in horizons})
    jobs = [
        (strategy_factory, instance_factory, T, rep, episode_seed(base_seed, T, rep))
        for T in horizons
        for rep in range(reps)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_run_one(job) for job in jobs]
    results.sort(key=lambda r: (r.T, r.rep))
    means, ses, fit_points, excluded = [], [], [], []
    for T in horizons:
        vals = np.array(
            [r.simple_regret if regret_kind == "simple" else r.cumulative_regret for r in results if r.T == T]
        )
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        means.append(mean)
        ses.append(se)
        if mean > 0:
            fit_points.append((T, mean))
        else:
            excluded.append(T)
            warnings.warn(f"zero mean regret at T={T}; excluded from the fit", RuntimeWarning, stacklevel=2)
    if len(fit_points) >= 2:
        slope, intercept, r2 = fit_loglog(fit_points)
    else:
        slope = intercept = math.nan
        r2 = 0.0
    within = bool(abs(slope - target_exponent) <= tolerance) if not math.isnan(target_exponent) else False
    return RateFit(
        horizons, means, ses, slope, intercept, r2, target_exponent, tolerance, within,
        regret_kind, excluded, results,
    )


def lower_bound_game(
    strategy_factory: Callable[[int, int], Strategy],
    T: int,
    bp: BesovParams,
    wavelet="haar",
    reps: int = 1,
    base_seed: int = 0,
) -> dict:
    """Play against the answer-zero adversary at j = choose_j_noiseless(T, d)."""
    wavelet = get_wavelet(wavelet)
    j = choose_j_noiseless(T, bp.dim)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmoothnessWarning)
        family = build_theta(j, bp, wavelet)
    d, inv_p, sigma = bp.dim, bp.inv_p, bp.sigma
    rate = inv_p - sigma / d
    floor_no_prob = bp.L * wavelet.peak_value * 2.0 ** ((d + 1) * rate) * T**rate
    observed = []
    episodes = []
    for rep in range(reps):
        seed = episode_seed(base_seed, T, rep)
        rng_strategy, _ = episode_streams(seed)
        oracle = AdversarialOracle(family)
        strategy = strategy_factory(T, d)
        trace = Trace(T, d, seed, "adversary")
        for t in range(T):
            x = _checked(strategy.next_query(trace, rng_strategy), d, t + 1)
            trace.append(x, oracle.query(x))
        outcome = oracle.finalize(T)
        member = outcome["member"]
        values = member(trace.x)
        if np.any(values != 0.0):
            raise AssertionError("adversary answers are inconsistent with the surviving member")
        simple = family.peak - float(values[-1])
        cumulative = float(np.sum(family.peak - values))
        observed.append(simple)
        episodes.append(
            EpisodeResult(T, rep, seed, simple, cumulative, strategy.describe(),
                          f"adversary(j={j},lambda={list(outcome['lambda'])})")
        )
    obs = float(np.min(observed))
    return {
        "T": T,
        "level": j,
        "family_size": family.size,
        "peak": family.peak,
        "observed_regret": obs,
        "theoretical_floor": 2.0 ** (-(d + 1)) * floor_no_prob,
        "floor_without_probability": floor_no_prob,
        "ratio": obs / (2.0 ** (-(d + 1)) * floor_no_prob),
        "episodes": episodes,
    }


def noisy_simple_exponent(holder_exponent, d):
    """alpha with noisy simple regret ~ T^-alpha; works on Fractions exactly."""
    return holder_exponent / (2 * holder_exponent + d)


def phase_diagram(d: int, sigmas: Sequence, inv_ps: Sequence) -> list[dict]:
    """(sigma, 1/p) -> exponents; grid values are converted to exact fractions.

    Rows with sigma <= d/p carry ``feasible=False`` and no exponents.
    """
    rows = []
    for sigma in sigmas:
        fs = Fraction(str(sigma)) if not isinstance(sigma, Fraction) else sigma
        for inv_p in inv_ps:
            fp = Fraction(str(inv_p)) if not isinstance(inv_p, Fraction) else inv_p
            s = fs - d * fp
            if s <= 0:
                rows.append({"sigma": fs, "inv_p": fp, "feasible": False})
                continue
            rows.append(
                {
                    "sigma": fs,
                    "inv_p": fp,
                    "feasible": True,
                    "alpha": noisy_simple_exponent(s, d),
                    "noiseless_exponent": fs / d - fp,
                    "crossover_eta_exponent": fp - fs / d,
                }
            )
    return rows


def target_exponent(regret_kind: str, noisy: bool, holder_exponent: float, d: int) -> float:
    """Theoretical regret exponent in T for the Hoelder smoothness s = sigma - d/p."""
    s = holder_exponent
    if regret_kind == "simple":
        return -noisy_simple_exponent(s, d) if noisy else -s / d
    if noisy:
        return (s + d) / (2 * s + d)
    return 1.0 - s / d


def results_csv(experiment: str, episodes: Sequence[EpisodeResult]) -> str:
    """Results table text; floats use 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULTS_HEADER.split(","))
    for e in sorted(episodes, key=lambda r: (r.T, r.rep)):
        writer.writerow(
            [experiment, e.strategy, e.instance, e.T, e.rep, e.seed,
             format_float(e.simple_regret), format_float(e.cumulative_regret)]
        )
    return buf.getvalue()
