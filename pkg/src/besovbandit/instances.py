"""Worst-case bump families, the answer-zero adversary, noise, and Fano budgets."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .besov import BesovParams, besov_norm, sample_besov_ball
from .wavelets import (
    CoefficientFunction,
    DyadicIndex,
    FatherWavelet,
    _as_points,
    _flat_ids,
    _unflatten,
    cell_index,
    get_wavelet,
)

__all__ = [
    "ThetaFamily",
    "NoiseModel",
    "ObjectiveInstance",
    "NoisyDesign",
    "KLBudget",
    "HorizonTooSmall",
    "SmoothnessWarning",
    "TentPeak",
    "AdversarialOracle",
    "build_theta",
    "choose_j_noiseless",
    "adversarial_oracle",
    "noisy_observe",
    "info_gain",
    "kl_budget",
    "choose_j_noisy",
    "make_instance",
    "FANO_CONSTANT",
    "NOMINAL_FANO_CONSTANT",
]

MAX_FAMILY_LOG2 = 26

# Constant inside log2(c r z / (d log2(c r z))).  With c = 32/ln 2 the average
# KL bound at the unrounded level is at most the natural-log Fano threshold
# whenever log2(c r z) >= 2 log2(d log2(c r z)).  The literal constant 8 never
# meets that threshold (see tests/test_instances.py).
FANO_CONSTANT = 32.0 / math.log(2.0)
NOMINAL_FANO_CONSTANT = 8.0


class HorizonTooSmall(ValueError):
    """No admissible level satisfies the Fano condition for this horizon."""


class SmoothnessWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ThetaFamily:
    """The 2^{dj} rescaled level-j wavelets ``scale * phi_{j,lam}``."""

    level: int
    bp: BesovParams
    wavelet: FatherWavelet

    @property
    def dim(self) -> int:
        return self.bp.dim

    @property
    def size(self) -> int:
        return 1 << (self.dim * self.level)

    @property
    def scale(self) -> float:
        return self.bp.L * 2.0 ** (-self.level * self.bp.level_exponent)

    @property
    def peak(self) -> float:
        return self.bp.L * self.wavelet.peak_value * 2.0 ** (-self.level * self.bp.holder_exponent)

    @property
    def sup_norm_max(self) -> float:
        return self.bp.L * self.wavelet.sup_norm * 2.0 ** (-self.level * self.bp.holder_exponent)

    def index(self, lam) -> DyadicIndex:
        return DyadicIndex(self.level, tuple(int(v) for v in np.atleast_1d(lam)))

    def member(self, lam) -> CoefficientFunction:
        idx = self.index(lam)
        return CoefficientFunction(self.wavelet, self.dim, {idx: self.scale})

    def member_by_flat(self, flat: int) -> CoefficientFunction:
        return self.member(self.lambda_of(flat))

    def lambda_of(self, flat: int) -> tuple[int, ...]:
        cells = _unflatten(np.array([flat], dtype=np.int64), self.level, self.dim)
        return tuple(int(v) + 1 for v in cells[0])

    def lambdas(self) -> np.ndarray:
        """All lambdas, row-major, shape (2^{dj}, d), 1-based."""
        return _unflatten(np.arange(self.size, dtype=np.int64), self.level, self.dim) + 1

    def support_boxes(self) -> tuple[np.ndarray, np.ndarray]:
        """Closed support boxes of every member, shape (2^{dj}, d) each."""
        lo_w, hi_w = self.wavelet.support
        side = 2.0**-self.level
        corner = (self.lambdas() - 1).astype(float) * side
        return corner + lo_w * side, corner + hi_w * side

    def peak_location(self, lam) -> np.ndarray:
        return self.index(lam).center()


def build_theta(j: int, bp: BesovParams, wavelet: FatherWavelet | str) -> ThetaFamily:
    wavelet = get_wavelet(wavelet)
    if j < 0:
        raise ValueError(f"level must be nonnegative, got {j}")
    if bp.dim * j > MAX_FAMILY_LOG2:
        raise ValueError(f"family too large: d*j = {bp.dim * j} exceeds {MAX_FAMILY_LOG2}")
    if wavelet.smoothness_order < bp.holder_exponent:
        warnings.warn(
            f"{wavelet.id} has smoothness {wavelet.smoothness_order} below "
            f"sigma - d/p = {bp.holder_exponent}; members are not Hoelder-regular enough",
            SmoothnessWarning,
            stacklevel=2,
        )
    return ThetaFamily(j, bp, wavelet)


def choose_j_noiseless(T: int, d: int) -> int:
    """Smallest j with 2^{dj} >= 2T, i.e. ceil(log2(2T)/d), in exact integer arithmetic."""
    if T < 1:
        raise ValueError("T must be at least 1")
    bits = (2 * T - 1).bit_length()
    return -(-bits // d)


class AdversarialOracle:
    """Answers 0 to every query and keeps the set of touched level-j cells.

    One oracle per episode.  Haar members live on left-closed cells (1.0 goes
    to the last cell); bump members vanish on cell boundaries, so recording the
    left-closed cell is conservative for them as well.
    """

    def __init__(self, family: ThetaFamily):
        self.family = family
        self._touched: set[int] = set()
        self.queries: list[np.ndarray] = []

    @property
    def touched(self) -> frozenset[int]:
        return frozenset(self._touched)

    def touched_lambdas(self) -> list[tuple[int, ...]]:
        return [self.family.lambda_of(f) for f in sorted(self._touched)]

    def candidates(self) -> int:
        return self.family.size - len(self._touched)

    def query(self, x) -> float:
        pts, _ = _as_points(x, self.family.dim)
        flat = _flat_ids(cell_index(pts, self.family.level), self.family.level)
        self._touched.update(int(v) for v in flat)
        self.queries.append(pts[0].copy())
        return 0.0

    def finalize(self, T: int) -> dict:
        """Pick the first untouched member (row-major) and report its regret."""
        fam = self.family
        if fam.size < 2 * T:
            raise ValueError(f"family of size {fam.size} is smaller than 2T = {2 * T}")
        free = next((k for k in range(fam.size) if k not in self._touched), None)
        if free is None:
            raise ValueError("every cell was queried; no consistent member remains")
        lam = fam.lambda_of(free)
        member = fam.member(lam)
        return {
            "lambda": lam,
            "member": member,
            "simple_regret": fam.peak,
            "cumulative_regret": T * fam.peak,
        }


def adversarial_oracle(j: int, bp: BesovParams, wavelet) -> AdversarialOracle:
    return AdversarialOracle(build_theta(j, bp, wavelet))


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    eta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if (self.kind == "none") != (self.eta == 0.0):
            raise ValueError("eta must be 0 exactly when the noise kind is 'none'")

    @classmethod
    def gaussian(cls, eta: float) -> NoiseModel:
        return cls("gaussian", float(eta)) if eta > 0 else cls()

    @property
    def noisy(self) -> bool:
        return self.kind != "none"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "eta": self.eta}


@dataclass(frozen=True)
class TentPeak:
    """``max(0, height - L * ||x - apex||^s)``: one s-Hoelder peak with seminorm <= L."""

    s: float
    L: float
    height: float
    apex: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.apex)

    @property
    def radius(self) -> float:
        return (self.height / self.L) ** (1.0 / self.s)

    def __call__(self, x):
        pts, single = _as_points(x, self.dim)
        r = np.linalg.norm(pts - np.asarray(self.apex), axis=1)
        vals = np.maximum(0.0, self.height - self.L * r**self.s)
        return float(vals[0]) if single else vals


@dataclass(frozen=True)
class ObjectiveInstance:
    objective: Callable
    max_value: float
    max_location: np.ndarray
    noise: NoiseModel = field(default_factory=NoiseModel)
    description: str = ""
    dim: int = 1

    def __call__(self, x):
        return self.objective(x)


def noisy_observe(inst: ObjectiveInstance, x, rng: np.random.Generator) -> float:
    value = float(inst.objective(x))
    if inst.noise.kind == "none":
        return value
    return value + inst.noise.eta * float(rng.standard_normal())


def info_gain(j: int, bp: BesovParams, wavelet, eta: float) -> float:
    """Largest single-query KL divergence between the zero function and a member."""
    if not eta > 0:
        raise ValueError("information gain needs eta > 0")
    w = get_wavelet(wavelet)
    return (bp.L * w.sup_norm) ** 2 * 2.0 ** (-2 * j * bp.holder_exponent) / (2.0 * eta**2)


@dataclass(frozen=True)
class KLBudget:
    avg_kl_bound: float
    fano_threshold: float
    fano_threshold_log2: float
    holds: bool

    @property
    def ratio(self) -> float:
        if self.fano_threshold == 0:
            return math.inf
        return self.avg_kl_bound / self.fano_threshold


def kl_budget(j: int, T: int, eta: float, bp: BesovParams, wavelet) -> KLBudget:
    """Average KL bound D*_j T / |Theta_j| against log|Theta_j| / 16 (natural log)."""
    if j < 0:
        raise ValueError("level must be nonnegative")
    avg = info_gain(j, bp, wavelet, eta) * T / 2.0 ** (bp.dim * j)
    thr = bp.dim * j * math.log(2.0) / 16.0
    return KLBudget(avg, thr, bp.dim * j / 16.0, avg <= thr)


@dataclass(frozen=True)
class NoisyDesign:
    r: float
    z: float
    j_real: float
    j_real_corrected: float
    j: int
    d_star: float
    budget: KLBudget
    j_nominal_holds: bool


def _j_formula(r: float, z: float, d: int, c: float) -> float:
    x = c * r * z
    if x <= 2.0 or d * math.log2(x) <= 0:
        return -math.inf
    inner = x / (d * math.log2(x))
    return math.log2(inner) / r if inner > 0 else -math.inf


def choose_j_noisy(
    T: int, eta: float, bp: BesovParams, wavelet, constant: float = FANO_CONSTANT
) -> NoisyDesign:
    """Resolution level for the noisy lower bound.

    ``j_real`` is the closed form with the literal constant 8; the level is
    taken as the floor of the same closed form with ``constant`` and falls back
    to the ceiling when the floor misses the Fano condition.
    """
    if not bp.supercritical:
        raise ValueError("sigma must exceed d/p")
    if not eta > 0:
        raise ValueError("eta must be positive")
    w = get_wavelet(wavelet)
    d = bp.dim
    r = d + 2.0 * bp.holder_exponent
    z = (bp.L * w.sup_norm) ** 2 / 2.0 * T / eta**2
    j_nominal = _j_formula(r, z, d, NOMINAL_FANO_CONSTANT)
    j_corr = _j_formula(r, z, d, constant)
    if not j_corr >= 0:
        raise HorizonTooSmall(f"T/eta^2 = {T / eta**2:g} is too small (level {j_corr})")
    nominal_holds = j_nominal >= 0 and kl_budget(max(0, math.ceil(j_nominal)), T, eta, bp, w).holds
    for j in dict.fromkeys((math.floor(j_corr), math.ceil(j_corr))):
        budget = kl_budget(j, T, eta, bp, w)
        if budget.holds:
            return NoisyDesign(r, z, j_nominal, j_corr, j, info_gain(j, bp, w, eta), budget, nominal_holds)
    raise HorizonTooSmall(
        f"Fano condition fails at levels {math.floor(j_corr)} and {math.ceil(j_corr)} "
        f"for T/eta^2 = {T / eta**2:g}"
    )


def _lambda_from(params: dict, family: ThetaFamily, rng: np.random.Generator):
    lam = params.get("lambda", "random")
    if isinstance(lam, str):
        if lam != "random":
            raise ValueError(f"lambda must be a list of integers or 'random', got {lam!r}")
        return tuple(int(v) for v in rng.integers(1, (1 << family.level) + 1, size=family.dim))
    return tuple(int(v) for v in np.atleast_1d(lam))


def make_instance(
    kind: str, params: dict, noise: NoiseModel | None = None, rng_seed=None, T: int | None = None
) -> ObjectiveInstance:
    """Build an objective from a registry kind.

    theta-member: ``bp``, ``wavelet``, ``level`` (int or ``"auto"`` for the
    noiseless horizon-matched level), ``lambda`` (list or ``"random"``).
    random-besov: ``bp``, ``wavelet``, ``max_level``, ``fill``.
    tent-peak: ``s``, ``L``, ``dim``, ``apex`` (list or ``"random"``), and
    either ``height`` or ``radius_times_T`` (peak radius c/T).
    """
    noise = noise or NoiseModel()
    rng = np.random.default_rng(rng_seed)
    if kind == "theta-member":
        bp = params["bp"] if isinstance(params["bp"], BesovParams) else BesovParams.from_dict(params["bp"])
        level = params.get("level", "auto")
        if level == "auto":
            if T is None:
                raise ValueError("level 'auto' needs the horizon T")
            level = choose_j_noiseless(T, bp.dim)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SmoothnessWarning)
            fam = build_theta(int(level), bp, params.get("wavelet", "haar"))
        lam = _lambda_from(params, fam, rng)
        member = fam.member(lam)
        desc = f"theta-member(j={fam.level},lambda={list(lam)},{fam.wavelet.id})"
        return ObjectiveInstance(member, fam.peak, fam.peak_location(lam), noise, desc, fam.dim)
    if kind == "random-besov":
        bp = params["bp"] if isinstance(params["bp"], BesovParams) else BesovParams.from_dict(params["bp"])
        max_level = int(params["max_level"])
        f = sample_besov_ball(bp, max_level, float(params.get("fill", 0.5)), rng, params.get("wavelet", "haar"))
        loc, val = _grid_argmax(f, bp.dim, max_level + 4)
        desc = f"random-besov(max_level={max_level},norm={besov_norm(f, bp):.6g})"
        return ObjectiveInstance(f, val, loc, noise, desc, bp.dim)
    if kind == "tent-peak":
        dim = int(params.get("dim", 1))
        s, L = float(params.get("s", 1.0)), float(params.get("L", 1.0))
        apex = params.get("apex", "random")
        if isinstance(apex, str):
            if apex != "random":
                raise ValueError(f"apex must be a list or 'random', got {apex!r}")
            apex = rng.uniform(0.25, 0.75, size=dim)
        apex = tuple(float(v) for v in np.atleast_1d(apex))
        if len(apex) != dim:
            raise ValueError(f"apex has {len(apex)} coordinates, expected {dim}")
        if "radius_times_T" in params:
            if T is None:
                raise ValueError("radius_times_T needs the horizon T")
            height = L * (float(params["radius_times_T"]) / T) ** s
        else:
            height = float(params.get("height", 1.0))
        tent = TentPeak(s, L, height, apex)
        desc = f"tent-peak(s={s:g},L={L:g},height={height:.6g},apex={[round(a, 6) for a in apex]})"
        return ObjectiveInstance(tent, height, np.asarray(apex), noise, desc, dim)
    raise ValueError(f"unknown instance kind {kind!r}")


def _grid_argmax(f: CoefficientFunction, dim: int, level: int, max_points: int = 1 << 22):
    """Search the closed dyadic vertex grid k / 2^level, then refine locally.

    The grid holds every breakpoint of coarser levels, so it is exact for haar
    (cell corners) and tent-bump (piecewise multilinear) expansions with
    max_level < level.  Smooth-bump maxima can sit between vertices; two rounds
    of finer local grids around the best candidates close most of that gap.
    """
    while level > 0 and ((1 << level) + 1) ** dim > max_points:
        level -= 1
    n = 1 << level
    axis = np.arange(n + 1) / n
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    vals = f(grid)
    k = int(np.argmax(vals))
    best_x, best_v = grid[k].copy(), float(vals[k])
    if f.wavelet.id != "smooth-bump":
        return best_x, best_v
    per_axis = 33 if dim <= 2 else 9
    offsets = np.linspace(-1.0, 1.0, per_axis)
    local = np.stack(np.meshgrid(*([offsets] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    centers = grid[np.argsort(vals)[-8:]]
    step = 1.0 / n
    for _ in range(2):
        pts = np.clip((centers[:, None, :] + step * local[None]).reshape(-1, dim), 0.0, 1.0)
        pv = f(pts)
        order = np.argsort(pv)[-8:]
        if pv[order[-1]] > best_v:
            best_x, best_v = pts[order[-1]].copy(), float(pv[order[-1]])
        centers = pts[order]
        step *= 2.0 / (per_axis - 1)
    return best_x, best_v
