"""Besov and Hoelder (semi)norms of wavelet expansions, Besov-ball sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .wavelets import HAAR, CoefficientFunction, FatherWavelet, get_wavelet

__all__ = [
    "BesovParams",
    "HolderParams",
    "parse_exponent",
    "besov_norm",
    "holder_seminorm_estimate",
    "holder_pairs",
    "sample_besov_ball",
    "embedding_ratio",
]


def parse_exponent(value) -> float:
    """Accept a number or the string ``"inf"`` for p, q in [1, inf]."""
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        value = float(value)
    value = float(value)
    if not value >= 1.0:
        raise ValueError(f"integrability exponent must lie in [1, inf], got {value}")
    return value


def _exponent_repr(value: float):
    return "inf" if math.isinf(value) else value


@dataclass(frozen=True)
class BesovParams:
    sigma: float
    p: float
    q: float
    L: float
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "p", parse_exponent(self.p))
        object.__setattr__(self, "q", parse_exponent(self.q))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.L > 0:
            raise ValueError(f"ball radius L must be positive, got {self.L}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def inv_p(self) -> float:
        return 0.0 if math.isinf(self.p) else 1.0 / self.p

    @property
    def holder_exponent(self) -> float:
        """sigma - d/p, the smoothness of the embedding Hoelder space."""
        return self.sigma - self.dim * self.inv_p

    @property
    def supercritical(self) -> bool:
        return self.holder_exponent > 0

    @property
    def level_exponent(self) -> float:
        """Per-level weight exponent sigma + d(1/2 - 1/p)."""
        return self.sigma + self.dim * (0.5 - self.inv_p)

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "p": _exponent_repr(self.p),
            "q": _exponent_repr(self.q),
            "L": self.L,
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> BesovParams:
        return cls(
            sigma=float(doc["sigma"]),
            p=doc["p"],
            q=doc.get("q", doc["p"]),
            L=float(doc.get("L", 1.0)),
            dim=int(doc.get("dim", 1)),
        )


@dataclass(frozen=True)
class HolderParams:
    s: float
    L: float
    dim: int

    def __post_init__(self):
        if not 0.0 < self.s <= 1.0:
            raise ValueError(f"Hoelder exponent must lie in (0, 1], got {self.s}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")


def _lp(values: np.ndarray, p: float) -> float:
    a = np.abs(values)
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    return float(np.sum(a**p) ** (1.0 / p))


def besov_norm(f: CoefficientFunction, bp: BesovParams) -> float:
    """Outer l_q over levels of 2^{j(sigma + d(1/2 - 1/p))} * ||f_j||_p."""
    if f.dim != bp.dim:
        raise ValueError(f"function dimension {f.dim} does not match Besov dimension {bp.dim}")
    terms = np.array(
        [2.0 ** (j * bp.level_exponent) * _lp(f.level_values(j), bp.p) for j in f.levels]
    )
    return _lp(terms, bp.q)


def holder_pairs(n_pairs: int, dim: int, max_level: int, rng: np.random.Generator):
    """Pair design for seminorm estimation.

    Even-indexed pairs are independent uniform points; odd-indexed pairs put
    ``y`` at distance ``2^-k * v`` from ``x`` (``v`` uniform in (0, 1]) with
    ``k`` cycling through ``1..max_level+2``.  Each pair consumes one fixed-size
    row of draws, so a smaller request is a prefix of a larger one.
    """
    draws = rng.random((n_pairs, 2 * dim + 1))
    x = draws[:, :dim]
    y = draws[:, dim : 2 * dim].copy()
    odd = np.arange(n_pairs) % 2 == 1
    if np.any(odd):
        n_scales = max_level + 2
        k = 1 + (np.arange(n_pairs)[odd] // 2) % n_scales
        direction = 2.0 * draws[odd, dim : 2 * dim] - 1.0
        norm = np.linalg.norm(direction, axis=1, keepdims=True)
        norm[norm == 0.0] = 1.0
        radius = (2.0 ** -k.astype(float)) * (1.0 - draws[odd, 2 * dim])
        y[odd] = np.clip(x[odd] + direction / norm * radius[:, None], 0.0, 1.0)
    return x, y


def holder_seminorm_estimate(
    f: Callable, hp: HolderParams, n_pairs: int, rng_seed=None, max_level: int | None = None
) -> float:
    """Lower bound on the s-Hoelder seminorm from ``n_pairs`` sampled pairs."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    if max_level is None:
        max_level = max(getattr(f, "max_level", 10), 0)
    rng = np.random.default_rng(rng_seed)
    x, y = holder_pairs(int(n_pairs), hp.dim, max_level, rng)
    dist = np.linalg.norm(x - y, axis=1)
    ok = dist > 0
    if not np.any(ok):
        return 0.0
    fx = np.asarray(f(x[ok]), dtype=float).reshape(-1)
    fy = np.asarray(f(y[ok]), dtype=float).reshape(-1)
    return float(np.max(np.abs(fx - fy) / dist[ok] ** hp.s))


def sample_besov_ball(
    bp: BesovParams,
    max_level: int,
    fill: float,
    rng_seed=None,
    wavelet: FatherWavelet | str = HAAR,
) -> CoefficientFunction:
    """Random sparse expansion rescaled to Besov norm ``L * u``, ``u ~ U(0, 1]``."""
    d = bp.dim
    if max_level < 0 or d * max_level > 20:
        raise ValueError(f"max_level must satisfy 0 <= max_level <= 20/d, got {max_level}")
    if not 0.0 < fill <= 1.0:
        raise ValueError(f"fill must lie in (0, 1], got {fill}")
    wavelet = get_wavelet(wavelet)
    rng = np.random.default_rng(rng_seed)
    for _ in range(100):
        levels = {}
        for j in range(max_level + 1):
            size = 1 << (d * j)
            active = rng.random(size) < fill
            values = rng.standard_normal(size)
            levels[j] = (np.flatnonzero(active).astype(np.int64), values[active])
        f = CoefficientFunction._from_arrays(wavelet, d, levels)
        if not f.is_zero():
            break
    else:
        return CoefficientFunction(wavelet, d)
    u = 1.0 - rng.random()
    return f.scaled(bp.L * u / besov_norm(f, bp))


def embedding_ratio(
    f: CoefficientFunction, bp: BesovParams, n_pairs: int, rng_seed=None
) -> float:
    """Estimated C^{sigma - d/p} seminorm over the Besov norm."""
    s = bp.holder_exponent
    if not 0.0 < s <= 1.0:
        raise ValueError(f"sigma - d/p must lie in (0, 1], got {s}")
    norm = besov_norm(f, bp)
    if norm == 0.0:
        raise ValueError("embedding ratio undefined for a zero Besov norm")
    hp = HolderParams(s, bp.L, bp.dim)
    return holder_seminorm_estimate(f, hp, n_pairs, rng_seed) / norm
