"""Father wavelets on dyadic cells and finite coefficient expansions.

A :class:`CoefficientFunction` is a finite map from dyadic indices ``(j, lam)``
to real coefficients; the function it represents is the synthesis sum
``sum f_{j,lam} * phi_{j,lam}(x)``.  ``lam`` is 1-based, each entry in
``[1, 2**j]``, and ``phi_{j,lam}(x) = 2**(d*j/2) * phi(2**j * x - (lam - 1))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

__all__ = [
    "FatherWavelet",
    "HAAR",
    "TENT_BUMP",
    "SMOOTH_BUMP",
    "get_wavelet",
    "DyadicIndex",
    "CoefficientFunction",
    "cell_index",
    "eval_father",
    "eval_dilated",
    "eval_function",
    "haar_analyze",
    "format_float",
]


def format_float(value: float) -> str:
    """Render a double with 17 significant digits (round-trip exact)."""
    return format(float(value), ".17g")


def _haar_1d(u):
    return ((u >= 0.0) & (u < 1.0)).astype(float)


def _tent_1d(u):
    return np.maximum(0.0, 1.0 - np.abs(2.0 * u - 1.0))


def _smooth_1d(u):
    # (4u(1-u))^3 on [0,1]: vanishes to third order at both ends, so C^2 on R.
    v = np.clip(u, 0.0, 1.0)
    out = (4.0 * v * (1.0 - v)) ** 3
    return np.where((u > 0.0) & (u < 1.0), out, 0.0)


@dataclass(frozen=True)
class FatherWavelet:
    """A nonnegative tensor-product father wavelet supported in the unit cube.

    ``l2_sq`` is the squared L2 norm of the 1-d shape; the d-dimensional
    tensor product has squared norm ``l2_sq ** d``.
    """

    id: str
    support: tuple[float, float]
    peak_value: float
    sup_norm: float
    smoothness_order: float
    l2_sq: float
    shape: Callable[[np.ndarray], np.ndarray]

    def __repr__(self) -> str:
        return f"FatherWavelet({self.id!r})"

    @property
    def is_haar(self) -> bool:
        return self.id == "haar"

    def l2_norm_sq(self, dim: int) -> float:
        return self.l2_sq**dim


HAAR = FatherWavelet("haar", (0.0, 1.0), 1.0, 1.0, 0.0, 1.0, _haar_1d)
TENT_BUMP = FatherWavelet("tent-bump", (0.0, 1.0), 1.0, 1.0, 1.0, 1.0 / 3.0, _tent_1d)
# int_0^1 (4u(1-u))^6 du = 4**6 * B(7, 7) = 4096 / 12012
SMOOTH_BUMP = FatherWavelet(
    "smooth-bump", (0.0, 1.0), 1.0, 1.0, 2.0, 4096.0 / 12012.0, _smooth_1d
)

_WAVELETS = {w.id: w for w in (HAAR, TENT_BUMP, SMOOTH_BUMP)}


def get_wavelet(name: str | FatherWavelet) -> FatherWavelet:
    if isinstance(name, FatherWavelet):
        return name
    try:
        return _WAVELETS[name]
    except KeyError:
        raise ValueError(
            f"unknown wavelet {name!r}; expected one of {sorted(_WAVELETS)}"
        ) from None


@dataclass(frozen=True)
class DyadicIndex:
    j: int
    lam: tuple[int, ...]

    def __post_init__(self):
        if self.j < 0:
            raise ValueError(f"level must be nonnegative, got {self.j}")
        n = 1 << self.j
        for li in self.lam:
            if not 1 <= li <= n:
                raise ValueError(f"lambda entry {li} outside [1, {n}] at level {self.j}")

    @property
    def dim(self) -> int:
        return len(self.lam)

    def cell(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of the dyadic cell."""
        side = 2.0**-self.j
        lo = (np.asarray(self.lam, dtype=float) - 1.0) * side
        return lo, lo + side

    def center(self) -> np.ndarray:
        lo, hi = self.cell()
        return 0.5 * (lo + hi)


def _as_points(x, dim: int | None = None) -> tuple[np.ndarray, bool]:
    """Coerce to an (n, d) float array; the flag is True for a single point."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if dim is None or arr.shape[0] == dim:
            return arr.reshape(1, -1), True
        if dim == 1:
            return arr.reshape(-1, 1), False
        raise ValueError(f"point has dimension {arr.shape[0]}, expected {dim}")
    if arr.ndim != 2 or (dim is not None and arr.shape[1] != dim):
        raise ValueError(f"points have shape {arr.shape}, expected (n, {dim})")
    return arr, False


def cell_index(x: np.ndarray, j: int) -> np.ndarray:
    """0-based level-``j`` cell of each point: left-closed cells, 1.0 in the last."""
    n = 1 << j
    return np.clip(np.floor(x * n), 0, n - 1).astype(np.int64)


def _flat_ids(cells: np.ndarray, j: int) -> np.ndarray:
    n = 1 << j
    flat = np.zeros(cells.shape[0], dtype=np.int64)
    for axis in range(cells.shape[1]):
        flat = flat * n + cells[:, axis]
    return flat


def _unflatten(flat: np.ndarray, j: int, dim: int) -> np.ndarray:
    n = 1 << j
    out = np.empty((flat.shape[0], dim), dtype=np.int64)
    rest = flat.copy()
    for axis in range(dim - 1, -1, -1):
        out[:, axis] = rest % n
        rest //= n
    return out


def eval_father(w: FatherWavelet, x) -> float | np.ndarray:
    """phi(x) as the tensor product of the 1-d shape; zero outside the unit cube."""
    pts, single = _as_points(x)
    vals = np.prod(w.shape(pts), axis=1)
    return float(vals[0]) if single else vals


def _dilated_values(w: FatherWavelet, j: int, cells: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Unscaled phi(2^j x - cell) for points already assigned to ``cells``."""
    if w.is_haar:
        return np.ones(pts.shape[0])
    u = pts * float(1 << j) - cells
    return np.prod(w.shape(u), axis=1)


def eval_dilated(w: FatherWavelet, idx: DyadicIndex, x) -> float | np.ndarray:
    pts, single = _as_points(x, idx.dim)
    j = idx.j
    target = np.asarray(idx.lam, dtype=np.int64) - 1
    if w.is_haar:
        # left-closed cells, closed at the right edge of the domain
        inside = np.all(cell_index(pts, j) == target, axis=1)
        inside &= np.all((pts >= 0.0) & (pts <= 1.0), axis=1)
        vals = np.where(inside, 1.0, 0.0)
    else:
        u = pts * float(1 << j) - target
        vals = np.prod(w.shape(u), axis=1)
    vals = vals * 2.0 ** (idx.dim * j / 2.0)
    return float(vals[0]) if single else vals


class CoefficientFunction:
    """Finite wavelet expansion over one father wavelet, immutable.

    Coefficients are stored per level as sorted row-major flat cell ids, so
    evaluation at ``n`` points costs one ``searchsorted`` per stored level.
    """

    __slots__ = ("wavelet", "dim", "_levels", "_lookup")

    def __init__(self, wavelet: FatherWavelet | str, dim: int, coeffs: Mapping | Iterable = ()):
        self.wavelet = get_wavelet(wavelet)
        if dim < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        self.dim = int(dim)
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        per_level: dict[int, dict[int, float]] = {}
        for key, value in items:
            if isinstance(key, DyadicIndex):
                idx = key
            else:
                j, lam = key
                idx = DyadicIndex(int(j), tuple(int(v) for v in np.atleast_1d(lam)))
            if idx.dim != self.dim:
                raise ValueError(f"index {idx} has dimension {idx.dim}, expected {self.dim}")
            flat = int(_flat_ids(np.asarray([idx.lam], dtype=np.int64) - 1, idx.j)[0])
            value = float(value)
            if value != 0.0:
                per_level.setdefault(idx.j, {})[flat] = value
            else:
                per_level.get(idx.j, {}).pop(flat, None)
        self._levels: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for j in sorted(per_level):
            if not per_level[j]:
                continue
            ids = np.fromiter(sorted(per_level[j]), dtype=np.int64)
            vals = np.array([per_level[j][i] for i in ids.tolist()])
            ids.setflags(write=False)
            vals.setflags(write=False)
            self._levels[j] = (ids, vals)
        self._lookup = None

    @classmethod
    def _from_arrays(cls, wavelet, dim, levels: dict[int, tuple[np.ndarray, np.ndarray]]):
        obj = cls.__new__(cls)
        obj.wavelet = get_wavelet(wavelet)
        obj.dim = int(dim)
        obj._levels = {}
        for j in sorted(levels):
            ids, vals = levels[j]
            keep = vals != 0.0
            ids = np.asarray(ids, dtype=np.int64)[keep]
            vals = np.asarray(vals, dtype=float)[keep]
            if ids.size == 0:
                continue
            order = np.argsort(ids, kind="stable")
            ids, vals = ids[order], vals[order]
            ids.setflags(write=False)
            vals.setflags(write=False)
            obj._levels[j] = (ids, vals)
        obj._lookup = None
        return obj

    @property
    def levels(self) -> list[int]:
        return list(self._levels)

    @property
    def max_level(self) -> int:
        return max(self._levels, default=-1)

    def __len__(self) -> int:
        return sum(ids.size for ids, _ in self._levels.values())

    def is_zero(self) -> bool:
        return not self._levels

    def level_values(self, j: int) -> np.ndarray:
        """Nonzero coefficients stored at level ``j`` (empty if none)."""
        if j not in self._levels:
            return np.zeros(0)
        return self._levels[j][1]

    def items(self) -> Iterator[tuple[DyadicIndex, float]]:
        for j, (ids, vals) in self._levels.items():
            lams = _unflatten(ids, j, self.dim) + 1
            for lam, v in zip(lams.tolist(), vals.tolist()):
                yield DyadicIndex(j, tuple(lam)), v

    def coefficient(self, j: int, lam) -> float:
        if j not in self._levels:
            return 0.0
        ids, vals = self._levels[j]
        flat = int(_flat_ids(np.asarray([tuple(np.atleast_1d(lam))], dtype=np.int64) - 1, j)[0])
        pos = np.searchsorted(ids, flat)
        if pos < ids.size and ids[pos] == flat:
            return float(vals[pos])
        return 0.0

    def scaled(self, c: float) -> CoefficientFunction:
        return CoefficientFunction._from_arrays(
            self.wavelet, self.dim, {j: (ids, vals * c) for j, (ids, vals) in self._levels.items()}
        )

    def restrict(self, levels: Iterable[int]) -> CoefficientFunction:
        keep = set(levels)
        return CoefficientFunction._from_arrays(
            self.wavelet, self.dim, {j: lv for j, lv in self._levels.items() if j in keep}
        )

    def __add__(self, other: CoefficientFunction) -> CoefficientFunction:
        if not isinstance(other, CoefficientFunction):
            return NotImplemented
        if other.wavelet.id != self.wavelet.id or other.dim != self.dim:
            raise ValueError("cannot add expansions over different wavelets or dimensions")
        merged = {}
        for j in set(self._levels) | set(other._levels):
            parts = [lv for lv in (self._levels.get(j), other._levels.get(j)) if lv is not None]
            ids = np.concatenate([p[0] for p in parts])
            vals = np.concatenate([p[1] for p in parts])
            uniq, inv = np.unique(ids, return_inverse=True)
            merged[j] = (uniq, np.bincount(inv, weights=vals, minlength=uniq.size))
        return CoefficientFunction._from_arrays(self.wavelet, self.dim, merged)

    def __mul__(self, c: float) -> CoefficientFunction:
        return self.scaled(float(c))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoefficientFunction):
            return NotImplemented
        if (other.wavelet.id, other.dim) != (self.wavelet.id, self.dim):
            return False
        if list(self._levels) != list(other._levels):
            return False
        return all(
            np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
            for a, b in zip(self._levels.values(), other._levels.values())
        )

    def __repr__(self) -> str:
        return (
            f"CoefficientFunction(wavelet={self.wavelet.id!r}, dim={self.dim}, "
            f"n_coeffs={len(self)}, max_level={self.max_level})"
        )

    def __call__(self, x):
        return eval_function(self, x)

    def to_json(self) -> str:
        rows = []
        for idx, v in self.items():
            lam = ", ".join(str(li) for li in idx.lam)
            rows.append(f"[{idx.j}, [{lam}], {format_float(v)}]")
        body = ",\n    ".join(rows)
        entries = f"[\n    {body}\n  ]" if rows else "[]"
        return (
            "{\n"
            f'  "wavelet": "{self.wavelet.id}",\n'
            f'  "dim": {self.dim},\n'
            f'  "entries": {entries}\n'
            "}\n"
        )

    @classmethod
    def from_json(cls, text: str | Mapping) -> CoefficientFunction:
        doc = json.loads(text) if isinstance(text, str) else text
        try:
            entries = [((int(j), tuple(lam)), float(v)) for j, lam, v in doc["entries"]]
            return cls(doc["wavelet"], int(doc["dim"]), entries)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed coefficient function document: {exc}") from exc


def _eval_point(f: CoefficientFunction, point: list[float]) -> float:
    if f._lookup is None:
        f._lookup = [
            (j, 1 << j, 2.0 ** (f.dim * j / 2.0), dict(zip(ids.tolist(), vals.tolist())))
            for j, (ids, vals) in f._levels.items()
        ]
    haar = f.wavelet.is_haar
    total = 0.0
    for j, n, scale, table in f._lookup:
        flat = 0
        cells = []
        for xi in point:
            c = min(max(int(xi * n), 0), n - 1)
            cells.append(c)
            flat = flat * n + c
        c_val = table.get(flat)
        if c_val is None:
            continue
        if haar:
            total += c_val * scale
        else:
            u = np.array([xi * n - c for xi, c in zip(point, cells)])
            total += c_val * scale * float(np.prod(f.wavelet.shape(u)))
    return total


def eval_function(f: CoefficientFunction, x):
    """Synthesis sum at ``x``; each stored level contributes at most one term."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim <= 1 and arr.size == f.dim:
        point = arr.reshape(-1).tolist()
        if any(not 0.0 <= v <= 1.0 for v in point):
            raise ValueError("evaluation points must lie in [0, 1]^d")
        return _eval_point(f, point)
    pts, single = _as_points(x, f.dim)
    if np.any((pts < 0.0) | (pts > 1.0)):
        raise ValueError("evaluation points must lie in [0, 1]^d")
    out = np.zeros(pts.shape[0])
    for j, (ids, vals) in f._levels.items():
        cells = cell_index(pts, j)
        flat = _flat_ids(cells, j)
        pos = np.minimum(np.searchsorted(ids, flat), ids.size - 1)
        hit = ids[pos] == flat
        if not np.any(hit):
            continue
        scale = 2.0 ** (f.dim * j / 2.0)
        out[hit] += vals[pos[hit]] * scale * _dilated_values(f.wavelet, j, cells[hit], pts[hit])
    return float(out[0]) if single else out


def haar_analyze(samples, J: int, dim: int | None = None) -> CoefficientFunction:
    """Haar coefficients ``<f, phi_{j,lam}>`` for all ``j <= J`` of a piecewise-constant input.

    ``samples`` holds the values on the ``2**(d*J)`` level-``J`` cells, either
    as a d-dimensional array of side ``2**J`` or flat in row-major order
    together with ``dim``.  Synthesis from the level-``J`` coefficients alone
    (``restrict([J])``) reproduces the input.
    """
    arr = np.asarray(samples, dtype=float)
    if J < 0:
        raise ValueError("J must be nonnegative")
    n = 1 << J
    if arr.ndim > 1:
        d = arr.ndim
        if arr.shape != (n,) * d:
            raise ValueError(f"expected shape {(n,) * d}, got {arr.shape}")
    else:
        d = 1 if dim is None else int(dim)
        if arr.size != n**d:
            raise ValueError(
                f"sample count {arr.size} is not 2^(d*J) = {n**d} for d={d}, J={J}"
            )
        arr = arr.reshape((n,) * d)
    levels = {}
    for j in range(J + 1):
        m = 1 << j
        blocks = arr.reshape(sum(((m, n // m) for _ in range(d)), ()))
        means = blocks.mean(axis=tuple(range(1, 2 * d, 2)))
        # <f, phi_{j,lam}> = 2^{dj/2} * |cell| * mean = 2^{-dj/2} * mean
        coeffs = means.reshape(-1) * 2.0 ** (-d * j / 2.0)
        levels[j] = (np.arange(coeffs.size, dtype=np.int64), coeffs)
    return CoefficientFunction._from_arrays(HAAR, d, levels)
