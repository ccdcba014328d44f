"""Shared checks used by unit and acceptance tests."""

import math

import numpy as np

from besovbandit.besov import BesovParams, besov_norm
from besovbandit.instances import ThetaFamily

FAMILY_GRID = [
    (j, d, p, d / p + off)
    for j in range(7)
    for d in (1, 2)
    for p in (1.0, 2.0, math.inf)
    for off in (0.25, 0.75)
]


def max_pairwise_overlap(lo: np.ndarray, hi: np.ndarray, chunk: int = 256) -> float:
    """Largest intersection volume over distinct pairs of boxes."""
    n = lo.shape[0]
    worst = 0.0
    for start in range(0, n, chunk):
        a_lo, a_hi = lo[start : start + chunk, None, :], hi[start : start + chunk, None, :]
        side = np.minimum(a_hi, hi[None]) - np.maximum(a_lo, lo[None])
        vol = np.prod(np.maximum(side, 0.0), axis=2)
        rows = np.arange(start, min(start + chunk, n))
        vol[rows - start, rows] = 0.0
        worst = max(worst, float(vol.max()))
    return worst


def family_violations(fam: ThetaFamily) -> list[str]:
    """Check cardinality, disjointness, peak and norm of one family."""
    bp: BesovParams = fam.bp
    d, j = bp.dim, fam.level
    out = []
    if fam.size != 2 ** (d * j) or len(fam.lambdas()) != 2 ** (d * j):
        out.append(f"count {fam.size}")
    if len({tuple(r) for r in fam.lambdas().tolist()}) != fam.size:
        out.append("duplicate lambdas")
    lo, hi = fam.support_boxes()
    if max_pairwise_overlap(lo, hi) != 0.0:
        out.append("overlapping supports")
    expected_peak = bp.L * fam.wavelet.peak_value * 2.0 ** (j * (d * bp.inv_p - bp.sigma))
    rng = np.random.default_rng(j * 100 + d)
    picks = rng.integers(0, fam.size, size=min(fam.size, 16))
    for flat in picks.tolist():
        member = fam.member_by_flat(flat)
        lam = fam.lambda_of(flat)
        sup = member(fam.peak_location(lam))
        if abs(sup - expected_peak) > 1e-12:
            out.append(f"sup {sup} != {expected_peak}")
        norm = besov_norm(member, bp)
        if abs(norm - bp.L) > 1e-12:
            out.append(f"norm {norm} != {bp.L}")
    return out
