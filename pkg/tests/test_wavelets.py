import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from besovbandit.wavelets import (
    HAAR,
    SMOOTH_BUMP,
    TENT_BUMP,
    CoefficientFunction,
    DyadicIndex,
    eval_dilated,
    eval_father,
    eval_function,
    format_float,
    get_wavelet,
    haar_analyze,
)

WAVELETS = [HAAR, TENT_BUMP, SMOOTH_BUMP]


class TestFather:
    def test_haar_inside_and_outside(self):
        assert eval_father(HAAR, [0.3]) == 1.0
        assert eval_father(HAAR, [1.7]) == 0.0

    def test_tent_midpoint_is_peak(self):
        assert eval_father(TENT_BUMP, [0.5]) == TENT_BUMP.peak_value

    def test_smooth_midpoint_is_peak(self):
        assert eval_father(SMOOTH_BUMP, [0.5]) == SMOOTH_BUMP.peak_value

    @pytest.mark.parametrize("w", WAVELETS, ids=lambda w: w.id)
    def test_l2_constant_matches_quadrature(self, w):
        val, _ = integrate.quad(lambda u: float(w.shape(np.array([u]))[0]) ** 2, 0, 1, points=[0.5], limit=200)
        assert val == pytest.approx(w.l2_sq, abs=1e-12)

    def test_unknown_wavelet(self):
        with pytest.raises(ValueError, match="unknown wavelet"):
            get_wavelet("mexican-hat")


class TestDilated:
    def test_haar_examples(self):
        assert eval_dilated(HAAR, DyadicIndex(1, (1,)), [0.25]) == pytest.approx(math.sqrt(2), abs=1e-15)
        assert eval_dilated(HAAR, DyadicIndex(1, (1,)), [0.75]) == 0.0
        assert eval_dilated(HAAR, DyadicIndex(2, (3,)), [0.6]) == 2.0

    def test_haar_right_endpoint_belongs_to_last_cell(self):
        assert eval_dilated(HAAR, DyadicIndex(2, (4,)), [1.0]) == 2.0
        assert eval_dilated(HAAR, DyadicIndex(2, (3,)), [0.75]) == 0.0
        assert eval_dilated(HAAR, DyadicIndex(2, (4,)), [0.75]) == 2.0

    def test_index_validation(self):
        with pytest.raises(ValueError):
            DyadicIndex(2, (5,))
        with pytest.raises(ValueError):
            DyadicIndex(1, (0,))
        with pytest.raises(ValueError):
            DyadicIndex(-1, (1,))

    @pytest.mark.parametrize("w", WAVELETS, ids=lambda w: w.id)
    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("j", [0, 1, 3])
    def test_disjoint_support(self, w, d, j):
        rng = np.random.default_rng(1000 * d + j)
        x = rng.random((10_000, d))
        n = 1 << j
        lams = rng.integers(1, n + 1, size=(6, d))
        for a in lams:
            for b in lams:
                if tuple(a) == tuple(b):
                    continue
                va = eval_dilated(w, DyadicIndex(j, tuple(a)), x)
                vb = eval_dilated(w, DyadicIndex(j, tuple(b)), x)
                assert np.all(va * vb == 0.0)

    @pytest.mark.parametrize("w", WAVELETS, ids=lambda w: w.id)
    @pytest.mark.parametrize("j,lam", [(0, 1), (2, 3), (5, 17)])
    def test_normalization_1d(self, w, j, lam):
        idx = DyadicIndex(j, (lam,))
        lo, hi = idx.cell()
        val, _ = integrate.quad(
            lambda x: float(eval_dilated(w, idx, [x])) ** 2, lo[0], hi[0],
            points=[idx.center()[0]], limit=200, epsabs=1e-13, epsrel=1e-13,
        )
        assert val == pytest.approx(w.l2_sq, abs=1e-9)

    @pytest.mark.parametrize("w", WAVELETS, ids=lambda w: w.id)
    def test_normalization_2d(self, w):
        idx = DyadicIndex(2, (2, 4))
        lo, hi = idx.cell()
        c = idx.center()

        def g(y, x):
            return float(eval_dilated(w, idx, [x, y])) ** 2

        # integrate each quadrant separately so kinks sit on the boundary
        total = 0.0
        for xa, xb in ((lo[0], c[0]), (c[0], hi[0])):
            for ya, yb in ((lo[1], c[1]), (c[1], hi[1])):
                v, _ = integrate.dblquad(g, xa, xb, ya, yb, epsabs=1e-13, epsrel=1e-13)
                total += v
        assert total == pytest.approx(w.l2_norm_sq(2), abs=1e-9)

    @pytest.mark.parametrize("w", WAVELETS, ids=lambda w: w.id)
    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("j", [0, 1, 4])
    def test_scaling_law_at_center(self, w, d, j):
        idx = DyadicIndex(j, tuple([1 + (j % 2)] * d) if j else (1,) * d)
        peak = eval_dilated(w, idx, idx.center())
        assert peak == 2.0 ** (d * j / 2) * w.peak_value

    @pytest.mark.parametrize("w", WAVELETS, ids=lambda w: w.id)
    def test_sup_on_dense_grid(self, w):
        idx = DyadicIndex(3, (5,))
        x = np.linspace(0, 1, 100_001)
        assert np.max(eval_dilated(w, idx, x[:, None])) <= 2.0 ** 1.5 * w.peak_value + 1e-15


class TestCoefficientFunction:
    def test_zero_function(self):
        f = CoefficientFunction(HAAR, 1)
        assert f.is_zero()
        assert f(np.array([0.3])) == 0.0
        assert f.max_level == -1

    def test_single_coefficient(self):
        f = CoefficientFunction(HAAR, 2, {(3, (2, 7)): 0.7})
        x = DyadicIndex(3, (2, 7)).center()
        assert f(x) == pytest.approx(0.7 * 2.0**3, abs=1e-15)

    def test_two_level_sum_matches_brute_force(self):
        coeffs = {(1, (1,)): 0.5, (2, (2,)): -1.25}
        f = CoefficientFunction(TENT_BUMP, 1, coeffs)
        for x in (0.3, 0.37, 0.26, 0.49):
            expected = sum(c * eval_dilated(TENT_BUMP, DyadicIndex(j, lam), [x]) for (j, lam), c in coeffs.items())
            assert f([x]) == pytest.approx(expected, abs=1e-15)

    def test_vectorized_equals_scalar(self):
        rng = np.random.default_rng(3)
        coeffs = {(j, tuple(rng.integers(1, 2**j + 1, size=2))): rng.normal() for j in range(5) for _ in range(3)}
        for w in WAVELETS:
            f = CoefficientFunction(w, 2, coeffs)
            x = rng.random((200, 2))
            vec = f(x)
            scal = np.array([f(p) for p in x])
            np.testing.assert_allclose(vec, scal, rtol=0, atol=1e-13)

    def test_outside_domain_rejected(self):
        f = CoefficientFunction(HAAR, 1, {(0, (1,)): 1.0})
        with pytest.raises(ValueError):
            f([1.5])
        with pytest.raises(ValueError):
            f(np.array([[0.2], [-0.1]]))

    def test_arithmetic(self):
        f = CoefficientFunction(HAAR, 1, {(1, (1,)): 1.0, (2, (4,)): 2.0})
        g = CoefficientFunction(HAAR, 1, {(1, (1,)): -1.0})
        h = f + g
        assert h.coefficient(1, (1,)) == 0.0
        assert len(h) == 1
        assert (2 * f).coefficient(2, (4,)) == 4.0
        assert f.scaled(0.0).is_zero()
        assert f.restrict([2]).levels == [2]

    def test_json_round_trip_is_exact(self):
        rng = np.random.default_rng(11)
        coeffs = {(j, (int(rng.integers(1, 2**j + 1)),)): float(rng.normal()) / 3 for j in range(6)}
        f = CoefficientFunction(SMOOTH_BUMP, 1, coeffs)
        text = f.to_json()
        doc = json.loads(text)
        assert doc["wavelet"] == "smooth-bump" and doc["dim"] == 1
        assert CoefficientFunction.from_json(text) == f

    def test_json_malformed(self):
        with pytest.raises(ValueError):
            CoefficientFunction.from_json('{"wavelet": "haar", "dim": 1}')

    def test_format_float_round_trips(self):
        for v in (0.1, 1 / 3, math.pi, 1e-300, -2.5e17):
            assert float(format_float(v)) == v


class TestHaarAnalyze:
    def test_constant_one(self):
        f = haar_analyze([1.0], 0)
        assert f.coefficient(0, (1,)) == 1.0

    def test_zero_samples(self):
        f = haar_analyze(np.zeros(8), 3)
        assert f.is_zero()

    def test_two_cell_example_against_integral(self):
        f = haar_analyze([2.0, 0.0], 1)
        brute, _ = integrate.quad(
            lambda x: (2.0 if x < 0.5 else 0.0) * float(eval_dilated(HAAR, DyadicIndex(1, (1,)), [x])),
            0, 1, points=[0.5],
        )
        assert f.coefficient(1, (1,)) == pytest.approx(brute, abs=1e-12)
        assert f.coefficient(1, (1,)) == pytest.approx(math.sqrt(2), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        J=st.integers(0, 5),
        d=st.integers(1, 2),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_round_trip(self, J, d, seed):
        n = 1 << J
        samples = np.random.default_rng(seed).normal(size=(n,) * d)
        f = haar_analyze(samples, J)
        axis = (np.arange(n) + 0.5) / n
        mid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        back = f.restrict([J])(mid)
        np.testing.assert_allclose(back, samples.reshape(-1), rtol=0, atol=1e-12)

    def test_flat_input_with_dim(self):
        samples = np.arange(16.0)
        a = haar_analyze(samples, 2, dim=2)
        b = haar_analyze(samples.reshape(4, 4), 2)
        assert a == b

    def test_bad_sample_count(self):
        with pytest.raises(ValueError):
            haar_analyze(np.zeros(6), 2)
