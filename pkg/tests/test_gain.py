import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsvmodes.gain import bogolyubov, gain_scan, renormalized_eigenvalues, schmidt_number, write_gain_scan

weights = st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=2, max_size=30).map(
    lambda v: np.array(v) / np.sum(v)
)


class TestBogolyubov:
    def test_coefficients(self):
        state = bogolyubov(np.array([0.25, 0.04]), 2.0)
        assert np.allclose(state.r, [1.0, 0.4])
        assert np.allclose(state.cosh_r**2 - state.sinh_r**2, 1.0)
        assert state.mean_photons[0] == pytest.approx(math.sinh(1.0) ** 2)
        assert state.total_photons == pytest.approx(math.sinh(1.0) ** 2 + math.sinh(0.4) ** 2)

    def test_negative_gain(self):
        with pytest.raises(ValueError):
            bogolyubov(np.array([1.0]), -0.1)

    def test_accepts_modes(self, small_modes):
        state = bogolyubov(small_modes, 1.0)
        assert np.allclose(state.lam, small_modes.lam)


class TestRenormalized:
    def test_low_gain_limit(self):
        # [TRIVIAL] stated low-gain limit
        assert np.allclose(renormalized_eigenvalues(np.array([0.6, 0.4]), 1e-6), [0.6, 0.4], rtol=0, atol=1e-9)

    def test_zero_gain(self):
        lam = np.array([0.5, 0.3, 0.1])
        assert np.allclose(renormalized_eigenvalues(lam, 0.0), lam / lam.sum())

    def test_direct_formula(self):
        # [DERIVED] sinh^2(G sqrt(lambda)) / sum, evaluated directly where it does not overflow
        lam = np.array([0.3, 0.2, 0.1, 0.05])
        for G in (1e-3, 0.5, 3.0, 20.0):
            direct = np.sinh(G * np.sqrt(lam)) ** 2
            assert np.allclose(renormalized_eigenvalues(lam, G), direct / direct.sum(), rtol=1e-12)

    def test_branch_continuity(self):
        lam = np.array([0.5, 0.3, 0.2])
        G = 1e-4 / math.sqrt(0.5)
        lo = renormalized_eigenvalues(lam, G * (1 - 1e-9))
        hi = renormalized_eigenvalues(lam, G * (1 + 1e-9))
        assert np.allclose(lo, hi, rtol=1e-9)

    def test_no_overflow_at_huge_gain(self):
        lam = np.array([0.4, 0.4, 0.2])
        w = renormalized_eigenvalues(lam, 1e5)
        assert np.all(np.isfinite(w))
        assert np.allclose(w, [0.5, 0.5, 0.0], atol=1e-12)

    def test_negative_gain(self):
        with pytest.raises(ValueError):
            renormalized_eigenvalues(np.array([1.0]), -1.0)

    @settings(max_examples=50, deadline=None)
    @given(weights, st.floats(min_value=0.0, max_value=20.0), st.floats(min_value=0.0, max_value=20.0))
    def test_schmidt_number_non_increasing(self, lam, g1, g2):
        lo, hi = sorted((g1, g2))
        k_lo = schmidt_number(renormalized_eigenvalues(lam, lo))
        k_hi = schmidt_number(renormalized_eigenvalues(lam, hi))
        assert k_hi <= k_lo * (1 + 1e-12)


class TestSchmidtNumber:
    def test_uniform(self):
        assert schmidt_number(np.full(8, 0.125)) == pytest.approx(8.0)

    def test_single(self):
        assert schmidt_number(np.array([1.0])) == 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            schmidt_number(np.array([]))

    def test_low_gain_equals_biphoton(self, small_modes):
        lam = small_modes.lam
        k0 = 1.0 / np.sum((lam / lam.sum()) ** 2)
        assert schmidt_number(renormalized_eigenvalues(small_modes, 1e-6)) == pytest.approx(k0, abs=1e-6)

    def test_high_gain_reduces_modes(self, small_modes):
        k0 = schmidt_number(renormalized_eigenvalues(small_modes, 0.0))
        k3 = schmidt_number(renormalized_eigenvalues(small_modes, 3.0))
        assert k3 < k0


class TestGainScan:
    def test_rows_and_csv(self, tmp_path):
        lam = np.array([0.5, 0.3, 0.2])
        rows = gain_scan(lam, [0.1, 1.0, 5.0])
        assert [r.G for r in rows] == [0.1, 1.0, 5.0]
        assert rows[0].K >= rows[1].K >= rows[2].K
        path = tmp_path / "scan.csv"
        write_gain_scan(rows, path, ["hdr"], {"width": np.array([1.0, 2.0, 3.0])})
        lines = path.read_text().splitlines()
        assert lines[:2] == ["# hdr", "G,K,width,total_photons"]
        assert len(lines) == 5

    def test_single_step(self):
        assert len(gain_scan(np.array([1.0]), [2.0])) == 1

    @pytest.mark.parametrize("G_list", [[], [-1.0]])
    def test_invalid(self, G_list):
        with pytest.raises(ValueError):
            gain_scan(np.array([1.0]), G_list)
