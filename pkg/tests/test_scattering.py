"""Tests for the closed-form barrier scattering data.

The eigenvalue fixture below was frozen from an independent 40-digit
bisection oracle (mpmath) on s*cos(s/h) + eta*sin(s/h) = 0, cross-checked
by |alpha(i eta)| < 1e-30 at every root.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsbarrier.scattering import (
    BarrierParams,
    admissible_h,
    density,
    eigenvalues,
    reflection_coefficient,
    reflection_semiclassical,
    root_cut_outside,
    root_cut_spike,
    transfer_coefficients,
    X_eval,
)

# frozen oracle: A = 2, h = 2/(10 pi); etas ascending
ETAS_A2_K10 = np.array([
    0.56592044928092999999,
    0.997908772118982902,
    1.2714170295410563745,
    1.4731501027074912863,
    1.6288144602391735938,
    1.7502231400704657283,
    1.8438743739825394408,
    1.9136807232685299399,
    1.9620852291022328009,
    1.9905862200914402044,
])

# max_k |sqrt(A^2-eta_k^2) - h k pi| from the same oracle, halving with h
DEV_ORACLE = {10: 0.081736711, 20: 0.043359795, 40: 0.02260486}


@pytest.fixture(scope="module")
def p10():
    return admissible_h(2.0, 10)


class TestParams:
    def test_lattice_values(self):
        assert admissible_h(np.pi, 1).h == pytest.approx(1.0, abs=1e-15)
        assert admissible_h(2.0, 10).h == pytest.approx(1 / (5 * np.pi), abs=1e-15)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            admissible_h(2.0, 0)
        with pytest.raises(ValueError):
            admissible_h(-1.0, 3)
        with pytest.raises(ValueError):
            BarrierParams(A=2.0, h=0.1, k_index=10)  # off the lattice


class TestTransferCoefficients:
    def test_origin_is_unimodular(self, p10):
        # at lambda=0 on the lattice: alpha = cos(k pi) = ±1, beta = 0
        a, b = transfer_coefficients(0.0, p10)
        assert a == pytest.approx((-1.0) ** p10.k_index, abs=1e-14)
        assert abs(b) < 1e-14

    def test_unitarity_on_real_grid(self, p10):
        lam = np.linspace(-8, 8, 2001)
        a, b = transfer_coefficients(lam, p10)
        assert np.max(np.abs(np.abs(a) ** 2 + np.abs(b) ** 2 - 1)) < 1e-12

    def test_value_at_iA(self, p10):
        # entire continuation through s = 0: beta(iA) = -(A/h) e^{-A/h}
        _, b = transfer_coefficients(1j * p10.A, p10)
        expect = -(p10.A / p10.h) * np.exp(-p10.A / p10.h)
        assert b == pytest.approx(expect, rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-20, 20), st.integers(1, 12))
    def test_unitarity_property(self, lam, k):
        p = admissible_h(2.0, k)
        a, b = transfer_coefficients(lam, p)
        assert abs(abs(a) ** 2 + abs(b) ** 2 - 1) < 1e-11


class TestReflection:
    def test_vanishes_at_origin(self, p10):
        assert abs(reflection_coefficient(0.0, p10)) < 1e-14

    def test_matches_ratio_on_real_axis(self, p10):
        lam = np.linspace(-8, 8, 2001)
        a, b = transfer_coefficients(lam, p10)
        r = reflection_coefficient(lam, p10)
        assert np.max(np.abs(r - b / a)) < 1e-12

    def test_limit_at_iA(self, p10):
        # cot(s/h)*s -> h as s -> 0, so r(iA) = -A/(h+A)
        r = reflection_coefficient(1j * p10.A, p10)
        assert r == pytest.approx(-p10.A / (p10.h + p10.A), rel=1e-10)

    def test_semiclassical_form_off_the_spike(self):
        # where Im s > 0 the exact r approaches -iA/(s+lambda) exponentially;
        # on the spike itself it keeps oscillating in h (no pointwise limit)
        lam = 0.5 + 0.5j
        errs = []
        for k in (10, 20, 40):
            p = admissible_h(2.0, k)
            errs.append(
                abs(reflection_coefficient(lam, p) - reflection_semiclassical(lam, p))
            )
        assert errs[2] < errs[0]
        assert errs[2] < 1e-3


class TestEigenvalues:
    def test_frozen_fixture(self, p10):
        ev = eigenvalues(p10)
        assert len(ev.etas) == 10
        np.testing.assert_allclose(ev.etas, ETAS_A2_K10, atol=1e-12)

    def test_count_equals_lattice_index(self):
        for k in (3, 7, 15):
            ev = eigenvalues(admissible_h(2.0, k))
            assert len(ev.etas) == k
            assert np.all(ev.etas > 0) and np.all(ev.etas < 2.0)

    def test_roots_kill_alpha(self, p10):
        # the defining property: alpha vanishes at i eta_k
        ev = eigenvalues(p10)
        a, _ = transfer_coefficients(1j * ev.etas, p10)
        assert np.max(np.abs(a)) < 1e-12

    def test_tangent_residual(self, p10):
        ev = eigenvalues(p10)
        s = ev.s_values
        res = np.abs(np.tan(s / p10.h) + s / ev.etas)
        assert np.max(res) < 1e-10

    def test_lattice_deviation_halves(self):
        for k, expect in DEV_ORACLE.items():
            p = admissible_h(2.0, k)
            ev = eigenvalues(p)
            ks = np.arange(1, k + 1)
            s_asc = np.sort(ev.s_values)
            dev = np.max(np.abs(s_asc - p.h * ks * np.pi))
            assert dev == pytest.approx(expect, rel=1e-6)
        assert DEV_ORACLE[20] < DEV_ORACLE[10]
        assert DEV_ORACLE[40] < DEV_ORACLE[20]


class TestDensityAndX:
    def test_density_on_spike(self, p10):
        eta = np.linspace(0.1, 1.9, 7)
        rho = density(1j * eta, p10)
        expect = 1j * eta / (np.pi * np.sqrt(p10.A**2 - eta**2))
        np.testing.assert_allclose(rho, expect, atol=1e-14)
        assert np.all(rho.imag > 0)
        assert np.max(np.abs(rho.real)) < 1e-14

    def test_density_mass(self, p10):
        # int_0^A eta/(pi sqrt(A^2-eta^2)) d eta = A/pi, antiderivative
        # -sqrt(A^2-eta^2)/pi; quadrature cross-check
        from scipy.integrate import quad

        val, _ = quad(
            lambda e: e / (np.pi * np.sqrt(p10.A**2 - e**2)), 0, p10.A, points=[p10.A]
        )
        assert val == pytest.approx(p10.A / np.pi, rel=1e-9)

    def test_X_on_spike_and_pairing(self, p10):
        assert X_eval(0.0, p10) == pytest.approx(-p10.A, abs=1e-14)
        assert abs(X_eval(1j * p10.A, p10)) < 1e-7
        lam = np.array([0.3 + 0.2j, -1.0 + 0.7j, 1j * 0.5, 2.0])
        np.testing.assert_allclose(
            X_eval(lam, p10) * density(lam, p10), -lam / np.pi, atol=1e-12
        )

    def test_X_at_eigenvalues_near_lattice(self, p10):
        ev = eigenvalues(p10)
        X = X_eval(1j * ev.etas, p10).real  # descending in eta
        ks = np.arange(p10.k_index, 0, -1)  # eta ascending <-> s descending
        assert np.max(np.abs(-X - p10.h * ks * np.pi)) < (np.pi / 2) * p10.h


class TestBranches:
    def test_two_roots_agree_off_axis_disagree_on_spike_sides(self):
        A = 2.0
        # principal root keeps Re >= 0, exterior root tracks lambda: equal on
        # the right half plane, negatives on the left
        lam = np.array([3.0 + 1j, 0.1 + 1.5j, 2.0 - 0.7j])
        np.testing.assert_allclose(
            root_cut_outside(A, lam), root_cut_spike(A, lam), atol=1e-12
        )
        np.testing.assert_allclose(
            root_cut_outside(A, -lam), -root_cut_spike(A, -lam), atol=1e-12
        )
        # across the spike the exterior branch jumps sign, the other does not
        eta = 1.0
        left = root_cut_spike(A, -1e-9 + 1j * eta)
        right = root_cut_spike(A, 1e-9 + 1j * eta)
        assert abs(left + right) < 1e-6
        assert abs(root_cut_outside(A, 1e-9 + 1j * eta) - np.sqrt(A**2 - eta**2)) < 1e-6

    def test_exterior_branch_asymptote(self):
        lam = 1e6 * np.exp(1j * np.linspace(0.1, 2 * np.pi - 0.1, 9))
        np.testing.assert_allclose(root_cut_spike(2.0, lam) / lam, 1.0, atol=1e-10)
