import itertools
import math

import numpy as np
import pytest
from scipy import optimize, special

from tipcouple.modes import (GuidedMode, ModeLabel, cutoff_v, mode_power, mode_profile, overlap,
                             overlap_matrix, solve_modes, v_number)

N_SIO2, LAM = 1.457, 0.620
NA = math.sqrt(N_SIO2**2 - 1)


def radius_for_v(v):
    return v * LAM / (2 * math.pi * NA)


def cutoff_oracle(family, nu, m, n1=N_SIO2, n2=1.0):
    """Cutoff V from Bessel zeros, written independently of the solver."""
    if family in ("TE", "TM"):
        return special.jn_zeros(0, m)[-1]
    if family == "EH":
        return special.jn_zeros(nu, m)[-1]
    if nu == 1:
        return 0.0 if m == 1 else special.jn_zeros(1, m - 1)[-1]
    f = lambda v: (n1**2 / n2**2 + 1) * special.jv(nu - 1, v) - v / (nu - 1) * special.jv(nu, v)
    v = np.linspace(0.5, 12, 23001)
    s = np.sign(f(v))
    crossings = np.nonzero(s[:-1] != s[1:])[0]
    if len(crossings) < m:
        return math.inf  # far above any V probed here
    i = crossings[m - 1]
    return optimize.brentq(f, v[i], v[i + 1])


def expected_families(v):
    """Family labels guided below ``v`` according to the cutoff oracle."""
    out = set()
    for fam, nu, m in itertools.product(("HE", "EH", "TE", "TM"), range(0, 8), range(1, 4)):
        if (fam in ("TE", "TM")) != (nu == 0):
            continue
        if cutoff_oracle(fam, nu, m) < v:
            out.add(f"{fam}{nu}{m}")
    return out


@pytest.fixture(scope="module")
def p2_modes():
    return solve_modes(0.43, N_SIO2, 1.0, LAM)


class TestVNumber:
    def test_examples(self):
        assert v_number(0.2, N_SIO2, 1.0, LAM) == pytest.approx(2 * math.pi * 0.2 / LAM * NA)
        assert v_number(0.2, N_SIO2, 1.0, LAM) == pytest.approx(2.148, abs=1e-3)
        assert v_number(0.43, N_SIO2, 1.0, LAM) == pytest.approx(4.617, abs=1e-3)

    def test_vanishes_with_radius(self):
        assert v_number(1e-9, N_SIO2, 1.0, LAM) < 1e-7

    def test_rejects_equal_indices(self):
        with pytest.raises(ValueError):
            v_number(0.3, 1.4, 1.4, LAM)
        with pytest.raises(ValueError):
            solve_modes(0.3, 1.4, 1.4, LAM)


class TestSolve:
    def test_single_mode_tip(self):
        modes = solve_modes(0.2, N_SIO2, 1.0, LAM)
        assert [str(m.label) for m in modes] == ["HE11a", "HE11b"]

    def test_p2_mode_set(self, p2_modes):
        found = {f"{m.label.family}{m.label.nu}{m.label.m}" for m in p2_modes}
        assert found == expected_families(v_number(0.43, N_SIO2, 1.0, LAM))
        assert found == {"HE11", "TE01", "TM01", "HE21", "EH11", "HE31", "HE12"}

    def test_cutoffs_match_oracle(self):
        for fam, nu, m in (("TE", 0, 1), ("EH", 1, 1), ("HE", 1, 2), ("HE", 2, 1), ("HE", 3, 1)):
            assert cutoff_v(fam, nu, m, N_SIO2, 1.0) == pytest.approx(
                cutoff_oracle(fam, nu, m), abs=1e-6)

    def test_finer_scan_agrees(self, p2_modes):
        fine = solve_modes(0.43, N_SIO2, 1.0, LAM, points=20000)
        assert [m.label for m in fine] == [m.label for m in p2_modes]
        for a, b in zip(fine, p2_modes):
            assert a.n_eff == pytest.approx(b.n_eff, abs=1e-9)

    def test_invariants(self, p2_modes):
        v = v_number(0.43, N_SIO2, 1.0, LAM)
        for m in p2_modes:
            assert 1.0 < m.n_eff < N_SIO2
            assert m.u**2 + m.w**2 == pytest.approx(v**2, abs=1e-8)
            assert m.normalization_power > 0
        n = [m.n_eff for m in p2_modes]
        assert n == sorted(n, reverse=True)
        assert p2_modes[0].label.family == "HE" and p2_modes[0].label.nu == 1

    def test_degenerate_pairs_listed(self, p2_modes):
        for m in p2_modes:
            if m.label.nu >= 1:
                twins = [o for o in p2_modes if o.label.family == m.label.family
                         and o.label.nu == m.label.nu and o.label.m == m.label.m]
                assert sorted(o.label.polarization for o in twins) == [0, 1]

    def test_te01_cutoff_crossing(self):
        vc = special.jn_zeros(0, 1)[0]
        def has_te01(v):
            return any(m.label.family == "TE" for m in solve_modes(radius_for_v(v), N_SIO2, 1.0, LAM))
        assert not has_te01(vc - 0.01)
        assert has_te01(vc + 0.01)

    def test_n_eff_monotone_in_radius(self):
        radii = np.linspace(0.36, 0.5, 15)
        series = {}
        for a in radii:
            for m in solve_modes(a, N_SIO2, 1.0, LAM):
                series.setdefault(m.label, []).append((a, m.n_eff))
        for label in (ModeLabel("HE", 1, 1, 0), ModeLabel("TE", 0, 1), ModeLabel("HE", 2, 1, 0)):
            values = [n for _, n in series[label]]
            assert np.all(np.diff(values) > 0)

    def test_te_with_nonzero_order_rejected(self):
        with pytest.raises(ValueError):
            ModeLabel("TE", 1, 1)


class TestProfile:
    def test_tangential_continuity(self, p2_modes):
        for mode in p2_modes:
            a = mode.guide.radius
            inside = mode.radial(a * (1 - 1e-13))
            outside = mode.radial(a * (1 + 1e-13))
            # Etheta, Htheta, Ez, Hz are tangential to the interface
            for k in (1, 3, 4, 5):
                scale = max(abs(inside[k]), 1e-300)
                if abs(inside[k]) < 1e-12:
                    assert abs(outside[k]) < 1e-9
                else:
                    assert abs(outside[k] - inside[k]) / scale < 1e-9

    def test_on_axis_values(self, p2_modes):
        he11 = next(m for m in p2_modes if str(m.label) == "HE11a")
        te01 = next(m for m in p2_modes if m.label.family == "TE")
        E, _ = mode_profile(he11, 0.0, 0.0)
        assert abs(E[0]) + abs(E[1]) > 1e-3
        E, _ = mode_profile(te01, 0.0, 0.0)
        assert abs(E[0]) + abs(E[1]) < 1e-12

    def test_exponential_decay(self, p2_modes):
        for mode in p2_modes:
            a, nu, w = mode.guide.radius, mode.label.nu, mode.w
            ez2, ez3 = (abs(mode.radial(k * a)[4]) for k in (2, 3))
            if ez2 < 1e-12:
                continue  # TE modes have no Ez
            # exact K-function ratio, and its large-argument asymptote
            assert ez3 / ez2 == pytest.approx(special.kv(nu, 3 * w) / special.kv(nu, 2 * w),
                                              rel=1e-9)
            asym = math.sqrt(2 / 3) * math.exp(-w)
            assert ez3 / ez2 == pytest.approx(asym, rel=0.5 if nu > 1 else 0.2)

    def test_power_scales_quadratically(self, p2_modes):
        m = p2_modes[0]
        doubled = GuidedMode(m.label, m.guide, m.n_eff, m.u, m.w, 2 * m.a_coef, 2 * m.b_coef)
        assert mode_power(doubled)[0] == pytest.approx(4 * mode_power(m)[0], rel=1e-9)

    def test_core_fraction_of_fundamental(self, p2_modes):
        assert 0.8 < p2_modes[0].core_fraction < 1.0

    def test_orthogonality(self, p2_modes):
        m = np.abs(overlap_matrix(p2_modes))
        np.testing.assert_allclose(np.diag(m), 1.0, atol=1e-6)
        assert np.max(m - np.diag(np.diag(m))) < 1e-6

    def test_pairwise_overlap_matches_matrix(self, p2_modes):
        a, b = p2_modes[0], p2_modes[2]
        assert overlap(a, a) / a.normalization_power == pytest.approx(1.0, abs=1e-6)
        assert abs(overlap(a, b)) < 1e-6
