import numpy as np
import pytest

import wwm
from wwm.state import SlitState
from wwm.transfer import fine_momentum_amplitudes
from conftest import S, random_complete_scheme


# --- classical transfer ---------------------------------------------------


def test_classical_transfer_single_and_pair(kick_pair):
    single = wwm.builtin("kicks", kicks=[(1.0, 2.0)])
    dist = wwm.classical_transfer(single)
    assert dist.atoms == [(2.0, 1.0)]
    dist = wwm.classical_transfer(kick_pair)
    assert len(dist.atoms) == 2
    assert dist.atoms[0] == pytest.approx((-np.pi / 2, 0.5))
    assert dist.atoms[1] == pytest.approx((np.pi / 2, 0.5))


def test_classical_transfer_rejects_non_kick(sign):
    with pytest.raises(wwm.SchemeError):
        wwm.classical_transfer(sign)


# --- characteristic function ----------------------------------------------


def test_chi_identity_is_one(identity, state_a50):
    chi = wwm.char_fn(identity, state_a50)
    assert np.max(np.abs(chi.values - 1.0)) < 1e-12


def test_chi_single_kick_closed_form(narrow):
    k0 = 2.0
    sch = wwm.builtin("kicks", kicks=[(1.0, k0)])
    qs = np.linspace(-4, 4, 257)
    chi = wwm.char_fn(sch, narrow, qs=qs)
    assert np.max(np.abs(chi.values - np.exp(1j * k0 * qs))) < 1e-12
    # the symmetric Re form would give cos(k0 q) instead
    assert np.max(np.abs(wwm.phi_symmetric(sch, narrow, qs) - np.cos(k0 * qs))) < 1e-12


def test_chi_sign_gaussian_matches_cumulative_oracle(grid, state_a50, sign):
    # continuum oracle: chi(q) = 1 - integral of |psi|^2 between 0 and q,
    # with the integral in closed form (normal CDF per slit)
    erf = pytest.importorskip("scipy.special").erf
    chi = wwm.char_fn(sign, state_a50)
    sigma = (S / 50) / np.sqrt(2)

    def cumulative(x):
        return 0.25 * (erf((x + S / 2) / (sigma * np.sqrt(2)))
                       + erf((x - S / 2) / (sigma * np.sqrt(2))))

    oracle = 1.0 - np.abs(cumulative(grid.xs) - cumulative(0.0))
    # pointwise agreement is limited by the O(dx^2) Riemann residue of the
    # step integrand at the slit edges (~5e-5 for a = s/50 on this grid)
    assert np.max(np.abs(chi.values.real - oracle)) < 1e-4
    assert np.max(np.abs(chi.values.imag)) < 1e-12


def test_chi_asymptotes_and_validation(sign, state_a50):
    chi = wwm.char_fn(sign, state_a50)
    assert np.real(chi.even_const) == pytest.approx(0.5, abs=1e-10)
    assert abs(chi.odd_const) < 1e-10
    assert chi.band_spread < 1e-10
    assert chi.at0() == pytest.approx(1.0, abs=1e-9)
    assert np.max(np.abs(chi.values)) <= 1.0 + 1e-9


def test_chi_rejects_incomplete(state_a50):
    with pytest.raises(wwm.CompletenessError):
        wwm.char_fn(wwm.parse_scheme("theta(x)"), state_a50)


def test_chi_random_schemes_bounds(state_a20):
    rng = np.random.default_rng(99)
    for _ in range(3):
        sch = random_complete_scheme(rng)
        chi = wwm.char_fn(sch, state_a20)
        assert abs(chi.at0() - 1.0) < 1e-9
        assert np.max(np.abs(chi.values)) <= 1.0 + 1e-9


def test_phi_narrow_values(sign, identity):
    assert wwm.phi_narrow_at(sign, S, S) == pytest.approx(0.5)
    assert wwm.phi_narrow_at(sign, S, 0.0) == pytest.approx(1.0)
    assert wwm.phi_narrow_at(identity, S, 2.7) == pytest.approx(1.0)


def test_half_bound_at_s_for_zero_visibility(sign, sew, kick_pair, narrow):
    for sch in (sign, sew, kick_pair):
        val = abs(complex(np.asarray(
            wwm.char_fn(sch, narrow, qs=np.linspace(-2, 2, 129)).values[
                np.searchsorted(np.linspace(-2, 2, 129), 1.0)
            ]
        )))
        assert val <= 0.5 + 1e-9


def test_chi_gaussian_converges_to_narrow(grid, narrow, sew, kick_pair, sign):
    qs = np.linspace(-4, 4, 401)
    chi_n = {s.base: wwm.char_fn(s, narrow, qs=qs).values for s in (sew, kick_pair, sign)}
    errs = {}
    for a in (S / 20, S / 40):
        st = wwm.gaussian_twin_slits(S, a, grid)
        for sch in (sew, kick_pair, sign):
            err = np.abs(wwm.char_fn(sch, st, qs=qs).values - chi_n[sch.base])
            if sch.base == "sign":  # chi has jumps at |q| = s/2; compare away
                err = err[np.abs(np.abs(qs) - 0.5) > 0.15]
            errs[(sch.base, a)] = float(np.max(err))
    for base in ("sew_flat", "sign"):
        assert errs[(base, S / 20)] <= 0.25 * (S / 20) / S  # C * (a/s) bound
        assert errs[(base, S / 40)] <= 0.6 * errs[(base, S / 20)] + 1e-12
    assert errs[("kicks", S / 20)] < 1e-12  # kick chi has no a dependence


# --- moments ----------------------------------------------------------------


def moments_chi(scheme, state, n_points=16):
    qs = (S / 128.0) * np.arange(-n_points, n_points + 1)
    return wwm.char_fn(scheme, state, qs=qs)


def test_moments_identity_zero(identity, state_a50):
    rep = wwm.moments(moments_chi(identity, state_a50))
    # the 4th difference amplifies chi rounding by 16/dq^4: floor ~1e-7
    assert np.max(np.abs(rep.values)) < 5e-7


def test_moments_kick_pair_analytic(kick_pair, narrow):
    rep = wwm.moments(moments_chi(kick_pair, narrow))
    k = np.pi / 2
    assert abs(rep.values[0]) < 1e-8
    assert rep.values[1] == pytest.approx(k ** 2, abs=1e-8)
    assert abs(rep.values[2]) < 1e-6
    assert rep.values[3] == pytest.approx(k ** 4, rel=1e-6)
    assert rep.imag_residual < 1e-8


def test_moments_single_kick_keeps_odd_orders(narrow):
    sch = wwm.builtin("kicks", kicks=[(1.0, 2.0)])
    rep = wwm.moments(moments_chi(sch, narrow))
    assert np.allclose(rep.values, [2.0, 4.0, 8.0, 16.0], rtol=1e-5)


def test_moments_sew_flat_tiny(sew, grid):
    st = wwm.gaussian_twin_slits(S, S / 20, grid)
    rep = wwm.moments(moments_chi(sew, st))
    for n, value in enumerate(rep.values, start=1):
        assert abs(value) < 1e-6 * S ** -n


def test_moments_stencil_bounds(identity, state_a50):
    qs = (S / 128.0) * np.arange(-4, 5)  # too short for the 8-step stencil
    chi = wwm.char_fn(identity, state_a50, qs=qs)
    with pytest.raises(wwm.WWMError):
        wwm.moments(chi)
    with pytest.raises(wwm.WWMError):
        wwm.moments(moments_chi(identity, state_a50), n_max=5)


# --- support metric ---------------------------------------------------------


def test_support_metric_cases(grid):
    ident = wwm.MixedDistribution([(0.0, 1.0)], grid.ps, np.zeros(grid.n))
    assert wwm.support_metric(ident, 1.0 / S) == 0.0

    eq21 = wwm.pwv_narrow_sign(S, grid.ps)
    val = wwm.support_metric(eq21, np.pi / (3 * S))
    assert val > 0.2
    # independent check: fine Riemann quadrature of the |density| tails
    fine = np.linspace(np.pi / (3 * S), grid.ps[-1], 200001)
    tail = 2 * np.trapezoid(np.abs(np.sin(fine * S / 2) / (2 * np.pi * fine)), fine)
    assert val == pytest.approx(tail + 0.0, rel=0.02)

    kick = wwm.classical_transfer(
        wwm.builtin("kicks", kicks=[(0.5, np.pi / 2), (0.5, -np.pi / 2)])
    )
    assert wwm.support_metric(kick, 1.0 / S) == pytest.approx(1.0)
    with pytest.raises(wwm.WWMError):
        wwm.support_metric(kick, -1.0)


def test_narrow_sign_distribution_values(grid):
    dist = wwm.pwv_narrow_sign(S, grid.ps)
    assert dist.atoms == [(0.0, 0.5)]
    k = np.searchsorted(grid.ps, np.pi)
    assert grid.ps[k] == pytest.approx(np.pi)
    assert dist.density[k] == pytest.approx(1.0 / (2 * np.pi ** 2))
    k0 = np.searchsorted(grid.ps, 0.0)
    assert dist.density[k0] == pytest.approx(S / (4 * np.pi))


def test_narrow_sign_mass_against_dirichlet_oracle():
    # partial Dirichlet integral: atom + integral to B = (1/2) + Si(B/2)/pi
    sici = pytest.importorskip("scipy.special").sici
    ps = (2 * np.pi / 16) * np.arange(-512, 512)  # |p| <= 200/s roughly
    dist = wwm.pwv_narrow_sign(S, ps)
    mass = dist.total_mass()
    oracle = 0.5 + sici(float(-ps[0]) * S / 2)[0] / np.pi
    assert mass == pytest.approx(oracle, abs=5e-5)
    # the tail deficit is real: cos(B s/2)/(pi B s/2) ~ 3e-3 at B = 200/s
    assert abs(mass - 1.0) < 5e-3


# --- wigner -----------------------------------------------------------------


@pytest.fixture(scope="module")
def wgrid():
    return wwm.make_grid(-4, 4, 1024)


@pytest.fixture(scope="module")
def wstate(wgrid):
    return wwm.gaussian_twin_slits(S, S / 20, wgrid)


def test_wigner_single_gaussian_nonnegative(wgrid):
    st = wwm.gaussian_twin_slits(S, S / 20, wgrid, amplitudes=(1.0, 0.0))
    w = wwm.wigner_state(st)
    assert w.values.min() > -1e-12


def test_wigner_twin_slits_negative_ridge(wgrid, wstate):
    w = wwm.wigner_state(wstate)
    mid = np.searchsorted(wgrid.xs, 0.0)
    assert w.values[mid].min() < -0.1


def test_wigner_marginals(wgrid, wstate):
    w = wwm.wigner_state(wstate)
    x_marginal = w.values.sum(axis=1) * w.dp
    assert np.max(np.abs(x_marginal - np.abs(wstate.values) ** 2)) < 1e-6
    p_marginal = w.values.sum(axis=0) * wgrid.dx
    ps_f, amps = fine_momentum_amplitudes(wgrid, wstate.values)
    order = np.argsort(ps_f)
    ref = np.interp(w.ps, ps_f[order], (np.abs(amps) ** 2)[order])
    assert np.max(np.abs(p_marginal - ref)) < 1e-6


def test_wigner_rejects_momentum_overflow(wgrid):
    boost = np.exp(1j * 0.9 * np.pi / wgrid.dx * wgrid.xs)
    base = wwm.gaussian_twin_slits(S, S / 20, wgrid)
    bad = SlitState("gaussian", S, base.amplitudes, S / 20, wgrid, base.values * boost)
    with pytest.raises(wwm.StateError):
        wwm.wigner_state(bad)


def test_wigner_kernel_identity_and_kicks(wgrid, identity):
    dist = wwm.wigner_kernel(identity, 0.3, wgrid, S)
    assert dist.atoms == [(0.0, pytest.approx(1.0))]
    assert np.max(np.abs(dist.density)) < 1e-12
    kicked = wwm.builtin("kicks", kicks=[(1.0, 2.0)])
    dist = wwm.wigner_kernel(kicked, -0.7, wgrid, S)
    assert dist.atoms == [(2.0, pytest.approx(1.0))]


def test_wigner_kernel_sign_closed_form(wgrid, sign):
    # kernel of the sign measurement at x: sin(2|x| p) / (pi p)
    x0 = 0.25
    dist = wwm.wigner_kernel(sign, x0, wgrid, S)
    ref = np.zeros_like(dist.ps)
    nonzero = dist.ps != 0
    ref[nonzero] = np.sin(2 * x0 * dist.ps[nonzero]) / (np.pi * dist.ps[nonzero])
    ref[~nonzero] = 2 * x0 / np.pi
    assert np.max(np.abs(dist.density - ref)) < 2e-3
    assert dist.total_mass() == pytest.approx(1.0, abs=1e-6)
    # nonlocal transfer just off the midpoint: negative lobes
    near = wwm.wigner_kernel(sign, S / 20, wgrid, S)
    assert near.density.min() < -1e-3


def test_wigner_kernel_basis_invariant(wgrid, sign, sew):
    rng = np.random.default_rng(17)
    for sch in (sign, sew):
        u = wwm.haar_unitary(2, rng)
        d0 = wwm.wigner_kernel(sch, 0.2, wgrid, S)
        d1 = wwm.wigner_kernel(wwm.rebase(sch, u), 0.2, wgrid, S)
        assert np.max(np.abs(d0.bin_masses() - d1.bin_masses())) < 1e-9


def test_wigner_identity_all_builtins(wgrid, wstate, identity, sign, sew):
    kicked = wwm.builtin("kicks", kicks=[(0.5, np.pi / 2), (0.5, -np.pi / 2)])
    for sch in (identity, kicked, sign, sew):
        assert wwm.verify_wigner_identity(sch, wstate) < 1e-8


def test_wigner_identity_random_scheme(wgrid, wstate):
    sch = random_complete_scheme(np.random.default_rng(5))
    assert wwm.verify_wigner_identity(sch, wstate) < 1e-8
