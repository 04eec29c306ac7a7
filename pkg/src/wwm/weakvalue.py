"""Weak-valued momentum-transfer distributions.

Two independent computation routes are kept deliberately separate:

* the chi route (production): inverse-transform the characteristic
  function.  Box-edge asymptotes of chi are split off analytically, the
  even constant becoming the point mass at zero transfer and the odd one
  an explicit 1/p term, so no distributional transform is ever attempted
  on the grid.
* the joint-table route (oracle): build the post-selected table over
  (initial, final) momentum pairs from channel matrix elements, then
  marginalize over the initial momentum at fixed transfer.

For the matrix elements the channel function is decomposed per channel as
O(x) = A + B*sgn(x) + R(x) with decaying R; A gives the diagonal, B an
analytic principal-value kernel, and R a short transform on a doubly
refined grid so that all momentum differences are reachable.  Classical
kick schemes bypass both pipelines: their transfer distribution is the
exact atom list, which both routes reproduce anyway.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import StateError, WWMError
from .grid import GridSpec, SQRT_2PI, fourier_values
from .scheme import require_complete
from .transfer import (
    MixedDistribution,
    asymptote_split,
    char_fn,
    damped_pv_kernel,
    taper_scale,
)

_SETTLE_TOL = 1e-3
_PROMOTE_SHARE = 0.99
_PROMOTE_FLOOR = 1e-8


def pwv_narrow_sign(s, ps):
    """Closed form for the sign measurement on narrow slits.

    Point mass 1/2 at zero transfer plus the density sin(p s/2)/(2 pi p),
    with the removable p = 0 value s/(4 pi).
    """
    if s <= 0:
        raise WWMError(f"slit separation must be positive, got {s}")
    ps = np.asarray(ps, dtype=float)
    density = np.empty_like(ps)
    nonzero = ps != 0.0
    density[nonzero] = np.sin(0.5 * s * ps[nonzero]) / (2.0 * np.pi * ps[nonzero])
    density[~nonzero] = s / (4.0 * np.pi)
    return MixedDistribution([(0.0, 0.5)], ps, density, s)


def _promote_single_bins(atoms, ps, density):
    """Move bins holding almost all of their local mass into the atom list."""
    if ps.size < 2:
        return atoms, density
    dp = ps[1] - ps[0]
    masses = density * dp
    window = np.convolve(np.abs(masses), np.ones(7), mode="same")
    concentrated = (np.abs(masses) > _PROMOTE_SHARE * window) & (
        np.abs(masses) > _PROMOTE_FLOOR
    )
    for k in np.nonzero(concentrated)[0]:
        atoms.append((float(ps[k]), float(masses[k])))
        density[k] = 0.0
    return atoms, density


def distribution_from_chi(chi):
    """Inverse-transform a characteristic function into atoms plus density."""
    qs = chi.qs
    n = qs.size
    dq = chi.dq
    lam = taper_scale(qs)
    even_c, odd_c, remainder, spread = asymptote_split(
        qs, chi.values, taper=np.tanh(qs / lam)
    )
    if spread > _SETTLE_TOL:
        warnings.warn(
            f"chi did not settle at the box edges (spread {spread:.2e}); "
            "enlarge the q box",
            stacklevel=2,
        )
    qgrid = GridSpec(float(qs[0]), float(qs[0] + n * dq), n)
    density = (fourier_values(qgrid, remainder) / SQRT_2PI).real
    ps = qgrid.ps
    density += np.real(-1j * odd_c) * damped_pv_kernel(ps, lam)
    atoms = [(0.0, float(np.real(even_c)))] if abs(even_c) > 1e-12 else []
    atoms, density = _promote_single_bins(atoms, ps, density)
    return MixedDistribution(atoms, ps, density, chi.s)


def _output_grid(state, grid):
    if grid is not None:
        return grid
    if state.is_grid:
        return state.grid
    return GridSpec(-8.0 * state.s, 8.0 * state.s, 4096)


def pwv_marginal(scheme, state, grid=None):
    """Weak-valued distribution of the momentum transfer p_f - p_i.

    Dispatch:  kick-form schemes return their exact classical atoms; the
    sign measurement on narrow slits (in any channel basis) returns the
    closed form; everything else goes through the characteristic function.
    """
    out = _output_grid(state, grid)
    if scheme.kick_terms is not None:
        atoms = [(k, nw) for nw, k in scheme.kick_terms]
        return MixedDistribution(atoms, out.ps, np.zeros(out.n), state.s)
    if not state.is_grid and scheme.base == "sign":
        w_minus, w_plus = (abs(c) ** 2 for c in state.amplitudes)
        if abs(w_minus - w_plus) > 1e-12:
            raise StateError("narrow sign closed form needs symmetric amplitudes")
        return pwv_narrow_sign(state.s, out.ps)
    chi = char_fn(scheme, state, qs=None, grid=grid)
    return distribution_from_chi(chi)


# --- joint table ---------------------------------------------------------


@dataclass
class JointWeakTable:
    """Bin-integrated weak-valued joint distribution over (p_i, p_f)."""

    p_i: np.ndarray  # scanned initial momenta (subset of the grid)
    p_f: np.ndarray  # all grid momenta
    matrix: np.ndarray  # real bin masses, shape (len(p_i), len(p_f))
    marginal_pf: np.ndarray  # column sums, the post-selection denominator
    row_offset: int  # index of p_i[0] within p_f
    s: float = None

    def total_mass(self):
        return float(self.matrix.sum())


def _scan_range(grid, weights, s):
    """Symmetric index window covering the envelope plus |p| <= 6 pi / s."""
    n = grid.n
    cum = np.cumsum(weights)
    lo = int(np.searchsorted(cum, 1e-12))
    hi = n - int(np.searchsorted(np.cumsum(weights[::-1]), 1e-12))
    span = np.nonzero(np.abs(grid.ps) <= 6.0 * np.pi / s)[0]
    lo = min(lo, int(span[0]))
    hi = max(hi, int(span[-1]) + 1)
    return max(lo, 0), min(hi, n)


def _channel_decomposition(channel, grid, s):
    """(A, B, R_tilde): constant, sgn coefficient, transform of the rest.

    R_tilde is sampled at all momentum differences d*dp, d = -n..n-1, by
    transforming the remainder on the doubly refined grid.
    """
    fine = grid.refined(2)
    vals_fine = channel.evaluate(fine.xs, s)
    band = max(2, grid.n // 10)
    c_minus = np.mean(vals_fine[: 2 * band])
    c_plus = np.mean(vals_fine[-2 * band :])
    spread = float(max(np.std(vals_fine[: 2 * band]), np.std(vals_fine[-2 * band :])))
    if spread > _SETTLE_TOL:
        warnings.warn(
            f"channel tail not settled (spread {spread:.2e}); joint table "
            "matrix elements may be inaccurate",
            stacklevel=3,
        )
    a_const = 0.5 * (c_plus + c_minus)
    b_const = 0.5 * (c_plus - c_minus)
    remainder = vals_fine - a_const - b_const * np.sign(fine.xs)
    r_tilde = fourier_values(fine, remainder)
    return a_const, b_const, r_tilde


def pwv_joint(scheme, state):
    """Weak-valued joint table over (p_i, p_f) for a gaussian state."""
    state.require_grid("pwv_joint")
    require_complete(scheme, state.grid, state.s)
    grid = state.grid
    n = grid.n
    dp = grid.dp
    ps = grid.ps
    psit = fourier_values(grid, state.values)
    weights = np.abs(psit) ** 2 * dp
    lo, hi = _scan_range(grid, weights, state.s)
    rows = np.arange(lo, hi)
    psit_rows = psit[rows]

    matrix = np.zeros((rows.size, n))
    if scheme.kick_terms is not None:
        for (nw, k), ch in zip(scheme.kick_terms, scheme.channels):
            field = ch.evaluate(grid.xs, state.s) * state.values
            g = fourier_values(grid, field)
            shift = int(np.rint(k / dp))
            if abs(shift * dp - k) > 1e-9 * dp:
                warnings.warn(
                    f"kick {k} is not a multiple of dp; snapping to {shift * dp}",
                    stacklevel=2,
                )
            cols = rows + shift
            ok = (cols >= 0) & (cols < n)
            matrix[np.nonzero(ok)[0], cols[ok]] += (
                np.sqrt(nw) * np.real(psit_rows[ok] * np.conj(g[cols[ok]])) * dp
            )
    else:
        diff = ps[None, :] - ps[rows][:, None]  # p_f - p_i
        diff_index = np.rint(diff / dp).astype(int) + n
        pv_kernel = np.zeros_like(diff)
        off_diag = diff != 0.0
        pv_kernel[off_diag] = 1.0 / diff[off_diag]
        for ch in scheme.channels:
            field = ch.evaluate(grid.xs, state.s) * state.values
            g = fourier_values(grid, field)
            outer = psit_rows[:, None] * np.conj(g)[None, :]
            a_const, b_const, r_tilde = _channel_decomposition(ch, grid, state.s)
            kernel = (-1j * b_const / np.pi) * pv_kernel + r_tilde[diff_index] / SQRT_2PI
            matrix += np.real(kernel * outer) * dp * dp
            matrix[np.arange(rows.size), rows] += np.real(
                a_const * psit_rows * np.conj(g[rows])
            ) * dp
            # Diagonal of the principal-value piece: the kernel 1/(p_f - p_i)
            # times the smooth correlation has a removable zero-transfer
            # limit, (-i B / pi) psi~(p) conj(dg/dp); dropping it loses
            # exactly the central density bin.
            g_deriv = fourier_values(grid, -1j * grid.xs * field)
            matrix[np.arange(rows.size), rows] += np.real(
                (-1j * b_const / np.pi) * psit_rows * np.conj(g_deriv[rows])
            ) * dp * dp

    marginal = matrix.sum(axis=0)
    return JointWeakTable(ps[rows].copy(), ps, matrix, marginal, lo, state.s)


def marginal_from_joint(table):
    """Sum the joint table over p_i at fixed transfer; bins match p_f grid."""
    n = table.p_f.size
    out = np.zeros(n)
    for k in range(n):
        offset = table.row_offset + (k - n // 2)
        out[k] = np.trace(table.matrix, offset=offset)
    return out


def pwv_conditional(table, f_index):
    """Signed conditional profile over p_i given the post-selected bin."""
    denom = table.marginal_pf[f_index]
    if denom <= 1e-12:
        raise WWMError(
            f"post-selection bin {f_index} has negligible probability {denom:.2e}"
        )
    return table.matrix[:, f_index] / denom


def rebin_joint(table, pi_edges, pf_edges):
    """Aggregate the joint table onto coarse bins; returns (cells, col_mass)."""
    pi_edges = np.asarray(pi_edges, dtype=float)
    pf_edges = np.asarray(pf_edges, dtype=float)
    nb = pi_edges.size - 1
    nc = pf_edges.size - 1
    bi = np.searchsorted(pi_edges, table.p_i, side="right") - 1
    bf = np.searchsorted(pf_edges, table.p_f, side="right") - 1
    ok_i = (bi >= 0) & (bi < nb) & (table.p_i < pi_edges[-1])
    ok_f = (bf >= 0) & (bf < nc) & (table.p_f < pf_edges[-1])
    cells = np.zeros((nb, nc))
    for b in range(nb):
        block = table.matrix[ok_i & (bi == b)].sum(axis=0)
        cells[b] = np.bincount(bf[ok_f], weights=block[ok_f], minlength=nc)
    return cells, cells.sum(axis=0)


def conditional_cells(table, pi_edges, pf_edges):
    """Coarse-binned conditional P(p_i bin | p_f bin); the MC oracle."""
    cells, col_mass = rebin_joint(table, pi_edges, pf_edges)
    out = np.full_like(cells, np.nan)
    good = col_mass > 1e-12
    out[:, good] = cells[:, good] / col_mass[good]
    return out
