"""Momentum-transfer characterizations that do not involve post-selection.

The central object is the characteristic function

    chi(q) = (1/2) * [g(q) + conj(g(-q))],
    g(q)   = sum_xi integral dx |psi(x)|^2 O_xi(x) conj(O_xi(x - q)),

the exact Fourier dual of the weak-valued transfer distribution:
chi(q) = integral dP_wv(p) exp(i p q).  The widely quoted form Re g(q)
(exposed here as phi_symmetric) coincides with chi whenever g is even, which
covers every symmetric scheme; for asymmetric kick schemes only chi keeps
the odd moments.

Moments are extracted by differentiating chi at q = 0 with central
differences plus Richardson extrapolation, never by integrating p^n
against the transfer density: schemes with step-like channels produce
1/p density tails whose moments exist only distributionally, while the
q-side derivatives are perfectly well posed.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CompletenessError, SchemeError, StateError, WWMError
from .grid import GridSpec, fourier_values, spectral_refine
from .scheme import require_complete
from .state import apply_wwm

# --- signed distributions ----------------------------------------------


def merge_atoms(atoms, tol):
    """Sort atoms and merge those closer than tol; drop negligible ones."""
    merged = []
    for loc, weight in sorted(atoms):
        if merged and abs(loc - merged[-1][0]) <= tol:
            prev_loc, prev_w = merged[-1]
            total = prev_w + weight
            pos = prev_loc if abs(prev_w) >= abs(weight) else loc
            merged[-1] = (pos, total)
        else:
            merged.append((float(loc), float(weight)))
    return [(loc, w) for loc, w in merged if abs(w) > 1e-12]


@dataclass
class MixedDistribution:
    """Signed transfer distribution: point atoms plus a sampled density."""

    atoms: list  # [(location, signed weight)], sorted, distinct
    ps: np.ndarray  # uniform momentum samples (may be empty)
    density: np.ndarray  # signed density at ps
    s: float = None
    units: str = "raw"

    def __post_init__(self):
        self.ps = np.asarray(self.ps, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        tol = 0.5 * self.dp if self.ps.size > 1 else 0.0
        self.atoms = merge_atoms(self.atoms, tol)

    @property
    def dp(self):
        return float(self.ps[1] - self.ps[0]) if self.ps.size > 1 else 0.0

    def total_mass(self):
        return float(sum(w for _, w in self.atoms) + np.sum(self.density) * self.dp)

    def abs_mass(self):
        return float(
            sum(abs(w) for _, w in self.atoms) + np.sum(np.abs(self.density)) * self.dp
        )

    def bin_masses(self):
        """Density folded to per-bin masses with atoms added to their bins."""
        masses = self.density * self.dp
        for loc, w in self.atoms:
            k = int(np.argmin(np.abs(self.ps - loc)))
            masses[k] += w
        return masses


def support_metric(dist, half_width):
    """Absolute mass at momentum transfers |p| >= half_width."""
    if half_width < 0:
        raise WWMError(f"half_width must be nonnegative, got {half_width}")
    atom_part = sum(abs(w) for loc, w in dist.atoms if abs(loc) >= half_width - 1e-15)
    outside = np.abs(dist.ps) >= half_width - 1e-15
    return float(atom_part + np.sum(np.abs(dist.density[outside])) * dist.dp)


def classical_transfer(scheme):
    """Kick distribution sum_xi N_xi delta(p - k_xi) of a kick-form scheme."""
    if scheme.kick_terms is None:
        raise SchemeError("scheme is not of classical kick form")
    atoms = [(k, nw) for nw, k in scheme.kick_terms]
    return MixedDistribution(atoms, np.array([]), np.array([]))


# --- characteristic function -------------------------------------------


@dataclass
class CharacteristicFunction:
    qs: np.ndarray
    values: np.ndarray  # complex chi samples
    even_const: complex  # box-edge asymptote, even part
    odd_const: complex  # box-edge asymptote, coefficient of sgn(q)
    band_spread: float  # max std over the outer bands; settled if small
    s: float = None

    @property
    def dq(self):
        return float(self.qs[1] - self.qs[0])

    @property
    def index0(self):
        k = int(np.argmin(np.abs(self.qs)))
        if abs(self.qs[k]) > 1e-9 * self.dq + 1e-300:
            raise WWMError("q grid does not contain q = 0")
        return k

    def at0(self):
        return complex(self.values[self.index0])


def asymptote_split(xs, values, band_frac=0.1, taper=None):
    """Split samples into (even_const, odd_const, remainder, band_spread).

    The asymptote model is values -> even_const +- odd_const at the box
    edges, with the constants estimated as means over the outer bands.  The
    odd part is subtracted along `taper` (default sgn(x)); pass a smooth
    odd template with known transform to keep the remainder jump-free.
    A large band_spread means the samples never settle (oscillating tails);
    callers warn and the constants then mostly cancel against the remainder.
    """
    nb = max(2, int(len(xs) * band_frac))
    left = values[:nb]
    right = values[-nb:]
    m_minus = np.mean(left)
    m_plus = np.mean(right)
    spread = float(max(np.std(left), np.std(right)))
    even_c = 0.5 * (m_plus + m_minus)
    odd_c = 0.5 * (m_plus - m_minus)
    if taper is None:
        taper = np.sign(xs)
    remainder = values - even_c - odd_c * taper
    return even_c, odd_c, remainder, spread


def taper_scale(xs):
    """Width of the smooth odd taper tanh(x/lambda) used for asymptote
    subtraction: small enough to be fully settled at the box edges
    (tanh(10) differs from 1 by 4e-9), wide enough that its transform,
    (lambda/2) csch(pi lambda p / 2), is resolved on the dual grid."""
    return float(xs[-1] - xs[0]) / 20.0


def damped_pv_kernel(ps, lam, frequency_factor=1.0):
    """Fourier dual of the tanh taper: the damped principal-value tail.

    Returns D with  FT[(i c) tanh(q/lam)](p) = c * D(p)  under the
    (1/2pi) integral tanh(q/lam) exp(-i f q) dq convention at f =
    frequency_factor * p.  D ~ 1/(pi p) for small p and decays
    exponentially at the dual-grid edge, matching how a smoothly
    attained asymptote actually transforms.
    """
    arg = 0.5 * np.pi * lam * frequency_factor * ps
    out = np.zeros_like(ps)
    small = np.abs(arg) < 350.0
    nonzero = small & (arg != 0.0)
    out[nonzero] = 0.5 * lam / np.sinh(arg[nonzero])
    return out * frequency_factor


def _channel_weights(state):
    """Quadrature weights |psi|^2 dx (grid) or the two slit masses (narrow)."""
    if state.is_grid:
        return np.abs(state.values) ** 2 * state.grid.dx
    c_minus, c_plus = state.amplitudes
    return np.array([abs(c_minus) ** 2, abs(c_plus) ** 2])


_REFINE = 4  # oversampling of the x quadrature on the lattice path


def _linear_correlate(a, b):
    """c[m] = sum_j a[j] * b_offsets[j - m] for m = 0..len(a)-1.

    b holds values at offsets -(n-1)..(n-1).  FFT-based linear convolution.
    """
    n = a.size
    full = n + b.size - 1
    size = 1 << (full - 1).bit_length()
    d = b[::-1]
    out = np.fft.ifft(np.fft.fft(a, size) * np.fft.fft(d, size))
    return out[n - 1 : 2 * n - 1]


def correlation_g(scheme, state, qs):
    """g(q) = sum_xi integral |psi|^2 O_xi(x) conj(O_xi(x-q)) dx at given qs.

    Channels are always evaluated analytically at the shifted points, so no
    periodic wrap-around ever enters.  When qs is the state's own grid the
    quadrature runs on a band-limited 4x refinement of psi and reduces to a
    single linear correlation per channel: step-like channels otherwise
    leave an O(dx^2) Riemann residue in the density tails.
    """
    qs = np.asarray(qs, dtype=float)
    if not state.is_grid:
        s = state.s
        w_minus, w_plus = _channel_weights(state)
        return w_minus * scheme.contraction(-s / 2, -s / 2 - qs, s) + (
            w_plus * scheme.contraction(s / 2, s / 2 - qs, s)
        )
    grid = state.grid
    if qs.shape == grid.xs.shape and np.allclose(qs, grid.xs, atol=1e-12 * grid.dx):
        fine, psi_fine = spectral_refine(grid, state.values, _REFINE)
        weights = np.abs(psi_fine) ** 2 * fine.dx
        m = fine.n
        offsets = fine.dx * np.arange(-(m - 1), m)
        g = np.zeros(m, dtype=complex)
        for ch in scheme.channels:
            a = weights * ch.evaluate(fine.xs, state.s)
            b = np.conj(ch.evaluate(offsets, state.s))
            g += _linear_correlate(a, b)
        return g[::_REFINE]
    weights = _channel_weights(state)
    g = np.zeros(qs.shape, dtype=complex)
    chunk = max(1, 2 ** 22 // grid.n)
    for lo in range(0, qs.size, chunk):
        qblock = qs[lo : lo + chunk]
        diffs = grid.xs[None, :] - qblock[:, None]
        for ch in scheme.channels:
            a = weights * ch.evaluate(grid.xs, state.s)
            g[lo : lo + chunk] += np.conj(ch.evaluate(diffs, state.s)) @ a
    return g


def _require_complete_for(scheme, state):
    if state.is_grid:
        require_complete(scheme, state.grid, state.s)
    else:
        s = state.s
        for point in (-s / 2, s / 2):
            total = float(np.abs(scheme.contraction(point, point, s)))
            if abs(total - 1.0) > 1e-8:
                raise CompletenessError(
                    f"scheme incomplete at slit x={point}: sum |O|^2 = {total}"
                )


def char_fn(scheme, state, qs=None, grid=None):
    """Characteristic function chi(q) = [g(q) + conj(g(-q))] / 2.

    qs=None picks the natural grid: the state's position grid (gaussian) or
    the supplied GridSpec's (narrow).  The grid must be symmetric about 0.
    Raises if the scheme is incomplete; validates chi(0) = 1 and |chi| <= 1.
    """
    _require_complete_for(scheme, state)
    if qs is None:
        if state.is_grid:
            qgrid = state.grid
        else:
            qgrid = grid or GridSpec(-8.0 * state.s, 8.0 * state.s, 4096)
        if abs(qgrid.x_min + qgrid.x_max) > 1e-9 * qgrid.length:
            raise WWMError("char_fn needs a grid symmetric about q = 0")
        qs = qgrid.xs
        g = correlation_g(scheme, state, qs)
        g_at_xmax = complex(
            correlation_g(scheme, state, np.array([qgrid.x_max]))[0]
        )
        chi = np.empty_like(g)
        chi[0] = 0.5 * (g[0] + np.conj(g_at_xmax))
        chi[1:] = 0.5 * (g[1:] + np.conj(g[:0:-1]))
    else:
        qs = np.asarray(qs, dtype=float)
        g_plus = correlation_g(scheme, state, qs)
        g_minus = correlation_g(scheme, state, -qs)
        chi = 0.5 * (g_plus + np.conj(g_minus))
    even_c, odd_c, _, spread = asymptote_split(qs, chi)
    cf = CharacteristicFunction(qs, chi, even_c, odd_c, spread, state.s)
    at0 = cf.at0()
    if abs(at0 - 1.0) > 1e-7:
        raise CompletenessError(f"chi(0) = {at0}, expected 1")
    peak = float(np.max(np.abs(chi)))
    if peak > 1.0 + 1e-9:
        raise WWMError(f"|chi| reached {peak}, above the Schwartz bound 1")
    return cf


def phi_narrow_at(scheme, s, q):
    """Narrow-slit moment generator in the symmetric Re form.

    (1/2) Re sum_xi [O(-s/2) conj(O(-s/2-q)) + O(s/2) conj(O(s/2-q))].
    """
    q = np.asarray(q, dtype=float)
    val = 0.5 * (
        scheme.contraction(-s / 2, -s / 2 - q, s)
        + scheme.contraction(s / 2, s / 2 - q, s)
    )
    out = np.real(val)
    return float(out) if out.ndim == 0 else out


def phi_symmetric(scheme, state, qs):
    """Re g(q): the symmetric real-form moment generator, for audits."""
    return np.real(correlation_g(scheme, state, np.asarray(qs, dtype=float)))


# --- moments ------------------------------------------------------------


@dataclass
class MomentsReport:
    values: np.ndarray  # <p^n> for n = 1..n_max
    imag_residual: float  # should be ~0; diagnostic for asymmetric rounding
    steps: tuple = field(default=())


_STENCILS = {
    1: ([1, -1], [1.0, -1.0], 2.0, 1),
    2: ([1, 0, -1], [1.0, -2.0, 1.0], 1.0, 2),
    3: ([2, 1, -1, -2], [1.0, -2.0, 2.0, -1.0], 2.0, 3),
    4: ([2, 1, 0, -1, -2], [1.0, -4.0, 6.0, -4.0, 1.0], 1.0, 4),
}


def _central_diff(chi, order, step_bins):
    offsets, coeffs, denom, power = _STENCILS[order]
    i0 = chi.index0
    h = step_bins * chi.dq
    total = 0.0 + 0.0j
    for off, coef in zip(offsets, coeffs):
        idx = i0 + off * step_bins
        if idx < 0 or idx >= chi.values.size:
            raise WWMError("finite-difference stencil exceeds the q grid")
        total += coef * chi.values[idx]
    return total / (denom * h ** power)


def moments(chi, n_max=4):
    """Transfer moments <p^n> = (-i d/dq)^n chi at q=0, n = 1..n_max.

    Uses central differences at steps 4*dq, 2*dq, dq combined by two
    Richardson extrapolation rounds (leading error O(dq^6)).
    """
    if not 1 <= n_max <= 4:
        raise WWMError("n_max must be between 1 and 4")
    values = []
    residual = 0.0
    for order in range(1, n_max + 1):
        d4 = _central_diff(chi, order, 4)
        d2 = _central_diff(chi, order, 2)
        d1 = _central_diff(chi, order, 1)
        r1a = (4.0 * d2 - d4) / 3.0
        r1b = (4.0 * d1 - d2) / 3.0
        extrapolated = (16.0 * r1b - r1a) / 15.0
        moment = (-1j) ** order * extrapolated
        values.append(moment.real)
        residual = max(residual, abs(moment.imag))
    return MomentsReport(np.asarray(values), residual, (4 * chi.dq, 2 * chi.dq, chi.dq))


# --- Wigner functions ----------------------------------------------------


@dataclass
class WignerFunction:
    xs: np.ndarray
    ps: np.ndarray  # fine momentum grid, spacing dp/2
    values: np.ndarray  # real, shape (n_x, n_p)

    @property
    def dp(self):
        return float(self.ps[1] - self.ps[0])


def _pair_products(values):
    """B[j, m] = psi(x_j + u_m) conj(psi(x_j - u_m)), u_m in FFT order.

    The state is taken to vanish outside its box (zero extension, not
    periodic wrap): wrapping would pair each slit with the other slit's
    periodic image and plant a spurious interference ridge at the box edge.
    """
    n = values.size
    pad = np.zeros(3 * n, dtype=complex)
    pad[n : 2 * n] = values
    j = np.arange(n)[:, None]
    m_signed = (((np.arange(n) + n // 2) % n) - n // 2)[None, :]
    return pad[n + j + m_signed] * np.conj(pad[n + j - m_signed])


def _wigner_rows(pair_rows, dx):
    return (dx / np.pi) * np.fft.fftshift(np.fft.fft(pair_rows, axis=-1), axes=-1)


def fine_momentum_grid(grid):
    return 0.5 * grid.dp * np.arange(-grid.n // 2, grid.n // 2)


def fine_momentum_amplitudes(grid, values):
    """psi~ evaluated on the half-spaced momentum grid (exact, via two DFTs)."""
    fine = np.empty(2 * grid.n, dtype=complex)
    base = fourier_values(grid, values)
    shift = 0.5 * grid.dp
    modulated = values * np.exp(-1j * shift * grid.xs)
    odd = fourier_values(grid, modulated)  # samples at ps + dp/2
    fine[0::2] = base
    fine[1::2] = odd
    ps_fine = np.empty(2 * grid.n)
    ps_fine[0::2] = grid.ps
    ps_fine[1::2] = grid.ps + shift
    return ps_fine, fine


def wigner_state(state):
    """Wigner function of a gaussian slit state on (grid xs) x (fine ps)."""
    state.require_grid("wigner_state")
    grid = state.grid
    ps_half = np.pi / (2 * grid.dx)
    tilde = fourier_values(grid, state.values)
    outside = float(np.sum(np.abs(tilde[np.abs(grid.ps) > ps_half]) ** 2) * grid.dp)
    if outside > 1e-8:
        raise StateError(
            f"momentum support exceeds half the box Nyquist (mass {outside:.2e}); "
            "refine the grid"
        )
    w = _wigner_rows(_pair_products(state.values), grid.dx).real
    return WignerFunction(grid.xs, fine_momentum_grid(grid), w)


def wigner_kernel(scheme, x, grid, s=None):
    """x-conditioned momentum transfer kernel of a scheme.

    Defined so that the final Wigner function is the initial one convolved
    with this kernel in p at every fixed x.  Returns a MixedDistribution on
    the fine momentum grid; constant/sgn tails of the channel contraction
    are split off as an atom at 0 and an analytic 1/p term, exactly like
    the weak-value marginal pipeline.
    """
    ps_fine = fine_momentum_grid(grid)
    if scheme.kick_terms is not None:
        atoms = [(k, nw) for nw, k in scheme.kick_terms]
        return MixedDistribution(atoms, ps_fine, np.zeros(grid.n), s)
    n = grid.n
    u_sym = grid.dx * np.arange(-n // 2, n // 2)
    pair = scheme.contraction(x + u_sym, x - u_sym, s)
    lam = taper_scale(u_sym)
    even_c, odd_c, remainder, spread = asymptote_split(
        u_sym, pair, taper=np.tanh(u_sym / lam)
    )
    if spread > 1e-3:
        warnings.warn(
            f"wigner kernel tail not settled at x={x} (spread {spread:.2e}); "
            "enlarge the box",
            stacklevel=2,
        )
    density = (grid.dx / np.pi) * np.fft.fftshift(
        np.fft.fft(np.fft.ifftshift(remainder))
    )
    density = density.real
    # the integral here runs over u = y/2, doubling the dual frequency
    density += np.real(-1j * odd_c) * damped_pv_kernel(ps_fine, lam, 2.0)
    atoms = [(0.0, float(np.real(even_c)))] if abs(even_c) > 1e-12 else []
    return MixedDistribution(atoms, ps_fine, density, s)


def verify_wigner_identity(scheme, state):
    """Max abs difference between the two routes to the final Wigner function.

    Route one transforms the conditioned channel states directly; route two
    convolves the initial Wigner function with the scheme kernel row by row.
    """
    state.require_grid("verify_wigner_identity")
    grid = state.grid
    n = grid.n
    dx = grid.dx
    ensemble = apply_wwm(scheme, state)

    w_f_direct = np.zeros((n, n))
    for prob, st in zip(ensemble.probabilities, ensemble.states):
        conditioned = np.sqrt(prob) * st.values  # undo the normalization
        w_f_direct += _wigner_rows(_pair_products(conditioned), dx).real

    w_i = _wigner_rows(_pair_products(state.values), dx).real

    u_fft = dx * (((np.arange(n) + n // 2) % n) - n // 2)
    xs = grid.xs
    kernel_rows = np.empty((n, n), dtype=complex)
    block = max(1, 2 ** 21 // n)
    for lo in range(0, n, block):
        xb = xs[lo : lo + block, None]
        kernel_rows[lo : lo + block] = scheme.contraction(xb + u_fft, xb - u_fft, state.s)
    kernel_density = (dx / np.pi) * np.fft.fft(kernel_rows, axis=1)
    kernel_density = np.fft.fftshift(kernel_density, axes=1).real

    d_fine = 0.5 * grid.dp
    conv = np.fft.ifft(
        np.fft.fft(w_i, axis=1) * np.fft.fft(kernel_density, axis=1), axis=1
    ).real
    w_f_conv = np.roll(conv, -(n // 2), axis=1) * d_fine
    return float(np.max(np.abs(w_f_direct - w_f_conv)))
