"""Monte Carlo realization of the weak-measurement / post-selection protocol.

Per shot (initial momentum bin b): draw a standard normal S; record
r = <Pi_b> + sigma*S; disturb the state by the exact normalized update
psi -> N [1 + (Pi_b - <Pi_b>) S / (2 sigma)] psi; pick a which-way channel
with probability |O_xi psi'|^2; sample the final momentum p_f from that
channel's momentum density by inverting its cumulative distribution on
the grid.  Cell means of r over shots that landed in a p_f bin estimate
the weak-valued conditional probability mass.

The disturbed state always lives in span{psi, Pi_b psi}, so channel norms
and p_f distributions are quadratic forms in the two per-shot coefficients
with coefficients computable once per (channel, bin).  The vectorized
runner exploits that; run_reference executes the same protocol state by
state on identical random draws and exists to cross-check the fast path.

Randomness: one counter-based Philox stream per (seed, bin), from which a
bin's shots consume fixed-layout batches (S first, then the channel and
p_f uniforms).  Results are therefore bit-reproducible for a given seed
no matter how bins are scheduled.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import WWMError
from .grid import (
    fourier_values,
    inverse_fourier_values,
    momentum_field,
    position_field,
)
from .scheme import require_complete


@dataclass
class MCConfig:
    sigma: float
    shots_per_bin: int
    p_i_edges: np.ndarray
    p_f_edges: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.p_i_edges = np.asarray(self.p_i_edges, dtype=float)
        self.p_f_edges = np.asarray(self.p_f_edges, dtype=float)
        if self.sigma < 5:
            raise WWMError("sigma must be at least 5 for the weak-probe model")
        if self.shots_per_bin < 1:
            raise WWMError("shots_per_bin must be positive")
        for edges in (self.p_i_edges, self.p_f_edges):
            if edges.size < 2 or np.any(np.diff(edges) <= 0):
                raise WWMError("bin edges must be strictly increasing")
        if not 0 <= self.seed < 2 ** 64:
            raise WWMError("seed must fit in 64 bits")

    @property
    def n_i(self):
        return self.p_i_edges.size - 1

    @property
    def n_f(self):
        return self.p_f_edges.size - 1


def default_bins(s, n_bins=16, span=None):
    """Uniform bin edges over [-span, span], default span 6 pi / s."""
    if span is None:
        span = 6.0 * np.pi / s
    return np.linspace(-span, span, n_bins + 1)


@dataclass
class MCEstimate:
    means: np.ndarray  # (n_i, n_f), NaN where a cell got no shots
    std_errors: np.ndarray
    counts: np.ndarray
    overflow: np.ndarray  # shots per p_i bin that missed every p_f bin
    channel_sums: np.ndarray  # (n_i, n_f, n_channels) accumulated r
    channel_counts: np.ndarray
    bin_expectations: np.ndarray  # <Pi_b> per p_i bin
    config: MCConfig = field(repr=False)


def _bin_indices(edges, values):
    idx = np.searchsorted(edges, values, side="right") - 1
    idx[values >= edges[-1]] = -1
    return idx


def back_action(psi, p_bin, S, sigma):
    """Exact normalized weak-measurement update of a state.

    p_bin is a (lo, hi) momentum interval; the projector keeps grid
    momenta lo <= p < hi.  The state change vanishes like |S|/sigma.
    """
    work = psi
    was_position = psi.space == "position"
    if was_position:
        work = momentum_field(psi.grid, fourier_values(psi.grid, psi.values))
    ps = work.grid.ps
    mask = (ps >= p_bin[0]) & (ps < p_bin[1])
    dp = work.grid.dp
    expectation = float(np.sum(np.abs(work.values[mask]) ** 2) * dp)
    lam = S / (2.0 * sigma)
    updated = work.values + lam * (mask * work.values - expectation * work.values)
    updated = updated / np.sqrt(np.sum(np.abs(updated) ** 2) * dp)
    if was_position:
        return position_field(psi.grid, inverse_fourier_values(psi.grid, updated))
    return momentum_field(psi.grid, updated)


class _ShotTables:
    """Per-(channel, bin) quadratic-form coefficients for the fast path."""

    def __init__(self, scheme, state, cfg):
        state.require_grid("run_weak_experiment")
        require_complete(scheme, state.grid, state.s)
        grid = state.grid
        self.grid = grid
        self.cfg = cfg
        dp = grid.dp
        self.ps = grid.ps
        psit = fourier_values(grid, state.values)
        chan_vals = [ch.evaluate(grid.xs, state.s) for ch in scheme.channels]
        self.n_ch = len(chan_vals)
        g = np.stack(
            [fourier_values(grid, cv * state.values) for cv in chan_vals]
        )  # (n_ch, n)
        self.u = np.abs(g) ** 2 * dp
        self.cu = np.cumsum(self.u, axis=1)
        self.na = self.cu[:, -1]
        self.expectations = np.empty(cfg.n_i)
        self.v = np.empty((cfg.n_i, self.n_ch, grid.n))
        self.w = np.empty((cfg.n_i, self.n_ch, grid.n))
        for b in range(cfg.n_i):
            mask = (self.ps >= cfg.p_i_edges[b]) & (self.ps < cfg.p_i_edges[b + 1])
            self.expectations[b] = np.sum(np.abs(psit[mask]) ** 2) * dp
            phi_pos = inverse_fourier_values(grid, mask * psit)
            h = np.stack(
                [fourier_values(grid, cv * phi_pos) for cv in chan_vals]
            )
            self.v[b] = 2.0 * np.real(np.conj(g) * h) * dp
            self.w[b] = np.abs(h) ** 2 * dp
        self.cv = np.cumsum(self.v, axis=2)
        self.cw = np.cumsum(self.w, axis=2)
        self.nv = self.cv[:, :, -1]
        self.nw = self.cw[:, :, -1]


def _draws(cfg, b):
    gen = np.random.Generator(
        np.random.Philox(key=np.array([cfg.seed, b], dtype=np.uint64))
    )
    shots = cfg.shots_per_bin
    return gen.standard_normal(shots), gen.random(shots), gen.random(shots)


def run_weak_experiment(scheme, state, cfg):
    """Run the full protocol; vectorized over the shots of each bin."""
    tables = _ShotTables(scheme, state, cfg)
    n = tables.grid.n
    n_ch = tables.n_ch
    nb, nc = cfg.n_i, cfg.n_f
    sum_r = np.zeros((nb, nc, n_ch))
    sum_r2 = np.zeros((nb, nc))
    counts_ch = np.zeros((nb, nc, n_ch), dtype=np.int64)
    overflow = np.zeros(nb, dtype=np.int64)

    for b in range(nb):
        S, u_channel, u_pf = _draws(cfg, b)
        lam = S / (2.0 * cfg.sigma)
        alpha = 1.0 - lam * tables.expectations[b]
        beta = lam
        a2, ab, b2 = alpha * alpha, alpha * beta, beta * beta
        probs = (
            a2[None, :] * tables.na[:, None]
            + ab[None, :] * tables.nv[b][:, None]
            + b2[None, :] * tables.nw[b][:, None]
        )  # (n_ch, shots)
        cum = np.cumsum(probs, axis=0)
        total = cum[-1]
        targets = u_channel * total
        picked = np.minimum((cum < targets[None, :]).sum(axis=0), n_ch - 1)

        cu = tables.cu
        cv = tables.cv[b]
        cw = tables.cw[b]
        t2 = u_pf * (
            a2 * tables.na[picked] + ab * tables.nv[b][picked] + b2 * tables.nw[b][picked]
        )
        lo = np.full(S.shape, -1, dtype=np.int64)
        hi = np.full(S.shape, n - 1, dtype=np.int64)
        while int((hi - lo).max()) > 1:
            mid = (lo + hi) // 2
            vals = a2 * cu[picked, mid] + ab * cv[picked, mid] + b2 * cw[picked, mid]
            ge = vals >= t2
            hi = np.where(ge, mid, hi)
            lo = np.where(ge, lo, mid)
        f_idx = hi

        r = tables.expectations[b] + cfg.sigma * S
        c_bin = _bin_indices(cfg.p_f_edges, tables.ps[f_idx])
        ok = c_bin >= 0
        overflow[b] = int((~ok).sum())
        flat = c_bin[ok] * n_ch + picked[ok]
        size = nc * n_ch
        counts_ch[b] += np.bincount(flat, minlength=size).reshape(nc, n_ch)
        sum_r[b] += np.bincount(flat, weights=r[ok], minlength=size).reshape(nc, n_ch)
        sum_r2[b] += np.bincount(
            c_bin[ok], weights=r[ok] ** 2, minlength=nc
        )

    counts = counts_ch.sum(axis=2)
    means = np.full((nb, nc), np.nan)
    ses = np.full((nb, nc), np.nan)
    got = counts > 0
    means[got] = sum_r.sum(axis=2)[got] / counts[got]
    several = counts > 1
    var = np.zeros((nb, nc))
    var[several] = (
        sum_r2[several] - counts[several] * means[several] ** 2
    ) / (counts[several] - 1)
    ses[several] = np.sqrt(np.maximum(var[several], 0.0) / counts[several])
    return MCEstimate(
        means,
        ses,
        counts,
        overflow,
        sum_r,
        counts_ch,
        tables.expectations.copy(),
        cfg,
    )


def run_reference(scheme, state, cfg):
    """Shot-by-shot protocol with explicit state updates; same draws as the
    fast path, so the two agree up to floating-point noise."""
    state.require_grid("run_reference")
    require_complete(scheme, state.grid, state.s)
    grid = state.grid
    dp = grid.dp
    psit = fourier_values(grid, state.values)
    chan_vals = [ch.evaluate(grid.xs, state.s) for ch in scheme.channels]
    n_ch = len(chan_vals)
    nb, nc = cfg.n_i, cfg.n_f
    sum_r = np.zeros((nb, nc, n_ch))
    counts_ch = np.zeros((nb, nc, n_ch), dtype=np.int64)
    overflow = np.zeros(nb, dtype=np.int64)
    expectations = np.empty(nb)

    for b in range(nb):
        mask = (grid.ps >= cfg.p_i_edges[b]) & (grid.ps < cfg.p_i_edges[b + 1])
        expectation = float(np.sum(np.abs(psit[mask]) ** 2) * dp)
        expectations[b] = expectation
        S, u_channel, u_pf = _draws(cfg, b)
        for k in range(cfg.shots_per_bin):
            lam = S[k] / (2.0 * cfg.sigma)
            disturbed = psit + lam * (mask * psit - expectation * psit)
            pos = inverse_fourier_values(grid, disturbed)
            dens = np.stack(
                [np.abs(fourier_values(grid, cv * pos)) ** 2 * dp for cv in chan_vals]
            )
            channel_norms = dens.sum(axis=1)
            cum = np.cumsum(channel_norms)
            xi = min(int((cum < u_channel[k] * cum[-1]).sum()), n_ch - 1)
            cdf = np.cumsum(dens[xi])
            f_idx = int(np.searchsorted(cdf, u_pf[k] * cdf[-1], side="left"))
            r = expectation + cfg.sigma * S[k]
            c = int(_bin_indices(cfg.p_f_edges, grid.ps[f_idx : f_idx + 1])[0])
            if c < 0:
                overflow[b] += 1
                continue
            sum_r[b, c, xi] += r
            counts_ch[b, c, xi] += 1

    counts = counts_ch.sum(axis=2)
    means = np.full((nb, nc), np.nan)
    got = counts > 0
    means[got] = sum_r.sum(axis=2)[got] / counts[got]
    return MCEstimate(
        means,
        np.full((nb, nc), np.nan),
        counts,
        overflow,
        sum_r,
        counts_ch,
        expectations,
        cfg,
    )


def deterministic_cells(scheme, state, cfg, sigma=None, nodes=61):
    """Expected value of the estimator without sampling noise.

    sigma=None gives the weak-probe limit; a finite sigma averages the
    exact normalized update over the probe noise by Gauss-Hermite
    quadrature, exposing the O(sigma^-2) estimator bias deterministically.
    """
    tables = _ShotTables(scheme, state, cfg)
    nb, nc = cfg.n_i, cfg.n_f
    f_bins = _bin_indices(cfg.p_f_edges, tables.ps)
    valid = f_bins >= 0

    def per_cell(arr):  # (n_ch, n) -> (nc,) column-aggregated over channels
        flat = arr[:, valid].sum(axis=0)
        return np.bincount(f_bins[valid], weights=flat, minlength=nc)

    u_cells = per_cell(tables.u)
    means = np.empty((nb, nc))
    for b in range(nb):
        v_cells = per_cell(tables.v[b])
        w_cells = per_cell(tables.w[b])
        exp_b = tables.expectations[b]
        if sigma is None:
            # <r 1_c> -> Re <psi| Pi_b O^dag Proj_c O |psi> = V_c / 2: the
            # sigma-independent pieces cancel exactly in the expansion.
            numerator = 0.5 * v_cells
            denominator = u_cells
        else:
            t, wts = np.polynomial.hermite.hermgauss(nodes)
            s_nodes = np.sqrt(2.0) * t
            wts = wts / np.sqrt(np.pi)
            numerator = np.zeros(nc)
            denominator = np.zeros(nc)
            na = tables.na.sum()
            nv = tables.nv[b].sum()
            nw = tables.nw[b].sum()
            for s_node, wt in zip(s_nodes, wts):
                lam = s_node / (2.0 * sigma)
                alpha = 1.0 - lam * exp_b
                a2, ab, b2 = alpha * alpha, alpha * lam, lam * lam
                cell_mass = a2 * u_cells + ab * v_cells + b2 * w_cells
                norm = a2 * na + ab * nv + b2 * nw
                prob = cell_mass / norm
                numerator += wt * (exp_b + sigma * s_node) * prob
                denominator += wt * prob
        with np.errstate(invalid="ignore", divide="ignore"):
            means[b] = numerator / denominator
    return means
