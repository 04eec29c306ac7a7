"""Which-way measurement schemes: ordered sets of result channels O_xi(x).

A channel is anything that can be evaluated pointwise at (complex-ready)
positions.  Completeness, sum_xi |O_xi(x)|^2 = 1 for (almost) all x, is
what makes a set of channels a valid measurement.
"""

import numpy as np

from .errors import CompletenessError, EvaluationError, SchemeError
from . import expr as _expr

MAX_CHANNELS = 16


class ExprChannel:
    """Channel defined by a parsed grammar expression."""

    def __init__(self, ast):
        self.ast = ast

    def evaluate(self, x, s=None):
        x = np.asarray(x, dtype=float)
        vals = np.asarray(_expr.eval_expr(self.ast, x, s), dtype=complex)
        if vals.shape != x.shape:
            vals = np.full(x.shape, complex(vals))
        return vals

    def __repr__(self):
        return f"ExprChannel({_expr.print_expr(self.ast)})"


class FuncChannel:
    """Channel backed by a python callable f(x, s) -> complex array."""

    def __init__(self, fn, name):
        self.fn = fn
        self.name = name

    def evaluate(self, x, s=None):
        x = np.asarray(x, dtype=float)
        vals = np.asarray(self.fn(x, s), dtype=complex)
        if vals.shape != x.shape:
            vals = np.full(x.shape, complex(vals))
        return vals

    def __repr__(self):
        return f"FuncChannel({self.name})"


class ComboChannel:
    """Linear combination of channels, produced by rebasing."""

    def __init__(self, terms):
        self.terms = [(complex(c), ch) for c, ch in terms]

    def evaluate(self, x, s=None):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for coeff, ch in self.terms:
            out += coeff * ch.evaluate(x, s)
        return out

    def __repr__(self):
        return f"ComboChannel({len(self.terms)} terms)"


class Scheme:
    """Ordered, labelled measurement channels plus structural hints.

    kick_terms is set when the scheme realizes classical momentum kicks,
    a list of (weight, kick) pairs; several closed forms dispatch on it.
    base records which builtin the scheme descends from (rebasing keeps
    it, since every distribution computed here is basis invariant).
    """

    def __init__(self, labels, channels, base="custom", kick_terms=None, params=None):
        if not channels:
            raise SchemeError("a scheme needs at least one channel")
        if len(channels) > MAX_CHANNELS:
            raise SchemeError(f"at most {MAX_CHANNELS} channels supported")
        if len(labels) != len(channels):
            raise SchemeError("labels/channels length mismatch")
        self.labels = list(labels)
        self.channels = list(channels)
        self.base = base
        self.kick_terms = kick_terms
        self.params = dict(params or {})

    def __len__(self):
        return len(self.channels)

    def evaluate(self, x, s=None):
        """Stack of channel values, shape (n_channels, *x.shape)."""
        x = np.asarray(x, dtype=float)
        out = np.stack([ch.evaluate(x, s) for ch in self.channels])
        if not np.all(np.isfinite(out)):
            raise EvaluationError("channel evaluation produced a non-finite value")
        return out

    def contraction(self, a, b, s=None):
        """sum_xi O_xi(a) * conj(O_xi(b)) elementwise over broadcast a, b.

        This combination is invariant under unitary channel rebasing and
        is the only way schemes enter every distribution in the package.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros(shape, dtype=complex)
        for ch in self.channels:
            out += ch.evaluate(np.broadcast_to(a, shape), s) * np.conj(
                ch.evaluate(np.broadcast_to(b, shape), s)
            )
        return out


def parse_scheme(text):
    """Parse scheme text: one channel expression per line.

    Lines may be bare expressions or `O = <expression>`; blank lines and
    `#` comments are skipped.  Channels get labels O0, O1, ...
    """
    channels = []
    consumed = 0
    for raw_line in text.splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            consumed += len(raw_line) + 1
            continue
        if line.startswith("O") and "=" in line:
            head, _, line = line.partition("=")
            if head.strip() != "O":
                raise SchemeError(f"unexpected scheme line {raw_line!r}")
            line = line.strip()
        try:
            ast = _expr.parse_expr(line)
        except _expr.ExpressionError as err:
            abs_offset = consumed + raw_line.find(line) + err.offset
            raise _expr.ExpressionError(err.message, abs_offset, text) from None
        channels.append(ExprChannel(ast))
        consumed += len(raw_line) + 1
    if not channels:
        raise SchemeError("scheme text defines no channels")
    labels = [f"O{k}" for k in range(len(channels))]
    sch = Scheme(labels, channels)
    _probe(sch)
    return sch


def print_scheme(scheme):
    """Inverse of parse_scheme for expression-backed schemes."""
    lines = []
    for ch in scheme.channels:
        if not isinstance(ch, ExprChannel):
            raise SchemeError("only expression channels can be printed")
        lines.append(f"O = {_expr.print_expr(ch.ast)}")
    return "\n".join(lines)


def _probe(scheme, s=1.0):
    """Reject channels that blow up at sample positions."""
    probe = np.concatenate([np.linspace(-10.0, 10.0, 81), [0.0, -0.5, 0.5]])
    scheme.evaluate(probe, s)  # raises EvaluationError on non-finite values


# --- builtins ----------------------------------------------------------


def _sew_angle(x, w):
    ramp = 0.25 * np.pi * (1.0 + np.sin(0.5 * np.pi * np.clip(x / w, -1.0, 1.0)))
    return np.where(x <= -w, 0.0, np.where(x >= w, 0.5 * np.pi, ramp))


def builtin(name, kicks=None, w=None, s=None):
    """Construct a named builtin scheme.

    identity          single flat channel O(x) = 1
    sign              projective sign measurement {theta(x), theta(-x)}
    kicks             classical momentum kicks; `kicks` is a list of
                      (weight, kick) pairs with weights summing to 1
    sew_flat          two smooth channels {cos(angle), sin(angle)} whose
                      half-cosine ramp of half-width `w` is constant
                      outside (-w, w); pass `s` to validate w < s/2
    """
    if name == "identity":
        ch = FuncChannel(lambda x, s_: np.ones_like(x, dtype=complex), "1")
        return Scheme(["1"], [ch], base="identity", kick_terms=[(1.0, 0.0)])
    if name == "sign":
        plus = FuncChannel(lambda x, s_: _expr.theta(x), "theta(x)")
        minus = FuncChannel(lambda x, s_: _expr.theta(-x), "theta(-x)")
        return Scheme(["+", "-"], [plus, minus], base="sign")
    if name == "kicks":
        if not kicks:
            raise SchemeError("kicks builtin needs a list of (weight, kick) pairs")
        terms = [(float(nw), float(k)) for nw, k in kicks]
        total = sum(nw for nw, _ in terms)
        if any(nw < 0 for nw, _ in terms) or abs(total - 1.0) > 1e-9:
            raise SchemeError(f"kick weights must be >= 0 and sum to 1, got {total}")
        channels = []
        labels = []
        for idx, (nw, k) in enumerate(terms):
            amp = np.sqrt(nw)
            channels.append(
                FuncChannel(
                    lambda x, s_, amp=amp, k=k: amp * np.exp(1j * k * x),
                    f"sqrt({nw})*exp(i*{k}*x)",
                )
            )
            labels.append(f"k{idx}")
        return Scheme(labels, channels, base="kicks", kick_terms=terms)
    if name == "sew_flat":
        if w is None or w <= 0:
            raise SchemeError("sew_flat needs a positive half-width w")
        if s is not None and not (w < s / 2):
            raise SchemeError(f"sew_flat half-width w={w} must satisfy w < s/2")
        cos_ch = FuncChannel(
            lambda x, s_, w=w: np.cos(_sew_angle(x, w)).astype(complex), f"cos(angle;w={w})"
        )
        sin_ch = FuncChannel(
            lambda x, s_, w=w: np.sin(_sew_angle(x, w)).astype(complex), f"sin(angle;w={w})"
        )
        return Scheme(["c", "s"], [cos_ch, sin_ch], base="sew_flat", params={"w": w})
    raise SchemeError(f"unknown builtin scheme {name!r}")


# --- operations --------------------------------------------------------


def check_completeness(scheme, grid, s=None, tol=1e-8):
    """Max over grid points of | sum_xi |O_xi(x)|^2 - 1 |.

    Isolated violations (a spike at a single grid point whose neighbours
    are fine) are exempted: they come from step discontinuities where the
    theta(0) = 1/2 convention puts a measure-zero blip that cannot affect
    any integral quantity.
    """
    vals = scheme.evaluate(grid.xs, s)
    residual = np.abs(np.sum(np.abs(vals) ** 2, axis=0) - 1.0)
    bad = residual > tol
    if bad.any():
        left = np.concatenate([[False], bad[:-1]])
        right = np.concatenate([bad[1:], [False]])
        isolated = bad & ~left & ~right
        residual = residual[~isolated]
    return float(residual.max()) if residual.size else 0.0


def require_complete(scheme, grid, s=None, tol=1e-8):
    residual = check_completeness(scheme, grid, s, tol)
    if residual >= tol:
        raise CompletenessError(
            f"scheme is not complete: residual {residual:.3e} >= {tol:.0e}"
        )
    return residual


def visibility(scheme, s):
    """Far-field fringe visibility |sum_xi O_xi(-s/2) O_xi*(s/2)|."""
    return float(np.abs(scheme.contraction(-s / 2.0, s / 2.0, s)))


def rebase(scheme, unitary):
    """Mix the channels by a unitary: O'_eta = sum_xi U[eta, xi] O_xi."""
    u = np.asarray(unitary, dtype=complex)
    m = len(scheme)
    if u.shape != (m, m):
        raise SchemeError(f"unitary shape {u.shape} does not match {m} channels")
    if np.max(np.abs(u.conj().T @ u - np.eye(m))) > 1e-10:
        raise SchemeError("matrix is not unitary to 1e-10")
    channels = [
        ComboChannel([(u[eta, xi], scheme.channels[xi]) for xi in range(m)])
        for eta in range(m)
    ]
    labels = [f"u{eta}" for eta in range(m)]
    return Scheme(
        labels,
        channels,
        base=scheme.base,
        kick_terms=scheme.kick_terms,
        params=scheme.params,
    )


def haar_unitary(dim, rng):
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
