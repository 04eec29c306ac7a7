"""Command line front end.

    wwm <command> --config <path> [--mode grid|narrow] [--out <path>]
        [--sigma f] [--shots n] [--seed u64] [--qmax f] [--nmoments k] [--x f]

Commands: check, pwv, phi, moments, support, simulate, audit, wigner,
momentum-dist.  CSV output uses %.12e formatting with point masses as
leading `# atom,<location>,<weight>` comment lines, and is written
atomically (temp file + rename).  Exit codes: 0 success, 1 validation
failure, 2 parse error.
"""

import argparse
import os
import sys
import tempfile

import numpy as np

from . import audit as audit_mod
from .config import build_grid, build_scheme, build_state, load_config
from .errors import ConfigError, ExpressionError, WWMError
from .scheme import check_completeness, visibility
from .simulate import MCConfig, default_bins, run_weak_experiment
from .state import apply_wwm, momentum_density
from .transfer import char_fn, moments, support_metric, verify_wigner_identity, wigner_kernel
from .weakvalue import conditional_cells, pwv_joint, pwv_marginal

FMT = "%.12e"


def _write_out(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".wwm-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, columns, comments=()):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    rows = np.column_stack(columns)
    for row in rows:
        lines.append(",".join(FMT % v for v in row))
    return "\n".join(lines) + "\n"


def _dist_csv(dist, s):
    comments = [f"atom,{FMT % loc},{FMT % w}" for loc, w in dist.atoms]
    return _csv(
        ("p", "p_hbar_over_s", "density", "density_hbar_over_s"),
        (dist.ps, dist.ps * s, dist.density, dist.density / s),
        comments,
    )


def _build(cfg):
    grid = build_grid(cfg)
    scheme = build_scheme(cfg)
    state = build_state(cfg, grid)
    return grid, scheme, state


def cmd_check(cfg, args):
    grid = build_grid(cfg)
    scheme = build_scheme(cfg)
    residual = check_completeness(scheme, grid, cfg.s)
    vis = visibility(scheme, cfg.s)
    text = (
        f"completeness_residual = {residual:.12e}\n"
        f"visibility = {vis:.12e}\n"
    )
    _write_out(args.out or cfg.out, text)
    return 0 if residual < 1e-8 else 1


def cmd_pwv(cfg, args):
    grid, scheme, state = _build(cfg)
    dist = pwv_marginal(scheme, state, grid=grid)
    _write_out(args.out or cfg.out, _dist_csv(dist, cfg.s))
    return 0


def cmd_phi(cfg, args):
    _, scheme, state = _build(cfg)
    qmax = args.qmax if args.qmax is not None else 4.0 * cfg.s
    dq = cfg.s / 64.0
    half = max(8, int(round(qmax / dq)))
    qs = dq * np.arange(-half, half + 1)
    chi = char_fn(scheme, state, qs=qs)
    text = _csv(
        ("q", "re_chi", "im_chi"),
        (qs, chi.values.real, chi.values.imag),
        [
            f"asymptote_even,{FMT % np.real(chi.even_const)}",
            f"asymptote_odd_imag,{FMT % np.imag(chi.odd_const)}",
        ],
    )
    _write_out(args.out or cfg.out, text)
    return 0


def cmd_moments(cfg, args):
    _, scheme, state = _build(cfg)
    n_max = args.nmoments
    qs = (cfg.s / 128.0) * np.arange(-16, 17)
    rep = moments(char_fn(scheme, state, qs=qs), n_max)
    lines = ["n,moment"]
    for k, value in enumerate(rep.values, start=1):
        lines.append(f"{k},{FMT % value}")
    lines.append(f"# imag_residual,{FMT % rep.imag_residual}")
    _write_out(args.out or cfg.out, "\n".join(lines) + "\n")
    return 0


def cmd_support(cfg, args):
    grid, scheme, state = _build(cfg)
    dist = pwv_marginal(scheme, state, grid=grid)
    s = cfg.s
    rows = [
        ("half_width", "half_width_hbar_over_s", "outside_abs_mass"),
        (FMT % (np.pi / (3 * s)), FMT % (np.pi / 3), FMT % support_metric(dist, np.pi / (3 * s))),
        (FMT % (1.0 / s), FMT % 1.0, FMT % support_metric(dist, 1.0 / s)),
    ]
    _write_out(args.out or cfg.out, "\n".join(",".join(r) for r in rows) + "\n")
    return 0


def cmd_simulate(cfg, args):
    grid, scheme, state = _build(cfg)
    state.require_grid("simulate")
    span = cfg.bin_span if cfg.bin_span is not None else 6.0 * np.pi / cfg.s
    edges = default_bins(cfg.s, cfg.n_bins, span)
    mc_cfg = MCConfig(
        sigma=args.sigma,
        shots_per_bin=args.shots,
        p_i_edges=edges,
        p_f_edges=edges,
        seed=args.seed,
    )
    est = run_weak_experiment(scheme, state, mc_cfg)
    oracle = conditional_cells(pwv_joint(scheme, state), edges, edges)
    lines = [
        f"# sigma,{FMT % mc_cfg.sigma}",
        f"# shots_per_bin,{mc_cfg.shots_per_bin}",
        f"# seed,{mc_cfg.seed}",
        "pi_lo,pi_hi,pf_lo,pf_hi,mean,std_error,count,oracle",
    ]
    nb, nc = mc_cfg.n_i, mc_cfg.n_f
    for b in range(nb):
        for c in range(nc):
            lines.append(
                ",".join(
                    [
                        FMT % edges[b],
                        FMT % edges[b + 1],
                        FMT % edges[c],
                        FMT % edges[c + 1],
                        FMT % est.means[b, c] if est.counts[b, c] else "nan",
                        FMT % est.std_errors[b, c] if est.counts[b, c] > 1 else "nan",
                        str(int(est.counts[b, c])),
                        FMT % oracle[b, c] if np.isfinite(oracle[b, c]) else "nan",
                    ]
                )
            )
    _write_out(args.out or cfg.out, "\n".join(lines) + "\n")
    return 0


def cmd_audit(cfg, args):
    grid, scheme, state = _build(cfg)
    report = audit_mod.run_audit(scheme, state, grid=grid, seed=args.seed)
    if args.out or cfg.out:
        rows = audit_mod.csv_rows(report)
        _write_out(args.out or cfg.out, "\n".join(",".join(r) for r in rows) + "\n")
    sys.stdout.write(audit_mod.render_text(report) + "\n")
    return 0


def cmd_wigner(cfg, args):
    grid, scheme, state = _build(cfg)
    state.require_grid("wigner")
    x = args.x if args.x is not None else (
        cfg.wigner_x if cfg.wigner_x is not None else cfg.s / 4.0
    )
    dist = wigner_kernel(scheme, x, grid, cfg.s)
    residual = verify_wigner_identity(scheme, state)
    comments = [f"x,{FMT % x}", f"identity_residual,{FMT % residual}"]
    comments += [f"atom,{FMT % loc},{FMT % w}" for loc, w in dist.atoms]
    text = _csv(
        ("p", "p_hbar_over_s", "density", "density_hbar_over_s"),
        (dist.ps, dist.ps * cfg.s, dist.density, dist.density / cfg.s),
        comments,
    )
    _write_out(args.out or cfg.out, text)
    return 0


def cmd_momentum_dist(cfg, args):
    grid, scheme, state = _build(cfg)
    state.require_grid("momentum-dist")
    initial = momentum_density(state)
    final = momentum_density(apply_wwm(scheme, state))
    text = _csv(
        ("p", "p_hbar_over_s", "initial", "final"),
        (grid.ps, grid.ps * cfg.s, initial, final),
    )
    _write_out(args.out or cfg.out, text)
    return 0


COMMANDS = {
    "check": cmd_check,
    "pwv": cmd_pwv,
    "phi": cmd_phi,
    "moments": cmd_moments,
    "support": cmd_support,
    "simulate": cmd_simulate,
    "audit": cmd_audit,
    "wigner": cmd_wigner,
    "momentum-dist": cmd_momentum_dist,
}


def make_parser():
    parser = argparse.ArgumentParser(
        prog="wwm",
        description="Weak-valued momentum transfer for which-way measurements",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--mode", choices=["grid", "narrow"])
    parser.add_argument("--out", help="output path (default stdout)")
    parser.add_argument("--sigma", type=float, default=10.0)
    parser.add_argument("--shots", type=int, default=10 ** 4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--qmax", type=float)
    parser.add_argument("--nmoments", type=int, default=4)
    parser.add_argument("--x", type=float, help="position for the wigner kernel slice")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.mode:
            cfg.mode = args.mode
            cfg.kind = "narrow" if args.mode == "narrow" else "gaussian"
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ExpressionError) as err:
        print(f"wwm: parse error: {err}", file=sys.stderr)
        return 2
    except (WWMError, OSError) as err:
        print(f"wwm: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
