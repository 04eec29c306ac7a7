"""Line-oriented run configuration.

Format: `[section]` headers with `key = value` lines, `#` comments,
whitespace-insensitive.  Sections: grid (xmin, xmax, n), state (kind, s,
a, amplitudes), scheme (builtin plus parameters, or repeated `O = <expr>`
channel lines), run (mode, optional output path, MC binning, wigner slice
position).  Numeric scheme parameters (kick strengths, sew width) may use
the expression grammar with `s` bound, e.g. `kick = 0.5, pi/(2*s)`.
"""

from dataclasses import dataclass, field

from .errors import ConfigError, ExpressionError
from .expr import eval_expr, parse_expr
from .grid import make_grid
from .scheme import Scheme, builtin, parse_scheme
from .state import gaussian_twin_slits, narrow_twin_slits


@dataclass
class RunConfig:
    grid_spec: tuple = None  # (xmin, xmax, n)
    kind: str = "gaussian"
    s: float = 1.0
    a: float = None
    amplitudes: tuple = (2 ** -0.5, 2 ** -0.5)
    scheme_builtin: str = None
    scheme_params: dict = field(default_factory=dict)
    scheme_lines: list = field(default_factory=list)
    mode: str = None  # grid | narrow; defaults from kind
    out: str = None
    n_bins: int = 16
    bin_span: float = None
    wigner_x: float = None

    def resolved_mode(self):
        if self.mode is not None:
            return self.mode
        return "narrow" if self.kind == "narrow" else "grid"


def _sections(text):
    current = None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            out.setdefault(current, [])
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        out[current].append((key.strip().lower(), value.strip(), lineno))
    return out


def _complex_number(value, s=None, where=""):
    """Parse a numeric value through the expression grammar (pi, i, s work)."""
    try:
        return complex(eval_expr(parse_expr(value), 0.0, s))
    except ExpressionError as err:
        raise ConfigError(f"{where}: bad number {value!r}: {err}") from None


def _number(value, s=None, where=""):
    result = _complex_number(value, s, where)
    if abs(result.imag) > 1e-12 * max(1.0, abs(result.real)):
        raise ConfigError(f"{where}: expected a real number, got {result}")
    return float(result.real)


def parse_config(text):
    sections = _sections(text)
    cfg = RunConfig()
    for key, value, lineno in sections.get("grid", []):
        where = f"[grid] line {lineno}"
        if key == "xmin":
            xmin = _number(value, where=where)
        elif key == "xmax":
            xmax = _number(value, where=where)
        elif key == "n":
            n = int(_number(value, where=where))
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    if sections.get("grid"):
        try:
            cfg.grid_spec = (xmin, xmax, n)
        except UnboundLocalError:
            raise ConfigError("[grid] needs xmin, xmax and n") from None

    for key, value, lineno in sections.get("state", []):
        where = f"[state] line {lineno}"
        if key == "kind":
            if value not in ("gaussian", "narrow"):
                raise ConfigError(f"{where}: kind must be gaussian or narrow")
            cfg.kind = value
        elif key == "s":
            cfg.s = _number(value, where=where)
        elif key == "a":
            cfg.a = _number(value, where=where)
        elif key == "amplitudes":
            parts = value.split(",")
            if len(parts) != 2:
                raise ConfigError(f"{where}: amplitudes must be two numbers")
            cfg.amplitudes = tuple(_complex_number(p, where=where) for p in parts)
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")

    kicks = []
    for key, value, lineno in sections.get("scheme", []):
        where = f"[scheme] line {lineno}"
        if key == "builtin":
            cfg.scheme_builtin = value
        elif key == "kick":
            parts = value.split(",")
            if len(parts) != 2:
                raise ConfigError(f"{where}: kick needs 'weight, momentum'")
            kicks.append(tuple(_number(p, cfg.s, where) for p in parts))
        elif key == "w":
            cfg.scheme_params["w"] = _number(value, cfg.s, where)
        elif key == "o":
            cfg.scheme_lines.append(value)
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    if kicks:
        cfg.scheme_params["kicks"] = kicks

    for key, value, lineno in sections.get("run", []):
        where = f"[run] line {lineno}"
        if key == "mode":
            if value not in ("grid", "narrow"):
                raise ConfigError(f"{where}: mode must be grid or narrow")
            cfg.mode = value
        elif key == "out":
            cfg.out = value
        elif key == "n_bins":
            cfg.n_bins = int(_number(value, where=where))
        elif key == "bin_span":
            cfg.bin_span = _number(value, cfg.s, where)
        elif key == "x":
            cfg.wigner_x = _number(value, cfg.s, where)
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")

    if cfg.scheme_builtin is None and not cfg.scheme_lines:
        raise ConfigError("[scheme] must give a builtin or O = ... channel lines")
    if cfg.scheme_builtin is not None and cfg.scheme_lines:
        raise ConfigError("[scheme] cannot mix builtin and custom channels")
    return cfg


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_grid(cfg):
    if cfg.grid_spec is None:
        span = 8.0 * cfg.s
        return make_grid(-span, span, 4096)
    return make_grid(*cfg.grid_spec)


def build_scheme(cfg) -> Scheme:
    if cfg.scheme_lines:
        return parse_scheme("\n".join(cfg.scheme_lines))
    name = cfg.scheme_builtin
    if name == "kicks":
        return builtin("kicks", kicks=cfg.scheme_params.get("kicks"))
    if name == "sew_flat":
        return builtin("sew_flat", w=cfg.scheme_params.get("w"), s=cfg.s)
    return builtin(name)


def build_state(cfg, grid=None):
    if cfg.resolved_mode() == "narrow":
        return narrow_twin_slits(cfg.s, cfg.amplitudes)
    a = cfg.a if cfg.a is not None else cfg.s / 50.0
    grid = grid or build_grid(cfg)
    return gaussian_twin_slits(cfg.s, a, grid, cfg.amplitudes)
