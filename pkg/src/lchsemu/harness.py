"""Experiment harness: config parsing, scans, CSV output and fits."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .assembler import build_layout, run
from .lchs_core import Kernel, LchsConfig, classical_lchs_apply, nk_for_dk, suggest_nk
from .linalg import AdeParams, build_ade_matrix, error_norms, expm, gaussian_initial_state, hermitian_split, spectral_norm
from .qsp_selector import PhaseCache

SCHEMA_VERSION = 1
SCAN_KINDS = ("kmax", "beta", "nk", "time", "classical_only")

# fit anchors for the improved kernel error law eps = a exp(-b k_max^beta)
LAW_A = 0.119
LAW_B = 0.5


class ConfigError(ValueError):
    """Invalid configuration (usage error)."""


_FLOAT_KEYS = {"beta", "k_max", "v", "D", "t", "eps_qsp", "dk", "eps_lchs", "center", "width", "nk_c"}
_INT_KEYS = {"n_x"}
_STR_KEYS = {"kernel", "init_mode", "layout", "out", "scan", "cache_dir", "n_k", "aa", "grid"}

DEFAULTS = {
    "kernel": "improved",
    "beta": 0.7,
    "k_max": 10.0,
    "n_k": "6",
    "n_x": 4,
    "v": 1.0,
    "D": 0.01,
    "t": 0.4,
    "eps_qsp": 1e-8,
    "aa": "auto",
    "init_mode": "inject",
    "layout": "compact",
    "dk": 0.04,
    "center": 0.5,
    "width": 0.05,
    "nk_c": 1.0,
}


def parse_config_text(text: str) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _FLOAT_KEYS | _INT_KEYS | _STR_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {k!r}")
        try:
            out[k] = float(v) if k in _FLOAT_KEYS else int(v) if k in _INT_KEYS else v
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {k}: {v!r}") from None
    return out


def load_config(path: str | os.PathLike) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


@dataclass
class RunSettings:
    """Everything one scan point needs."""

    cfg: LchsConfig
    problem: AdeParams
    init_mode: str = "inject"
    layout: str = "compact"
    center: float = 0.5
    width: float = 0.05
    cache_dir: str | None = None
    dk: float = 0.04


def _resolve_nk(raw, k_max: float, dk: float, eps_lchs, norm_AL: float, t: float, c: float) -> int:
    if isinstance(raw, (int, np.integer)):
        return int(raw)
    raw = str(raw).strip()
    if raw == "auto":
        return nk_for_dk(k_max, dk)
    if raw == "cond":
        if eps_lchs is None:
            raise ConfigError("n_k=cond needs eps_lchs")
        return suggest_nk(LchsConfig(k_max=k_max, t=t, eps_lchs=eps_lchs), norm_AL, c)
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"n_k must be an integer, 'auto' or 'cond', got {raw!r}") from None


def settings_from_mapping(d: dict) -> RunSettings:
    """Validate a flat mapping and build configs."""
    m = {**DEFAULTS, **d}
    try:
        problem = AdeParams(int(m["n_x"]), float(m["v"]), float(m["D"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    kernel = str(m["kernel"])
    if kernel not in (k.value for k in Kernel):
        raise ConfigError(f"kernel must be 'special' or 'improved', got {kernel!r}")
    beta, k_max, t = float(m["beta"]), float(m["k_max"]), float(m["t"])
    if kernel == "improved" and not 0 < beta < 1:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")
    if k_max <= 0:
        raise ConfigError(f"k_max must be positive, got {k_max}")
    aa = str(m["aa"])
    aa_rounds = None if aa == "auto" else int(aa)
    norm_AL = spectral_norm(hermitian_split(build_ade_matrix(problem))[0]) if str(m["n_k"]) == "cond" else 0.0
    n_k = _resolve_nk(m["n_k"], k_max, float(m["dk"]), m.get("eps_lchs"), norm_AL, t, float(m["nk_c"]))
    try:
        cfg = LchsConfig(
            kernel=kernel,
            beta=beta,
            k_max=k_max,
            n_k=n_k,
            t=t,
            eps_qsp=float(m["eps_qsp"]),
            aa_rounds=aa_rounds,
            eps_lchs=m.get("eps_lchs"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if m["init_mode"] not in ("inject", "circuit"):
        raise ConfigError("init_mode must be 'inject' or 'circuit'")
    if m["layout"] not in ("compact", "full"):
        raise ConfigError("layout must be 'compact' or 'full'")
    return RunSettings(cfg, problem, m["init_mode"], m["layout"], float(m["center"]), float(m["width"]), m.get("cache_dir"), float(m["dk"]))


def check_budget(s: RunSettings) -> None:
    """Raise :class:`ConfigError` if the circuit does not fit the engine."""
    try:
        build_layout(s.problem.n_x, s.cfg.n_k, s.layout, magnitude_qubit=False)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class ScanSpec:
    scan_kind: str
    grid: list
    base: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        if self.scan_kind not in SCAN_KINDS:
            raise ConfigError(f"scan kind must be one of {SCAN_KINDS}, got {self.scan_kind!r}")
        if not self.grid:
            raise ConfigError("scan grid is empty")

    @classmethod
    def from_mapping(cls, d: dict, out: str | None = None) -> "ScanSpec":
        kind = d.get("scan")
        if kind is None:
            raise ConfigError("config needs a 'scan' key")
        grid_raw = d.get("grid", "")
        grid = [g.strip() for g in str(grid_raw).split(",") if g.strip()]
        base = {k: v for k, v in d.items() if k not in ("scan", "grid")}
        return cls(kind, grid, base, out or d.get("out"))

    def point_mapping(self, value) -> dict:
        m = dict(self.base)
        key = {"kmax": "k_max", "beta": "beta", "nk": "n_k", "time": "t"}.get(self.scan_kind)
        if key is not None:
            m[key] = value if key == "n_k" else float(value)
        return m

    def points(self) -> list[RunSettings]:
        return [settings_from_mapping(self.point_mapping(v)) for v in self.grid]


# --- rows ---------------------------------------------------------------------


def classical_row(s: RunSettings) -> dict:
    """Truncation error of the discretized LCHS sum against ``expm``."""
    cfg, p = s.cfg, s.problem
    A = build_ade_matrix(p)
    psi0 = gaussian_initial_state(p.n_x, s.center, s.width)
    approx = classical_lchs_apply(A, psi0, cfg)
    exact = expm(-A * cfg.t) @ psi0
    l2, linf = error_norms(approx, exact)
    return {
        "kernel": cfg.kernel.value,
        "beta": cfg.beta,
        "k_max": cfg.k_max,
        "n_k": cfg.n_k,
        "dk": cfg.dk,
        "n_x": p.n_x,
        "t": cfg.t,
        "eps_l2": l2,
        "eps_linf": linf,
    }


def circuit_row(s: RunSettings) -> dict:
    psi0 = gaussian_initial_state(s.problem.n_x, s.center, s.width)
    cache = PhaseCache(s.cache_dir) if s.cache_dir else None
    res = run(s.cfg, s.problem, psi0, layout_mode=s.layout, init_mode=s.init_mode, cache=cache)
    row = res.row()
    row["init_mode"] = s.init_mode
    row["layout"] = s.layout
    return row


def map_points(fn, points: Sequence, workers: int = 1) -> list:
    """Evaluate ``fn`` over ``points``, results in input order."""
    if workers <= 1 or len(points) <= 1:
        return [fn(p) for p in points]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, points))


# --- fits ---------------------------------------------------------------------


@dataclass(frozen=True)
class LawFit:
    a: float
    b: float
    r2: float


def fit_kernel_law(k_max: Sequence[float], eps: Sequence[float], beta: float = 0.7) -> LawFit:
    """Least squares fit of ``log eps = log a - b k_max^beta``."""
    x = np.asarray(k_max, dtype=float) ** beta
    y = np.log(np.asarray(eps, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    return LawFit(float(math.exp(icpt)), float(-slope), r_squared(x, y, slope, icpt))


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r2: float


def r_squared(x, y, slope, icpt) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    ss_res = float(np.sum((y - (slope * x + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def fit_line(x, y) -> LineFit:
    slope, icpt = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return LineFit(float(slope), float(icpt), r_squared(x, y, slope, icpt))


def increments_at_most_linear(n_values: Sequence[int], counts: Sequence[float], slack: float = 1.1) -> tuple[bool, list[float]]:
    """Check that ``counts[i+1] - counts[i]`` grows at most linearly in ``n``.

    Each increment is compared with the first one scaled by ``n / n_first``
    (times ``slack``). Proportional-to-``2**n`` growth fails this test.
    """
    n = list(n_values)
    d = [float(b - a) for a, b in zip(counts, counts[1:])]
    ok = all(di <= slack * d[0] * (n[i + 1] / n[1]) for i, di in enumerate(d)) and d[0] > 0
    return ok, d


# --- CSV ----------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def csv_text(rows: Iterable[dict]) -> str:
    rows = list(rows)
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    if not rows:
        return buf.getvalue()
    cols = list(rows[0].keys())
    for r in rows[1:]:
        cols += [k for k in r if k not in cols]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def write_csv(rows: Iterable[dict], path: str | os.PathLike | None) -> str:
    text = csv_text(rows)
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def read_csv(path: str | os.PathLike) -> list[dict]:
    """Rows with numeric fields converted to float."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# schema_version="):
        raise ValueError(f"{path}: missing schema_version header")
    version = int(lines[0].split("=", 1)[1])
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {version}")
    rows = []
    for rec in csv.DictReader(lines[1:]):
        row = {}
        for k, v in rec.items():
            if k is None or v is None:
                raise ValueError(f"{path}: malformed row {rec}")
            try:
                row[k] = float(v)
            except ValueError:
                row[k] = v
        rows.append(row)
    return rows


# --- commands -----------------------------------------------------------------


def cmd_classical(scan: ScanSpec, workers: int = 1) -> tuple[list[dict], dict]:
    """Classical truncation-error scan; returns rows and fit summary."""
    rows = map_points(classical_row, scan.points(), workers)
    return rows, summarize(rows)


def cmd_circuit(settings: RunSettings) -> dict:
    check_budget(settings)
    return circuit_row(settings)


def cmd_scan(scan: ScanSpec, workers: int = 1) -> tuple[list[dict], dict]:
    """Circuit scan over t, n_k, k_max or beta."""
    if scan.scan_kind == "classical_only":
        return cmd_classical(scan, workers)
    pts = scan.points()
    for p in pts:
        check_budget(p)
    rows = map_points(circuit_row, pts, workers)
    return rows, summarize(rows)


def summarize(rows: list[dict]) -> dict:
    """Fits that apply to the varying column of a result table."""
    out: dict = {}
    if len(rows) < 2:
        return out

    def varies(k):
        return k in rows[0] and len({r[k] for r in rows}) > 1

    if "eps_l2" in rows[0] and varies("k_max"):
        if rows[0].get("kernel") == "improved":
            fit = fit_kernel_law([r["k_max"] for r in rows], [r["eps_l2"] for r in rows], float(rows[0]["beta"]))
            out.update(fit_a=fit.a, fit_b=fit.b, fit_r2=fit.r2)
        else:
            prod = [r["eps_l2"] * r["k_max"] for r in rows]
            out.update(eps_kmax_ratio=max(prod) / min(prod))
    if "eps_l2" in rows[0] and varies("beta"):
        out["beta_argmin"] = min(rows, key=lambda r: r["eps_l2"])["beta"]
    if "n_gates" in rows[0] and varies("t"):
        f = fit_line([r["t"] for r in rows], [r["n_gates"] for r in rows])
        out.update(gates_vs_t_slope=f.slope, gates_vs_t_r2=f.r2)
        q = fit_line([r["alpha_c"] * r["t"] for r in rows], [r["n_queries"] for r in rows])
        out.update(queries_vs_tau_slope=q.slope, queries_vs_tau_intercept=q.intercept, queries_vs_tau_r2=q.r2)
        ps = [r["success_probability"] for r in rows]
        out["success_decreasing"] = all(b <= a for a, b in zip(ps, ps[1:]))
    if "n_gates" in rows[0] and varies("n_k"):
        nk = [int(r["n_k"]) for r in rows]
        ok, d = increments_at_most_linear(nk, [r["n_gates"] for r in rows])
        okc, dc = increments_at_most_linear(nk, [r["n_gates_core"] for r in rows])
        out.update(gate_increments_linear=ok, core_increments_linear=okc)
        ps = [r["success_probability"] for r in rows]
        out["success_ratio"] = max(ps) / min(ps)
    return out


# --- report -------------------------------------------------------------------

# thresholds of the acceptance checks a report can evaluate from one table
CHECKS = {
    "fit_b": (0.35, 0.65),
    "fit_a": (LAW_A / 3, LAW_A * 3),
    "eps_kmax_ratio": (0.0, 5.0),
    "beta_argmin": (0.7, 0.8),
    "gates_vs_t_r2": (0.99, math.inf),
    "gates_vs_t_slope": (0.0, math.inf),
    "success_ratio": (0.0, 2.0),
}
_BOOL_CHECKS = ("success_decreasing", "gate_increments_linear")

# (x, y) columns written as plot data, keyed by the varying column
_PLOT_COLUMNS = {
    "k_max": ("eps_l2", "eps_linf"),
    "beta": ("eps_l2",),
    "t": ("n_gates", "success_probability", "err_expm_l2"),
    "n_k": ("n_gates", "n_gates_core", "success_probability"),
}


def check_summary(summary: dict) -> dict[str, bool]:
    """Pass/fail for every summary key that has a threshold."""
    out = {}
    for k, (lo, hi) in CHECKS.items():
        if k in summary:
            v = summary[k]
            out[k] = bool(lo <= v <= hi) if k != "gates_vs_t_slope" else v > 0
    for k in _BOOL_CHECKS:
        if k in summary:
            out[k] = bool(summary[k])
    return out


def plot_data(rows: list[dict], out_dir: str | os.PathLike, stem: str) -> list[Path]:
    """Write two-column ``x y`` files for the varying column of ``rows``."""
    written = []
    if len(rows) < 2:
        return written
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for x, ys in _PLOT_COLUMNS.items():
        if x not in rows[0] or len({r[x] for r in rows}) < 2:
            continue
        for y in ys:
            if y not in rows[0]:
                continue
            p = out_dir / f"{stem}_{y}_vs_{x}.dat"
            p.write_text("".join(f"{_fmt(float(r[x]))} {_fmt(float(r[y]))}\n" for r in rows))
            written.append(p)
    return written


def cmd_report(paths: Sequence[str], plot_dir: str | None = None) -> tuple[str, bool]:
    """Summary text for each CSV and whether every applicable check passed.

    Raises:
        ConfigError: if ``paths`` is empty.
        ValueError: on a malformed CSV.
    """
    if not paths:
        raise ConfigError("report needs at least one CSV file")
    lines, all_ok = [], True
    for path in paths:
        rows = read_csv(path)
        lines.append(f"== {path}: {len(rows)} rows")
        if len(rows) == 1:
            lines += [f"  {k} = {_fmt(v)}" for k, v in rows[0].items()]
            continue
        summary = summarize(rows)
        for k, v in summary.items():
            lines.append(f"  {k} = {_fmt(v)}")
        for k, ok in check_summary(summary).items():
            lines.append(f"  [{'PASS' if ok else 'FAIL'}] {k}")
            all_ok &= ok
        if plot_dir:
            for p in plot_data(rows, plot_dir, Path(path).stem):
                lines.append(f"  plot data: {p}")
    return "\n".join(lines) + "\n", all_ok
