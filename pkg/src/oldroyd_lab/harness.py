"""Decay experiments: configuration, runs, log-log fits and CSV output."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from . import spectral as sp
from .linear_oracle import DecayPrediction, RadialProfile, l2_decay_curve, predicted_rate
from .littlewood_paley import lemma_ratio_commutator, lemma_ratio_product, make_partition
from .solver import (
    BlowUpError,
    DiagnosticSpec,
    StepControl,
    advance_to,
    diagnostics,
    saturating_initial_data,
    write_checkpoint,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "ExperimentConfig",
    "DecayFit",
    "FitError",
    "ExperimentResult",
    "fit_decay",
    "run_experiment",
    "load_config",
    "apply_overrides",
    "read_series_csv",
    "box_guard",
    "sample_times",
    "lemma_census",
]

log = logging.getLogger(__name__)


class FitError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "linear-oracle"  # or "nonlinear-box"
    n: int = 2
    s: float = 0.75
    p: float = 2.0
    q: float = 2.0
    alphas: list = field(default_factory=lambda: [0.0])
    check_window: bool = True
    # grid
    N: int = 512
    L: float = 32 * math.pi
    dealias: float = 2.0 / 3.0
    # data profile
    theta: float | None = None  # default s - n/2 + delta
    delta: float = 0.05
    r_cut: float = 1.0
    A: float = 1.0
    tau0: str = "zero"
    # solver
    b: float = 0.0
    dt: float = 0.1
    cfl: float = 0.5
    order: int = 3
    j0: int = 0
    half_coupling: bool = True
    # sampling and fit
    t_start: float = 1.0
    t_end: float = 1.0e4
    samples_per_decade: int = 16
    fit_window: tuple = (1.0e2, 1.0e4)
    tolerance: float | None = None  # default 0.05 oracle / 0.15 box
    out: str | None = None
    seed: int = 0

    _SECTIONS = {
        "grid": {"N": "N", "L": "L", "dealias": "dealias"},
        "profile": {"theta": "theta", "delta": "delta", "r_cut": "r_cut", "A": "A", "tau0": "tau0"},
        "solver": {"b": "b", "dt": "dt", "cfl": "cfl", "order": "order", "j0": "j0",
                   "half_coupling": "half_coupling"},
        "time": {"t_start": "t_start", "t_end": "t_end", "samples_per_decade": "samples_per_decade"},
        "fit": {"window": "fit_window", "tolerance": "tolerance"},
        "output": {"dir": "out"},
    }

    @property
    def profile_theta(self) -> float:
        return self.s - self.n / 2 + self.delta if self.theta is None else self.theta

    @property
    def s_effective(self) -> float:
        """Regularity index the sharp data actually saturates: theta + n/2."""
        return self.profile_theta + self.n / 2

    @property
    def fit_tolerance(self) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return 0.05 if self.kind == "linear-oracle" else 0.15

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        flat = {}
        names = {f.name for f in fields(cls)}
        for key, val in data.items():
            if isinstance(val, dict):
                if key not in cls._SECTIONS:
                    raise ValueError(f"unknown config table [{key}]")
                for k2, v2 in val.items():
                    if k2 not in cls._SECTIONS[key]:
                        raise ValueError(f"unknown config key {key}.{k2}")
                    flat[cls._SECTIONS[key][k2]] = v2
            elif key in names:
                flat[key] = val
            else:
                raise ValueError(f"unknown config key {key}")
        if "fit_window" in flat:
            flat["fit_window"] = tuple(float(x) for x in flat["fit_window"])
        if "alphas" in flat:
            flat["alphas"] = [float(a) for a in np.atleast_1d(flat["alphas"])]
        if isinstance(flat.get("q"), str) and flat["q"].lower() in ("inf", "infinity"):
            flat["q"] = math.inf
        return cls(**flat)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> list[DecayPrediction]:
        """Check the configuration; returns the theory prediction per alpha."""
        if self.kind not in ("linear-oracle", "nonlinear-box"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not 0 < self.t_start < self.t_end:
            raise ValueError("need 0 < t_start < t_end")
        lo, hi = self.fit_window
        if not lo < hi:
            raise ValueError("fit window must satisfy t_lo < t_hi")
        if self.kind == "nonlinear-box":
            guard = box_guard(self.L)
            if self.t_end > guard * (1 + 1e-12):
                raise ValueError(f"t_end={self.t_end} exceeds the box-effect guard {guard:.6g}")
        # nominal check first so window violations name the nominal parameters
        preds = []
        for a in self.alphas:
            predicted_rate(self.n, self.s, a, self.q, self.p, check_window=self.check_window)
            preds.append(predicted_rate(self.n, self.s_effective, a, self.q, self.p,
                                        check_window=self.check_window))
        return preds


def box_guard(L: float) -> float:
    """Latest time a box of side L is trusted to mimic whole-space decay."""
    return (L / (2 * math.pi)) ** 2 / 4


def sample_times(t_start: float, t_end: float, per_decade: int) -> np.ndarray:
    decades = math.log10(t_end / t_start)
    num = max(2, int(round(decades * per_decade)) + 1)
    return np.logspace(math.log10(t_start), math.log10(t_end), num)


@dataclass
class DecayFit:
    column: str
    window: tuple
    slope: float
    stderr: float
    intercept: float
    samples: int
    theory: DecayPrediction | None = None
    tolerance: float | None = None
    verdict: str = "none"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def fit_decay(t, norms, window, theory: DecayPrediction | None = None,
              tolerance: float = 0.05, column: str = "norm") -> DecayFit:
    """Least squares of log(norm) against log(1 + t) inside ``window``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(norms, dtype=float)
    lo, hi = window
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if sel.sum() < 8:
        raise FitError(f"fewer than 8 samples in window [{lo}, {hi}] ({int(sel.sum())})")
    ys = y[sel]
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise FitError("zero norm in fit window" if np.any(ys == 0) else "non-positive or non-finite norm")
    x = np.log1p(t[sel])
    ly = np.log(ys)
    if np.ptp(ly) == 0:
        slope, intercept, stderr = 0.0, float(ly[0]), 0.0
    else:
        res = stats.linregress(x, ly)
        slope, intercept, stderr = float(res.slope), float(res.intercept), float(res.stderr)
    fit = DecayFit(column, (lo, hi), slope, stderr, intercept, int(sel.sum()), theory, tolerance)
    if theory is not None:
        fit.verdict = "pass" if abs(slope + theory.rate) <= tolerance else "fail"
    return fit


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    columns: dict
    fits: list
    paths: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.fits) and all(f.passed for f in self.fits)


def _fmt(x) -> str:
    return repr(float(x))


def _alpha_tag(a: float) -> str:
    return f"{a:g}"


def _q_tag(q: float) -> str:
    return "inf" if math.isinf(q) else f"{q:g}"


def write_series_csv(path: Path, columns: dict) -> None:
    names = list(columns)
    rows = zip(*(columns[k] for k in names))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_series_csv(path) -> dict:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        names = next(r)
        data = [[float(v) for v in row] for row in r if row]
    arr = np.array(data, dtype=float).reshape(-1, len(names))
    return {k: arr[:, i] for i, k in enumerate(names)}


def write_fits_csv(path: Path, fits: list) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["column", "t_lo", "t_hi", "samples", "slope", "stderr", "theory_rate",
                "tolerance", "verdict"])
    for f in fits:
        rate = "" if f.theory is None else _fmt(f.theory.rate)
        tol = "" if f.tolerance is None else _fmt(f.tolerance)
        w.writerow([f.column, _fmt(f.window[0]), _fmt(f.window[1]), f.samples, _fmt(f.slope),
                    _fmt(f.stderr), rate, tol, f.verdict])
    Path(path).write_text(buf.getvalue())


def _fit_or_reject(t, y, cfg, theory, column) -> DecayFit:
    try:
        return fit_decay(t, y, cfg.fit_window, theory, cfg.fit_tolerance, column)
    except FitError as exc:
        log.warning("fit of %s rejected: %s", column, exc)
        return DecayFit(column, cfg.fit_window, math.nan, math.nan, math.nan, 0, theory,
                        cfg.fit_tolerance, f"rejected: {exc}")


def _run_linear(cfg: ExperimentConfig, preds) -> tuple[dict, list]:
    times = sample_times(cfg.t_start, cfg.t_end, cfg.samples_per_decade)
    profile = RadialProfile(theta=cfg.profile_theta, n=cfg.n, r_cut=cfg.r_cut, A=cfg.A)
    columns = {"t": times}
    fits = []
    for a, pred in zip(cfg.alphas, preds):
        name = f"norm_W_{_alpha_tag(a)}_2"
        columns[name] = l2_decay_curve(profile, a, times, half_coupling=cfg.half_coupling)
        fits.append(_fit_or_reject(times, columns[name], cfg, pred, name))
    return columns, fits


def _run_box(cfg: ExperimentConfig, preds, outdir: Path | None) -> tuple[dict, list]:
    if cfg.theta is not None:
        raise ValueError("nonlinear-box runs take theta from s and delta")
    grid = sp.Grid(cfg.n, cfg.N, cfg.L, cfg.dealias)
    state = saturating_initial_data(grid, cfg.s, cfg.delta, cfg.r_cut, cfg.A, cfg.seed,
                                    cfg.tau0, cfg.b)
    pairs = tuple((a, cfg.q) for a in cfg.alphas)
    dspec = DiagnosticSpec(norms=pairs, p=cfg.p, s=cfg.s, j0=cfg.j0)
    part = make_partition(grid, cfg.j0)
    control = StepControl(dt=cfg.dt, cfl=cfg.cfl, order=cfg.order)
    times = np.concatenate([[0.0], sample_times(cfg.t_start, cfg.t_end, cfg.samples_per_decade)])
    norm_names = []
    for a, q in pairs:
        for fld in ("u", "gamma", "pair"):
            norm_names.append((f"norm_{fld}_{_alpha_tag(a)}_{_q_tag(q)}", (fld, a, q)))
    extra = ["energy", "dissipation", "div_residual", "besov_low", "besov_high_u",
             "besov_high_gamma", "besov_negs"]
    columns = {"t": []}
    for name, _ in norm_names:
        columns[name] = []
    for name in extra:
        columns[name] = []
    blowup = None
    for t in times:
        try:
            state = advance_to(state, t, control)
        except BlowUpError as exc:
            blowup = exc
            break
        rec = diagnostics(state, dspec, part)
        columns["t"].append(rec.t)
        for name, key in norm_names:
            columns[name].append(rec.norms[key])
        for name in extra:
            columns[name].append(getattr(rec, name))
        log.info("t=%.4g pair-norm=%.4e", rec.t, columns[norm_names[-1][0]][-1])
    columns = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
    if blowup is not None:
        if outdir is not None:
            write_series_csv(outdir / "series.partial.csv", columns)
        raise blowup
    if outdir is not None:
        write_checkpoint(outdir / "final.oldb", state)
    fits = []
    for a, pred in zip(cfg.alphas, preds):
        name = f"norm_pair_{_alpha_tag(a)}_{_q_tag(cfg.q)}"
        fits.append(_fit_or_reject(columns["t"], columns[name], cfg, pred, name))
    return columns, fits


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    preds = cfg.validate()
    outdir = Path(cfg.out) if cfg.out else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "linear-oracle":
        columns, fits = _run_linear(cfg, preds)
    else:
        columns, fits = _run_box(cfg, preds, outdir)
    res = ExperimentResult(cfg, columns, fits)
    if outdir is not None:
        write_series_csv(outdir / "series.csv", columns)
        write_fits_csv(outdir / "fits.csv", fits)
        res.paths = {"series": outdir / "series.csv", "fits": outdir / "fits.csv"}
    return res


# -- configuration files --------------------------------------------------------------------

def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return ExperimentConfig.from_dict(tomllib.load(fh))


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply ``key=value`` strings; keys are field names or ``table.key``."""
    data = {}
    for item in overrides or ():
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        key = key.strip()
        val = _parse_value(val.strip())
        if "." in key:
            table, sub = key.split(".", 1)
            if table not in ExperimentConfig._SECTIONS or sub not in ExperimentConfig._SECTIONS[table]:
                raise ValueError(f"unknown config key {key}")
            key = ExperimentConfig._SECTIONS[table][sub]
        data[key] = val
    if not data:
        return cfg
    merged = cfg.to_dict()
    merged.update(data)
    return ExperimentConfig.from_dict(merged)


# -- empirical census of the product / commutator constants ---------------------------------

def _band_limited(grid: sp.Grid, rank: str, rng, band: int) -> sp.SpectralField:
    base = sp.Grid(grid.n, max(8, 1 << math.ceil(math.log2(4 * band))), grid.L)
    f = sp.random_field(base, rank, rng, kmax=band * base.k_min)
    if rank == "vector":
        f = sp.leray_project(f)
    return sp.resample(f, grid)


def lemma_census(N_values=(64, 128), samples: int = 200, n: int = 2, band: int = 4,
                 seed: int = 0, s1: float = 0.5, s2: float = 0.5, s: float = 0.5,
                 p: float = 2.0, q: float = 2.0) -> dict:
    """Max product and commutator ratios over random band-limited pairs, per grid size.

    The same random fields (fixed Fourier content) are evaluated on every grid.
    """
    out = {}
    L = 2 * math.pi
    for N in N_values:
        grid = sp.Grid(n, N, L)
        part = make_partition(grid, 0)
        rng = np.random.default_rng(seed)
        prod, comm = [], []
        for _ in range(samples):
            a = _band_limited(grid, "scalar", rng, band)
            bfield = _band_limited(grid, "scalar", rng, band)
            w = _band_limited(grid, "vector", rng, band)
            prod.append(lemma_ratio_product(a, bfield, s1, s2, p, q, part))
            comm.append(lemma_ratio_commutator(w, bfield, s, p, q, part))
        out[N] = {"product": float(np.max(prod)), "commutator": float(np.max(comm))}
    return out
