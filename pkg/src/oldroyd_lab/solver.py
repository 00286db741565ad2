"""Pseudo-spectral evolution of the undamped Oldroyd-B system on the periodic box.

    d_t tau + u.grad tau + F(tau, grad u) = D(u)
    d_t u + u.grad u - Lap u + grad p = div tau,     div u = 0

Pressure is removed by Leray projection. The viscous term is integrated
exactly with an integrating factor (Lawson form of an explicit Runge-Kutta
scheme); transport, coupling and F are explicit. Quadratic products are
dealiased with the 2/3 rule and the state is kept inside the retained band.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import spectral as sp
from .littlewood_paley import BesovSpec, DyadicPartition, besov_norm, lp_norm, make_partition
from .spectral import Grid, SpectralField

__all__ = [
    "SolverState",
    "StepControl",
    "DiagnosticSpec",
    "DiagnosticsRecord",
    "BlowUpError",
    "nonlinear_F",
    "rhs",
    "step",
    "advance_to",
    "diagnostics",
    "smallness",
    "lq_norm_lambda",
    "initial_state",
    "saturating_initial_data",
    "write_checkpoint",
    "read_checkpoint",
]


class BlowUpError(RuntimeError):
    def __init__(self, message: str, last_good_time: float):
        super().__init__(f"{message} (last good time t={last_good_time:.6g})")
        self.last_good_time = last_good_time


@dataclass
class SolverState:
    grid: Grid
    u: SpectralField
    tau: SpectralField
    t: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.u.rank != "vector" or self.tau.rank != "sym":
            raise ValueError("state needs a vector u and a symmetric tensor tau")
        if not -1 <= self.b <= 1:
            raise ValueError(f"slip parameter b must lie in [-1, 1], got {self.b}")

    def copy(self) -> "SolverState":
        return replace(self, u=self.u.copy(), tau=self.tau.copy())


@dataclass
class StepControl:
    dt: float
    cfl: float = 0.5
    order: int = 3
    dealias: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.order not in _TABLEAUX:
            raise ValueError(f"scheme order must be one of {sorted(_TABLEAUX)}")


# (c, a, b) with non-decreasing c so every integrating factor runs forward in time
_TABLEAUX = {
    2: ([0.0, 1.0], [[], [1.0]], [0.5, 0.5]),  # Heun / SSP-RK2
    3: ([0.0, 0.5, 1.0], [[], [0.5], [-1.0, 2.0]], [1 / 6, 2 / 3, 1 / 6]),  # Kutta
    4: ([0.0, 0.5, 0.5, 1.0], [[], [0.5], [0.0, 0.5], [0.0, 0.0, 1.0]],
        [1 / 6, 1 / 3, 1 / 3, 1 / 6]),
}


def _matrix_physical(vals: np.ndarray, rank: str, n: int) -> list[list[np.ndarray]]:
    if rank == "matrix":
        return [[vals[i * n + j] for j in range(n)] for i in range(n)]
    out = [[None] * n for _ in range(n)]
    for c, (i, j) in enumerate(sp.sym_index(n)):
        out[i][j] = out[j][i] = vals[c]
    return out


def _F_physical(T, G, b: float, n: int):
    """F from physical tau (nested) and grad u (nested, G[i][j] = d_j u_i); upper triangle."""
    D = [[0.5 * (G[i][j] + G[j][i]) for j in range(n)] for i in range(n)]
    W = [[0.5 * (G[i][j] - G[j][i]) for j in range(n)] for i in range(n)]
    out = []
    for i, j in sp.sym_index(n):
        acc = 0.0
        for k in range(n):
            acc = acc + T[i][k] * W[k][j] - W[i][k] * T[k][j]
            if b:
                acc = acc + b * (D[i][k] * T[k][j] + T[i][k] * D[k][j])
        out.append(acc * np.ones_like(T[0][0]))
    return np.stack(out)


def nonlinear_F(tau: SpectralField, u: SpectralField, b: float) -> SpectralField:
    """F(tau, grad u) = tau Omega - Omega tau + b (D tau + tau D), dealiased."""
    g = tau.grid
    n = g.n
    T = _matrix_physical(sp.dealias(tau).physical(), "sym", n)
    G = _matrix_physical(sp.dealias(sp.gradient(u)).physical(), "matrix", n)
    return sp.dealias(sp.transform_forward(g, _F_physical(T, G, b, n), "sym"))


def _explicit_terms(grid: Grid, u: np.ndarray, tau: np.ndarray, b: float, mask):
    """Everything except -Lap u, on raw coefficient arrays. Returns (du, dtau, max|u|)."""
    n = grid.n
    uf = SpectralField(grid, "vector", u)
    tf = SpectralField(grid, "sym", tau)
    U = uf.physical()
    Gv = sp.gradient(uf).physical()
    Tv = tf.physical()
    G = _matrix_physical(Gv, "matrix", n)
    T = _matrix_physical(Tv, "sym", n)
    adv_u = np.stack([sum(U[j] * G[i][j] for j in range(n)) for i in range(n)])
    # u.grad tau, componentwise on the stored upper triangle
    grad_tau = [sp.SpectralField(grid, "vector", np.stack([1j * kk * tau[c] for kk in grid.k_odd]))
                for c in range(tau.shape[0])]
    adv_tau = np.stack([sum(U[j] * gt[j] for j in range(n)) for gt in (x.physical() for x in grad_tau)])
    Fv = _F_physical(T, G, b, n)
    nl_u = sp.transform_forward(grid, -adv_u, "vector").coeffs
    nl_tau = sp.transform_forward(grid, -adv_tau - Fv, "sym").coeffs
    if mask is not None:
        nl_u *= mask
        nl_tau *= mask
    du = sp.leray_project(SpectralField(grid, "vector", nl_u) + sp.divergence(tf)).coeffs
    dtau = nl_tau + sp.sym_grad(uf).coeffs
    # the state is mean-free; dropping the mean of the tendency (F has one) keeps
    # every Runge-Kutta stage on that subspace instead of only the step endpoints
    origin = (slice(None),) + (0,) * n
    du[origin] = 0
    dtau[origin] = 0
    umax = float(np.sqrt(np.sum(U**2, axis=0)).max())
    return du, dtau, umax


def rhs(state: SolverState, dealias: bool = True) -> tuple[SpectralField, SpectralField]:
    """Non-stiff right-hand side: (P(-u.grad u + div tau), -u.grad tau - F + D(u)).

    The viscous term is excluded; ``step`` integrates it exactly.
    """
    g = state.grid
    mask = g.dealias_mask if dealias else None
    du, dtau, _ = _explicit_terms(g, state.u.coeffs, state.tau.coeffs, state.b, mask)
    return SpectralField(g, "vector", du), SpectralField(g, "sym", dtau)


def _finish(grid: Grid, u: np.ndarray, tau: np.ndarray, dealias: bool):
    origin = (slice(None),) + (0,) * grid.n
    # re-impose reality on the self-conjugate planes, then project; the
    # projections below commute with conjugation, so reality survives them
    u = sp.transform_forward(grid, SpectralField(grid, "vector", u).physical(), "vector").coeffs
    tau = sp.transform_forward(grid, SpectralField(grid, "sym", tau).physical(), "sym").coeffs
    u = sp.leray_project(SpectralField(grid, "vector", u)).coeffs
    if dealias:
        u = u * grid.dealias_mask
        tau = tau * grid.dealias_mask
    u[origin] = 0
    tau[origin] = 0
    return u, tau


def _lawson_step(grid: Grid, u, tau, b, h, order, mask):
    c, a, w = _TABLEAUX[order]
    decay = lambda dt: np.exp(-grid.k2 * dt)  # noqa: E731
    ku, kt = [], []
    umax = 0.0
    for i in range(len(c)):
        ui = decay(c[i] * h) * u
        ti = tau.copy()
        for j, aij in enumerate(a[i]):
            if aij:
                ui = ui + h * aij * decay((c[i] - c[j]) * h) * ku[j]
                ti = ti + h * aij * kt[j]
        du, dt_, um = _explicit_terms(grid, ui, ti, b, mask)
        if i == 0:
            umax = um
        ku.append(du)
        kt.append(dt_)
    u_new = decay(h) * u
    t_new = tau.copy()
    for j, wj in enumerate(w):
        u_new = u_new + h * wj * decay((1 - c[j]) * h) * ku[j]
        t_new = t_new + h * wj * kt[j]
    return u_new, t_new, umax


def step(state: SolverState, control: StepControl) -> SolverState:
    """Advance by ``control.dt``, splitting into equal substeps if the CFL limit is exceeded."""
    g = state.grid
    mask = g.dealias_mask if control.dealias else None
    with np.errstate(over="ignore", invalid="ignore"):
        umax = float(np.sqrt(np.sum(state.u.physical() ** 2, axis=0)).max())
    cfl = control.dt * umax * g.N / g.L
    nsub = max(1, int(np.ceil(cfl / control.cfl))) if control.cfl > 0 and np.isfinite(cfl) else 1
    h = control.dt / nsub
    u, tau = state.u.coeffs, state.tau.coeffs
    t = state.t
    for _ in range(nsub):
        # overflow is reported as a blow-up below rather than as warnings
        with np.errstate(over="ignore", invalid="ignore"):
            u, tau, _ = _lawson_step(g, u, tau, state.b, h, control.order, mask)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(tau))):
            raise BlowUpError("non-finite coefficients", t)
        u, tau = _finish(g, u, tau, control.dealias)
        t += h
    return SolverState(g, SpectralField(g, "vector", u), SpectralField(g, "sym", tau), t, state.b)


def advance_to(state: SolverState, t_end: float, control: StepControl) -> SolverState:
    """Step until ``t_end`` exactly; the final step is shortened to land on it."""
    while state.t < t_end - 1e-12 * max(1.0, abs(t_end)):
        dt = min(control.dt, t_end - state.t)
        state = step(state, replace(control, dt=dt))
    return state


# -- diagnostics --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticSpec:
    norms: tuple = ((0.0, 2.0),)  # (alpha, q) pairs
    p: float = 2.0
    s: float = 0.75
    j0: int = 0


@dataclass
class DiagnosticsRecord:
    t: float
    energy: float
    dissipation: float
    div_residual: float
    symmetry_residual: float
    cancellation: float
    norms: dict = field(default_factory=dict)  # (field, alpha, q) -> value
    besov_low: float = 0.0
    besov_high_u: float = 0.0
    besov_high_gamma: float = 0.0
    besov_negs: float = 0.0

    @property
    def lyapunov(self) -> float:
        return self.besov_low + self.besov_high_u + self.besov_high_gamma

    def finite(self) -> bool:
        vals = [self.energy, self.dissipation, self.div_residual, self.besov_low,
                self.besov_high_u, self.besov_high_gamma, self.besov_negs, *self.norms.values()]
        return bool(np.all(np.isfinite(vals)))


def lq_norm_lambda(f: SpectralField, alpha: float, q: float) -> float:
    """Lattice L^q norm of Lambda^alpha f."""
    return lp_norm(sp.lambda_power(f, alpha).physical(), f.grid, q)


def smallness(state: SolverState, spec: DiagnosticSpec, partition: DyadicPartition | None = None) -> float:
    """||(u,tau)||^l_{B^{n/2-1}_{2,1}} + ||u||^h_{B^{n/p-1}_{p,1}} + ||tau||^h_{B^{n/p}_{p,1}}."""
    g = state.grid
    n = g.n
    part = partition or make_partition(g, spec.j0)
    return (besov_norm([state.u, state.tau], BesovSpec(n / 2 - 1, 2, "low"), part)
            + besov_norm(state.u, BesovSpec(n / spec.p - 1, spec.p, "high"), part)
            + besov_norm(state.tau, BesovSpec(n / spec.p, spec.p, "high"), part))


def diagnostics(state: SolverState, spec: DiagnosticSpec = DiagnosticSpec(),
                partition: DyadicPartition | None = None) -> DiagnosticsRecord:
    g = state.grid
    n = g.n
    part = partition or make_partition(g, spec.j0)
    u, tau = state.u, state.tau
    gamma = sp.gamma_from_tau(tau)
    grad_u = sp.gradient(u)
    energy = 0.5 * (sp.inner(u, u) + sp.inner(tau, tau))
    dissipation = sp.inner(grad_u, grad_u)
    unorm = np.sqrt(np.sum(np.abs(u.coeffs) ** 2))
    div = np.abs(sum(kk * c for kk, c in zip(g.k_odd, u.coeffs))).max()
    div_res = float(div / (unorm * g.k_min)) if unorm > 0 else 0.0
    # tau is stored upper-triangular, so symmetry holds structurally
    sym_res = 0.0
    Dt = sp.sym_grad(u)
    canc = sp.inner(sp.divergence(tau), u) + sp.inner(Dt, tau)
    scale = sp.l2_norm(tau) * np.sqrt(dissipation)
    rec = DiagnosticsRecord(
        t=state.t, energy=energy, dissipation=dissipation, div_residual=div_res,
        symmetry_residual=sym_res, cancellation=float(abs(canc) / scale) if scale > 0 else 0.0,
    )
    for alpha, q in spec.norms:
        nu = lq_norm_lambda(u, alpha, q)
        ng = lq_norm_lambda(gamma, alpha, q)
        rec.norms[("u", alpha, q)] = nu
        rec.norms[("gamma", alpha, q)] = ng
        rec.norms[("pair", alpha, q)] = nu + ng
    rec.besov_low = besov_norm([u, gamma], BesovSpec(n / 2 - 1, 2, "low"), part)
    rec.besov_high_u = besov_norm(u, BesovSpec(n / spec.p - 1, spec.p, "high"), part)
    rec.besov_high_gamma = besov_norm(gamma, BesovSpec(n / spec.p, spec.p, "high"), part)
    rec.besov_negs = besov_norm([u, tau], BesovSpec(-spec.s, 2, "full"), part)
    return rec


# -- initial data ---------------------------------------------------------------------------

def initial_state(grid: Grid, u: SpectralField | None = None, tau: SpectralField | None = None,
                  b: float = 0.0, t: float = 0.0) -> SolverState:
    """Build a state with mean-free, projected, band-limited fields."""
    u = u if u is not None else SpectralField.zeros(grid, "vector")
    tau = tau if tau is not None else SpectralField.zeros(grid, "sym")
    uc, tc = _finish(grid, u.coeffs.copy(), tau.coeffs.copy(), True)
    return SolverState(grid, SpectralField(grid, "vector", uc), SpectralField(grid, "sym", tc), t, b)


def _random_solenoidal(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus solenoidal polarisation with random phase at every mode."""
    w = sp.transform_forward(grid, rng.standard_normal((grid.n,) + grid.shape), "vector")
    w = sp.leray_project(w).coeffs
    mod = np.sqrt(np.sum(np.abs(w) ** 2, axis=0))
    return np.where(mod > 0, w / np.where(mod > 0, mod, 1.0), 0.0)


def saturating_initial_data(grid: Grid, s: float, delta: float = 0.05, r_cut: float = 1.0,
                            A: float = 1.0, seed: int = 0, tau0: str = "zero",
                            b: float = 0.0) -> SolverState:
    """Box analogue of the profile A |k|^(s - n/2 + delta) on |k| <= r_cut.

    Coefficients are A |k|^theta / L^n so lattice sums approximate the
    whole-space integrals. ``tau0="matched"`` adds a stress whose Gamma has
    the same spectral profile with independent phases.
    """
    rng = np.random.default_rng(seed)
    theta = s - grid.n / 2 + delta
    kmag = grid.kmag
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = np.where((kmag > 0) & (kmag <= r_cut), A * kmag**theta / grid.volume, 0.0)
    u = SpectralField(grid, "vector", amp * _random_solenoidal(grid, rng))
    if tau0 == "zero":
        tau = SpectralField.zeros(grid, "sym")
    elif tau0 == "matched":
        gam = SpectralField(grid, "vector", amp * _random_solenoidal(grid, rng))
        tau = sp.tau_from_gamma(gam)
    else:
        raise ValueError(f"unknown tau0 option {tau0!r}")
    return initial_state(grid, u, tau, b=b)


# -- checkpoint files -----------------------------------------------------------------------

_MAGIC = b"OLDB"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIddd")


def write_checkpoint(path, state: SolverState) -> None:
    """Binary checkpoint: magic, version, n, N (uint32), L, t, b (float64), then the
    full-lattice coefficients of u_1..u_n, tau_11, tau_12, ... as little-endian
    (re, im) float64 pairs in row-major order."""
    g = state.grid
    head = _HEADER.pack(_MAGIC, _VERSION, g.n, g.N, g.L, state.t, state.b)
    comps = np.concatenate([sp.full_spectrum(state.u), sp.full_spectrum(state.tau)])
    data = np.ascontiguousarray(comps).astype("<c16").tobytes()
    Path(path).write_bytes(head + data)


def read_checkpoint(path) -> SolverState:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("checkpoint too short")
    magic, version, n, N, L, t, b = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not an OLDB checkpoint")
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    g = Grid(n, N, L)
    ncomp = n + n * (n + 1) // 2
    body = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if body.size != ncomp * N**n:
        raise ValueError("checkpoint body has the wrong size")
    full = body.reshape((ncomp,) + g.shape)
    half = full[..., : N // 2 + 1].astype(complex)
    u = SpectralField(g, "vector", half[:n].copy())
    tau = SpectralField(g, "sym", half[n:].copy())
    return SolverState(g, u, tau, t, b)
