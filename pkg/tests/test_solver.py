import numpy as np
import pytest
from scipy.integrate import simpson

from oldroyd_lab import linear_oracle as lo
from oldroyd_lab import littlewood_paley as lp
from oldroyd_lab import solver as so
from oldroyd_lab import spectral as sp
from oldroyd_lab.spectral import Grid, SpectralField


def random_state(grid, rng, kmax=5, amp=1.0, b=0.0):
    u = sp.leray_project(sp.random_field(grid, "vector", rng, kmax=kmax))
    tau = sp.random_field(grid, "sym", rng, kmax=kmax)
    u = u.with_coeffs(amp * u.coeffs / sp.l2_norm(u))
    tau = tau.with_coeffs(amp * tau.coeffs / sp.l2_norm(tau))
    return so.initial_state(grid, u, tau, b=b)


def taylor_mode(grid, m=(0, 1), amp=0.4):
    u = SpectralField.zeros(grid, "vector")
    k = np.array(m, float)
    pol = np.array([-k[1], k[0]]) / np.hypot(*k)
    u.coeffs[(slice(None),) + grid.mode_index(m)] = amp * pol
    return u


def test_state_validation():
    g = Grid(2, 16)
    with pytest.raises(ValueError):
        so.SolverState(g, SpectralField.zeros(g, "sym"), SpectralField.zeros(g, "sym"))
    with pytest.raises(ValueError, match="slip"):
        so.initial_state(g, b=1.5)
    with pytest.raises(ValueError):
        so.StepControl(dt=0.0)
    with pytest.raises(ValueError):
        so.StepControl(dt=0.1, order=5)


def test_F_identity_and_zero(rng):
    g = Grid(2, 32)
    u = sp.dealias(sp.leray_project(sp.random_field(g, "vector", rng, kmax=6)))
    eye = np.stack([np.ones(g.shape), np.zeros(g.shape), np.ones(g.shape)])
    I = sp.transform_forward(g, eye, "sym")
    F = so.nonlinear_F(I, u, 0.7)
    assert np.abs(F.coeffs - 2 * 0.7 * sp.sym_grad(u).coeffs).max() < 1e-14
    tau = sp.random_field(g, "sym", rng)
    assert np.abs(so.nonlinear_F(tau, SpectralField.zeros(g, "vector"), 0.3).coeffs).max() == 0


@pytest.mark.parametrize("n,N", [(2, 32), (3, 16)])
def test_F_orthogonal_to_tau_at_b0(n, N, rng):
    g = Grid(n, N)
    u = sp.dealias(sp.leray_project(sp.random_field(g, "vector", rng)))
    tau = sp.dealias(sp.random_field(g, "sym", rng))
    F = so.nonlinear_F(tau, u, 0.0)
    scale = sp.l2_norm(F) * sp.l2_norm(tau)
    assert abs(sp.inner(F, tau)) <= 1e-10 * scale
    assert abs(sp.inner(so.nonlinear_F(tau, u, 0.5), tau)) > 1e-6 * scale


def test_F_symmetric_structure(rng):
    # full-matrix product in physical space agrees with the stored upper triangle
    g = Grid(3, 16)
    u = sp.dealias(sp.leray_project(sp.random_field(g, "vector", rng)))
    tau = sp.dealias(sp.random_field(g, "sym", rng))
    F = so.nonlinear_F(tau, u, -0.4).physical()
    T = np.array(sp.SpectralField(g, "sym", tau.coeffs).matrix())
    Tp = np.empty((3, 3) + g.shape)
    vals = tau.physical()
    for c, (i, j) in enumerate(sp.sym_index(3)):
        Tp[i, j] = Tp[j, i] = vals[c]
    Gp = sp.gradient(u).physical().reshape((3, 3) + g.shape)
    D = 0.5 * (Gp + Gp.transpose(1, 0, 2, 3, 4))
    W = 0.5 * (Gp - Gp.transpose(1, 0, 2, 3, 4))
    mm = lambda A, B: np.einsum("ik...,kj...->ij...", A, B)  # noqa: E731
    full = mm(Tp, W) - mm(W, Tp) - 0.4 * (mm(D, Tp) + mm(Tp, D))
    ref = sp.dealias(sp.transform_forward(g, np.stack([full[i, j] for i, j in sp.sym_index(3)]), "sym"))
    assert np.abs(F - ref.physical()).max() < 1e-12
    assert T is not None


def test_rhs_zero_state():
    g = Grid(2, 16)
    du, dtau = so.rhs(so.initial_state(g))
    assert np.abs(du.coeffs).max() == 0 and np.abs(dtau.coeffs).max() == 0


def test_rhs_term_isolation(rng):
    g = Grid(2, 32)
    u = sp.dealias(sp.leray_project(sp.random_field(g, "vector", rng, kmax=3)))
    s = so.initial_state(g, u)
    du, dtau = so.rhs(s)
    assert np.abs(dtau.coeffs - sp.sym_grad(s.u).coeffs).max() < 1e-15
    U = s.u.physical()
    G = sp.gradient(s.u).physical()
    adv = np.stack([U[0] * G[0] + U[1] * G[1], U[0] * G[2] + U[1] * G[3]])
    ref = sp.leray_project(sp.dealias(sp.transform_forward(g, -adv, "vector")))
    assert np.abs(du.coeffs - ref.coeffs).max() < 1e-14


def _full(f):
    return sp.full_spectrum(f)


def test_rhs_against_direct_convolution():
    # 8x8 grid, fields inside |m| <= 1 so all products are exactly resolved
    g = Grid(2, 8)
    rng = np.random.default_rng(11)
    u = sp.leray_project(sp.random_field(g, "vector", rng, kmax=1.0))
    tau = sp.random_field(g, "sym", rng, kmax=1.0)
    s = so.initial_state(g, u, tau, b=0.25)
    du, dtau = so.rhs(s)
    U = _full(s.u)
    T = _full(s.tau)
    N = g.N
    ms = [(a, b) for a in range(-2, 3) for b in range(-2, 3)]
    k = lambda m: np.array(m, float) * g.k_min  # noqa: E731
    idx = lambda m: (m[0] % N, m[1] % N)  # noqa: E731
    # u.grad tau by explicit convolution
    adv = np.zeros_like(T)
    for p in ms:
        for q in ms:
            r = (p[0] + q[0], p[1] + q[1])
            if max(abs(r[0]), abs(r[1])) > 2:
                continue
            for c in range(3):
                adv[c][idx(r)] += sum(U[j][idx(p)] * 1j * k(q)[j] * T[c][idx(q)] for j in range(2))
    expect_tau = -adv - _full(so.nonlinear_F(s.tau, s.u, 0.25)) + _full(sp.sym_grad(s.u))
    expect_tau[:, 0, 0] = 0
    assert np.abs(_full(dtau) - expect_tau).max() < 1e-13


def test_single_mode_follows_semigroup():
    # a lone shear mode is not a pure heat mode: D(u) feeds tau, which feeds back
    # through div tau. At small amplitude it follows the 2x2 semigroup.
    g = Grid(2, 16)
    u0 = taylor_mode(g, (0, 2), amp=1e-3)
    s0 = so.initial_state(g, u0)
    s = so.advance_to(s0, 0.5, so.StepControl(0.01, order=4))
    assert s.t == pytest.approx(0.5)
    M = lo.semigroup_matrix(2.0, 0.5)
    idx = (slice(None),) + g.mode_index((0, 2))
    c0 = s0.u.coeffs[idx]
    assert np.abs(s.u.coeffs[idx] - M[0, 0] * c0).max() <= 1e-5 * np.abs(c0).max()
    gam = sp.gamma_from_tau(s.tau).coeffs[idx]
    assert np.abs(gam - M[1, 0] * c0).max() <= 1e-5 * np.abs(c0).max()


def test_stress_free_heat_decay_without_coupling():
    # with u = 0 initially and tau Gamma-free (div tau gradient), nothing moves
    g = Grid(2, 16)
    x, _ = g.coords()
    tau = sp.transform_forward(g, np.stack([np.sin(x), 0 * x, np.sin(x)]), "sym")
    s = so.advance_to(so.initial_state(g, None, tau), 0.3, so.StepControl(0.05))
    assert np.abs(s.u.coeffs).max() < 1e-15
    assert np.abs(s.tau.coeffs - so.initial_state(g, None, tau).tau.coeffs).max() < 1e-15


def test_step_preserves_invariants(rng):
    g = Grid(2, 32)
    s = random_state(g, rng, amp=0.5, b=0.4)
    for _ in range(5):
        s = so.step(s, so.StepControl(0.01))
    rec = so.diagnostics(s)
    assert rec.div_residual <= 1e-11
    assert sp.conjugate_symmetry_residual(s.u) <= 1e-12
    assert sp.conjugate_symmetry_residual(s.tau) <= 1e-12
    assert np.abs(s.u.coeffs[:, 0, 0]).max() == 0 and np.abs(s.tau.coeffs[:, 0, 0]).max() == 0
    assert np.abs(s.u.coeffs * ~g.dealias_mask).max() == 0
    assert rec.cancellation <= 1e-10


def test_cfl_substeps_land_on_time(rng):
    g = Grid(2, 16)
    s = random_state(g, rng, amp=5.0)
    out = so.step(s, so.StepControl(0.2, cfl=0.1))
    assert out.t == pytest.approx(0.2)
    assert np.all(np.isfinite(out.u.coeffs))


def test_blowup_reports_last_good_time(rng):
    g = Grid(2, 16)
    s = random_state(g, rng, amp=1e200)
    s.t = 3.0
    with pytest.raises(so.BlowUpError) as info:
        so.step(s, so.StepControl(0.1, cfl=0))
    assert info.value.last_good_time == 3.0


@pytest.mark.parametrize("order", [2, 3, 4])
def test_temporal_convergence(order):
    g = Grid(2, 32)
    s0 = random_state(g, np.random.default_rng(3), amp=2.0, b=0.3)
    T, dt = 0.2, 0.005
    ref = so.advance_to(s0, T, so.StepControl(dt / 8, cfl=10, order=order))

    def err(h):
        s = so.advance_to(s0, T, so.StepControl(h, cfl=10, order=order))
        return np.sqrt(np.sum(np.abs(s.u.coeffs - ref.u.coeffs) ** 2)
                       + np.sum(np.abs(s.tau.coeffs - ref.tau.coeffs) ** 2))

    ratio = err(dt) / err(dt / 2)
    assert abs(ratio / 2**order - 1) <= 0.15


def test_linear_regime_matches_oracle():
    eps = 1e-6
    g = Grid(2, 16)
    rng = np.random.default_rng(9)
    u = sp.leray_project(sp.random_field(g, "vector", rng, kmax=3))
    gam = sp.leray_project(sp.random_field(g, "vector", rng, kmax=3))
    u = u.with_coeffs(eps * u.coeffs / np.abs(u.coeffs).max())
    gam = gam.with_coeffs(eps * gam.coeffs / np.abs(gam.coeffs).max())
    s0 = so.initial_state(g, u, sp.tau_from_gamma(gam))
    s = so.advance_to(s0, 1.0, so.StepControl(0.01, order=4))
    U0, G0 = s0.u.coeffs, sp.gamma_from_tau(s0.tau).coeffs
    M = lo.semigroup_matrix(g.kmag, 1.0)
    Ue = M[..., 0, 0] * U0 + M[..., 0, 1] * G0
    Ge = M[..., 1, 0] * U0 + M[..., 1, 1] * G0
    err = max(np.abs(s.u.coeffs - Ue).max(), np.abs(sp.gamma_from_tau(s.tau).coeffs - Ge).max())
    assert err <= 1e-9
    assert err <= 1e-5 * eps  # O(eps^2) nonlinear residue plus time error


def test_energy_law_small_grid():
    g = Grid(2, 64)
    s = random_state(g, np.random.default_rng(5), kmax=6)
    dt, nsteps = 1e-3, 100
    E, D, T = [], [], []
    for i in range(nsteps + 1):
        rec = so.diagnostics(s)
        E.append(rec.energy)
        D.append(rec.dissipation)
        T.append(s.t)
        if i < nsteps:
            s = so.step(s, so.StepControl(dt))
    residual = (E[-1] - E[0] + simpson(D, x=T)) / E[0] / T[-1]
    assert abs(residual) <= 1e-6


def test_diagnostics_zero_state():
    g = Grid(2, 32)
    rec = so.diagnostics(so.initial_state(g))
    assert rec.energy == 0 and rec.dissipation == 0
    assert all(v == 0 for v in rec.norms.values())
    assert rec.besov_low == rec.besov_high_u == rec.besov_high_gamma == rec.besov_negs == 0
    assert rec.finite() and rec.lyapunov == 0


def test_diagnostics_single_mode():
    g = Grid(2, 32, L=4 * np.pi)
    s = so.initial_state(g, taylor_mode(g, (3, 4), 0.25))
    rec = so.diagnostics(s, so.DiagnosticSpec(norms=((0.0, 2.0), (1.0, 2.0))))
    l2 = sp.l2_norm(s.u)
    kk = 5 * g.k_min
    assert rec.energy == pytest.approx(0.5 * l2**2, rel=1e-13)
    assert rec.dissipation == pytest.approx(kk**2 * l2**2, rel=1e-13)
    assert rec.norms[("u", 0.0, 2.0)] == pytest.approx(l2, rel=1e-12)
    assert rec.norms[("u", 1.0, 2.0)] == pytest.approx(kk * l2, rel=1e-12)
    assert rec.norms[("gamma", 0.0, 2.0)] == 0


def test_smallness_matches_record(rng):
    g = Grid(2, 32)
    s = random_state(g, rng, amp=0.1)
    spec = so.DiagnosticSpec()
    part = lp.make_partition(g, 0)
    x0 = so.smallness(s, spec, part)
    assert x0 > 0
    rec = so.diagnostics(s, spec, part)
    assert np.isfinite(rec.lyapunov)


def test_saturating_data_profile():
    g = Grid(2, 64, L=16 * np.pi)
    s = so.saturating_initial_data(g, 0.75, 0.05, A=0.2, seed=1)
    amp = np.sqrt(np.sum(np.abs(s.u.coeffs) ** 2, axis=0))
    inside = (g.kmag > 0) & (g.kmag <= 1)
    expect = 0.2 * g.kmag[inside] ** (-0.2) / g.volume
    # polarisation has unit modulus except on the few modes touched by reality enforcement
    assert np.median(np.abs(amp[inside] / expect - 1)) < 1e-12
    assert np.abs(amp[~inside]).max() <= 1e-14 * amp.max()
    assert np.abs(s.tau.coeffs).max() == 0
    m = so.saturating_initial_data(g, 0.75, tau0="matched", seed=1)
    assert np.abs(m.tau.coeffs).max() > 0
    with pytest.raises(ValueError):
        so.saturating_initial_data(g, 0.75, tau0="bogus")


def test_saturating_data_deterministic():
    g = Grid(2, 32, L=8 * np.pi)
    a = so.saturating_initial_data(g, 0.6, seed=4)
    b = so.saturating_initial_data(g, 0.6, seed=4)
    assert np.array_equal(a.u.coeffs, b.u.coeffs)


@pytest.mark.parametrize("n,N", [(2, 16), (3, 8)])
def test_checkpoint_round_trip(tmp_path, n, N, rng):
    g = Grid(n, N, L=3.5)
    s = random_state(g, rng, kmax=None, b=-0.25)
    s.t = 12.5
    path = tmp_path / "state.oldb"
    so.write_checkpoint(path, s)
    raw = path.read_bytes()
    assert raw[:4] == b"OLDB"
    ncomp = n + n * (n + 1) // 2
    assert len(raw) == 4 + 4 * 3 + 8 * 3 + 16 * ncomp * N**n
    back = so.read_checkpoint(path)
    assert back.grid == g and back.t == 12.5 and back.b == -0.25
    assert np.abs(back.u.coeffs - s.u.coeffs).max() < 1e-15
    assert np.abs(back.tau.coeffs - s.tau.coeffs).max() < 1e-15


def test_checkpoint_component_order(tmp_path):
    g = Grid(2, 8)
    tau = SpectralField.zeros(g, "sym")
    tau.coeffs[1, 0, 1] = 0.5  # tau_12 at m = (0, 1)
    s = so.SolverState(g, SpectralField.zeros(g, "vector"), tau)
    so.write_checkpoint(tmp_path / "c.oldb", s)
    body = np.frombuffer((tmp_path / "c.oldb").read_bytes()[40:], "<c16").reshape(5, 8, 8)
    assert body[3, 0, 1] == 0.5  # u1, u2, tau11, tau12, tau22
    assert body[3, 0, -1] == 0.5  # conjugate partner on the full lattice
    assert np.count_nonzero(body) == 2


def test_checkpoint_rejects_garbage(tmp_path):
    p = tmp_path / "bad.oldb"
    p.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(ValueError):
        so.read_checkpoint(p)
