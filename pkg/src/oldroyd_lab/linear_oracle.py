"""Exact whole-space treatment of the linearised (u, Gamma) system.

Per frequency r = |xi| the pair (u_hat, Gamma_hat) obeys

    d/dt [u, G] = A(r) [u, G],     A(r) = [[-r^2, r], [-c r, 0]],

with c = 1/2 (the coupling implied by div D(u) = Lap(u)/2 for solenoidal u)
or c = 1 when ``half_coupling`` is switched off. The characteristic
polynomial is lam^2 + r^2 lam + c r^2.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
from math import gamma as gamma_fn, inf, isinf, pi, sqrt

import numpy as np
from scipy import integrate

__all__ = [
    "symbol_matrix",
    "eigen_branches",
    "semigroup_matrix",
    "semigroup_apply",
    "RadialProfile",
    "DecayPrediction",
    "WindowError",
    "l2_decay_curve",
    "predicted_rate",
    "formula_rate",
    "sphere_measure",
]

# below this |q| t the exponential pair is evaluated by its Taylor series
_SERIES_CUTOFF = 0.05
_DEGENERATE_BAND = 1e-8


class WindowError(ValueError):
    """A parameter lies outside the admissible window; the message names the constraint."""


def _coupling(half_coupling: bool) -> float:
    return 0.5 if half_coupling else 1.0


def symbol_matrix(r: float, half_coupling: bool = True) -> np.ndarray:
    if r < 0:
        raise ValueError("r must be non-negative")
    c = _coupling(half_coupling)
    return np.array([[-r * r, r], [-c * r, 0.0]])


def eigen_branches(r: float, half_coupling: bool = True):
    """Return ``(lam_plus, lam_minus, regime)`` for frequency ``r``.

    ``lam_plus`` is the slow root (largest real part). Regimes split where
    the discriminant r^4 - 4 c r^2 vanishes (r = sqrt(2) for c = 1/2).
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    c = _coupling(half_coupling)
    r2 = r * r
    disc = r2 * r2 - 4 * c * r2
    if r == 0:
        return 0.0, 0.0, "degenerate"
    if abs(disc) <= _DEGENERATE_BAND * r2 * r2:
        lam = -r2 / 2
        return lam, lam, "degenerate"
    if disc < 0:
        w = sqrt(-disc) / 2
        return complex(-r2 / 2, w), complex(-r2 / 2, -w), "oscillatory"
    lam_minus = -(r2 + sqrt(disc)) / 2
    lam_plus = c * r2 / lam_minus  # product of roots; avoids cancellation
    return lam_plus, lam_minus, "overdamped"


def _pair_functions(q2, t):
    """cosh(q t) and sinh(q t)/q for real q2 = q^2 of either sign (arrays)."""
    q2 = np.asarray(q2, dtype=float)
    t = np.asarray(t, dtype=float)
    q2, t = np.broadcast_arrays(q2, t)
    C = np.empty(q2.shape)
    S = np.empty(q2.shape)
    x2 = q2 * t * t
    small = np.abs(x2) < _SERIES_CUTOFF**2
    # Taylor: cosh = sum x2^k/(2k)!, sinh/q = t sum x2^k/(2k+1)!
    xs = x2[small]
    c_acc = np.ones_like(xs)
    s_acc = np.ones_like(xs)
    term_c = np.ones_like(xs)
    term_s = np.ones_like(xs)
    for k in range(1, 9):
        term_c = term_c * xs / ((2 * k - 1) * (2 * k))
        term_s = term_s * xs / ((2 * k) * (2 * k + 1))
        c_acc += term_c
        s_acc += term_s
    C[small] = c_acc
    S[small] = s_acc * t[small]
    osc = (~small) & (q2 < 0)
    w = np.sqrt(-q2[osc])
    C[osc] = np.cos(w * t[osc])
    S[osc] = np.sin(w * t[osc]) / w
    ovd = (~small) & (q2 > 0)
    # overdamped pieces are returned pre-multiplied later; see semigroup_matrix
    C[ovd] = np.nan
    S[ovd] = np.nan
    return C, S, small, osc, ovd


def semigroup_matrix(r, t, half_coupling: bool = True) -> np.ndarray:
    """exp(t A(r)) for arrays ``r >= 0``, ``t >= 0``; shape ``broadcast + (2, 2)``."""
    c = _coupling(half_coupling)
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(r < 0) or np.any(t < 0):
        raise ValueError("semigroup needs r >= 0 and t >= 0")
    r, t = np.broadcast_arrays(r, t)
    shape = r.shape
    r, t = r.ravel(), t.ravel()
    r2 = r * r
    s = -r2 / 2  # half the trace
    q2 = r2 * r2 / 4 - c * r2  # (lam_plus - lam_minus)^2 / 4
    C, S, small, osc, ovd = _pair_functions(q2, t)
    E = np.exp(s * t)
    C = C * E
    S = S * E
    if np.any(ovd):
        rr, tt = r[ovd], t[ovd]
        q = np.sqrt(q2[ovd])
        lam_m = -(rr * rr) / 2 - q
        em = np.exp(lam_m * tt)
        # e^{lam_minus t} expm1(2 q t) without overflow: exp(lam_plus t) - exp(lam_minus t)
        x = 2 * q * tt
        near = x < 1.0
        dif = np.empty_like(x)
        dif[near] = em[near] * np.expm1(x[near])
        dif[~near] = np.exp(lam_m[~near] * tt[~near] + x[~near]) - em[~near]
        S[ovd] = dif / (2 * q)
        C[ovd] = em + q * S[ovd]
    out = np.empty(r.shape + (2, 2))
    out[..., 0, 0] = C - (r2 / 2) * S
    out[..., 0, 1] = r * S
    out[..., 1, 0] = -c * r * S
    out[..., 1, 1] = C + (r2 / 2) * S
    return out.reshape(shape + (2, 2))


def _semigroup_scalar(r: float, t: float, c: float):
    """Scalar twin of ``semigroup_matrix`` (same branches), for quadrature integrands."""
    r2 = r * r
    s = -r2 / 2
    q2 = r2 * r2 / 4 - c * r2
    x2 = q2 * t * t
    if abs(x2) < _SERIES_CUTOFF**2:
        cc = ss = term_c = term_s = 1.0
        for k in range(1, 9):
            term_c *= x2 / ((2 * k - 1) * (2 * k))
            term_s *= x2 / ((2 * k) * (2 * k + 1))
            cc += term_c
            ss += term_s
        E = math.exp(s * t)
        C, S = cc * E, ss * t * E
    elif q2 < 0:
        w = math.sqrt(-q2)
        E = math.exp(s * t)
        C, S = math.cos(w * t) * E, math.sin(w * t) / w * E
    else:
        q = math.sqrt(q2)
        lam_m = s - q
        em = math.exp(lam_m * t)
        x = 2 * q * t
        dif = em * math.expm1(x) if x < 1.0 else math.exp(lam_m * t + x) - em
        S = dif / (2 * q)
        C = em + q * S
    return C - (r2 / 2) * S, r * S, -c * r * S, C + (r2 / 2) * S


def semigroup_apply(r: float, t: float, state0, half_coupling: bool = True) -> np.ndarray:
    """Propagate ``(u_hat, Gamma_hat)`` at frequency ``r`` by time ``t``.

    ``state0`` has leading dimension 2; trailing dimensions (polarisation,
    complex amplitudes) are carried along.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    M = semigroup_matrix(r, t, half_coupling)
    state0 = np.asarray(state0)
    return np.tensordot(M, state0, axes=([1], [0]))


def sphere_measure(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2 * pi ** (n / 2) / gamma_fn(n / 2)


@dataclass(frozen=True)
class RadialProfile:
    """u_hat_0(xi) = A |xi|^theta 1_{|xi| <= r_cut}; Gamma_hat_0 = gamma_ratio * u_hat_0."""

    theta: float
    n: int = 2
    r_cut: float = 1.0
    A: float = 1.0
    gamma_ratio: float = 0.0
    s: float | None = None

    def __post_init__(self):
        if self.r_cut <= 0:
            raise ValueError("r_cut must be positive")
        if self.s is not None and not self.theta > self.s - self.n / 2:
            raise ValueError(
                f"theta > s - n/2 required for membership in B^-s_(2,1): "
                f"{self.theta} <= {self.s - self.n / 2}")

    @classmethod
    def saturating(cls, n: int, s: float, delta: float = 0.05, **kw) -> "RadialProfile":
        return cls(theta=s - n / 2 + delta, n=n, s=s, **kw)


def l2_decay_curve(profile: RadialProfile, alpha: float, times, half_coupling: bool = True,
                   semigroup: str = "full", epsrel: float = 1e-10, full_output: bool = False):
    """||Lambda^alpha W(t)||_{L^2(R^n)} at each time, W = (u, Gamma).

    The squared norm is sigma_{n-1} int_0^{r_cut} r^{2 alpha} |W_hat|^2 r^{n-1} dr
    (Plancherel without the (2 pi)^-n factor), evaluated by adaptive quadrature with the algebraic
    endpoint weight absorbed exactly. ``semigroup="heat"`` replaces the
    dynamics by e^{-r^2 t} acting on u_hat only (comparison flow).
    """
    n = profile.n
    beta = 2 * alpha + 2 * profile.theta + n - 1
    if not beta > -1:
        raise ValueError(
            f"alpha + theta + n/2 > 0 required for integrability at r=0: "
            f"{alpha + profile.theta + n / 2} <= 0")
    if semigroup not in ("full", "heat"):
        raise ValueError(f"unknown semigroup {semigroup!r}")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    pref = sphere_measure(n) * profile.A**2
    g0 = profile.gamma_ratio
    c = _coupling(half_coupling)

    def smooth(r, t):
        # |W_hat|^2 / (A^2 r^{2 theta})
        if semigroup == "heat":
            return math.exp(-2 * r * r * t)
        m11, m12, m21, m22 = _semigroup_scalar(r, t, c)
        u = m11 + m12 * g0
        G = m21 + m22 * g0
        return u * u + G * G

    values = np.empty(times.size)
    errors = np.empty(times.size)
    for i, t in enumerate(times):
        if t < 0:
            raise ValueError("times must be non-negative")
        # split at the diffusive scale so the weighted rule sees the bulk
        split = min(profile.r_cut, 12.0 / sqrt(max(t, 1e-300))) if t > 0 else profile.r_cut
        val, err = integrate.quad(lambda r: smooth(r, t), 0.0, split, weight="alg",
                                  wvar=(beta, 0.0), epsabs=0.0, epsrel=epsrel, limit=1000)
        if split < profile.r_cut:
            v2, e2 = integrate.quad(lambda r: r**beta * smooth(r, t), split, profile.r_cut,
                                    epsabs=0.0, epsrel=epsrel, limit=1000)
            val += v2
            err += e2
        values[i] = np.sqrt(pref * val)
        errors[i] = 0.5 * err / max(val, 1e-300) * values[i]  # error of the square root
    if full_output:
        return values, errors
    return values


@dataclass(frozen=True)
class DecayPrediction:
    n: int
    s: float
    alpha: float
    q: float
    rate: float
    p: float = 2.0


def formula_rate(n: int, s: float, alpha: float, q: float) -> float:
    """n/4 + ((alpha+s) q - n) / (2 q), with the q = inf limit n/4 + (alpha+s)/2."""
    if isinf(q):
        return n / 4 + (alpha + s) / 2
    return n / 4 + ((alpha + s) * q - n) / (2 * q)


def predicted_rate(n: int, s: float, alpha: float, q: float, p: float = 2.0,
                   check_window: bool = True) -> DecayPrediction:
    """Decay exponent of ||Lambda^alpha (u, Gamma)||_{L^q} with the parameter window enforced.

    ``check_window=False`` skips only the alpha/q/p window (useful for the
    linear flow, which is defined beyond it); the range of ``s`` is always checked.
    """
    if n < 2:
        raise WindowError(f"n >= 2 violated: n={n}")
    p_hi = 4.0 if n == 2 else min(4.0, 2 * n / (n - 2))
    if check_window:
        if not 2 <= p <= p_hi:
            raise WindowError(f"2 <= p <= min(4, 2n/(n-2)) violated: p={p}")
        if n == 2 and p == 4:
            raise WindowError("p != 4 if n = 2 violated")
    if not n / 2 - 1 < s:
        raise WindowError(f"n/2 - 1 < s violated: s={s} <= {n / 2 - 1}")
    if not s < n / p:
        raise WindowError(f"s < n/p violated: s={s} >= {n / p}")
    if check_window:
        if not p <= q <= inf:
            raise WindowError(f"p <= q <= inf violated: q={q} < p={p}")
        lo = n / q - n / p - s
        hi = n / q - 1
        if not lo < alpha:
            raise WindowError(f"n/q - n/p - s < alpha violated: alpha={alpha} <= {lo}")
        if not alpha <= hi:
            raise WindowError(f"alpha <= n/q - 1 violated: alpha={alpha} > {hi}")
    return DecayPrediction(n=n, s=s, alpha=alpha, q=q, p=p, rate=formula_rate(n, s, alpha, q))
