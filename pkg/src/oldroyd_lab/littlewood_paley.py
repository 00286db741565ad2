"""Homogeneous Littlewood-Paley decomposition and Besov norms on the lattice.

The dyadic bump is built as a telescoping difference of one smooth cutoff
``theta`` (equal to 1 on [0, 3/2] and 0 on [8/3, inf)):

    phi(r) = theta(r) - theta(2 r),     chi(r) = theta(2 r),

so ``phi`` is supported in [3/4, 8/3], ``chi`` in [0, 4/3], and both partition
identities hold to round-off.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, floor, log2, sqrt

import numpy as np

from .spectral import (
    Grid,
    SpectralField,
    gradient,
    transform_forward,
    transform_inverse,
)

__all__ = [
    "theta",
    "phi",
    "chi",
    "DyadicPartition",
    "BesovSpec",
    "TimeAccumulator",
    "make_partition",
    "block",
    "low_cut",
    "high_cut",
    "lp_norm",
    "block_norms",
    "besov_norm",
    "chemin_lerner_update",
    "chemin_lerner_norm",
    "lemma_ratio_product",
    "lemma_ratio_commutator",
    "IndexConstraintError",
]

_R0, _R1 = 1.5, 8.0 / 3.0


def _smoothstep(x):
    # C-infinity step: 0 for x <= 0, 1 for x >= 1.
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def theta(r):
    return 1.0 - _smoothstep((np.asarray(r, dtype=float) - _R0) / (_R1 - _R0))


def phi(r):
    r = np.asarray(r, dtype=float)
    return theta(r) - theta(2 * r)


def chi(r):
    return theta(2 * np.asarray(r, dtype=float))


class IndexConstraintError(ValueError):
    pass


@dataclass
class DyadicPartition:
    grid: Grid
    j0: int
    j_min: int
    j_max: int
    _tables: dict = field(default_factory=dict, repr=False)

    @property
    def js(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def table(self, j: int) -> np.ndarray:
        """phi(2^-j |k|) on the stored lattice (zero at k = 0)."""
        if j not in self._tables:
            self._tables[j] = phi(2.0**-j * self.grid.kmag)
        return self._tables[j]

    def low_table(self) -> np.ndarray:
        if "low" not in self._tables:
            t = chi(2.0 ** -(self.j0 + 1) * self.grid.kmag)
            self._tables["low"] = t
        return self._tables["low"]

    def side_range(self, side: str) -> range:
        # low: j <= j0 ; high: j >= j0 - 1 (the two overlap on purpose)
        if side == "full":
            return self.js
        if side == "low":
            return range(self.j_min, min(self.j0, self.j_max) + 1)
        if side == "high":
            return range(max(self.j0 - 1, self.j_min), self.j_max + 1)
        raise ValueError(f"unknown side {side!r}")


def resolvable_range(grid: Grid) -> tuple[int, int]:
    """Smallest j-range whose blocks sum to 1 at every nonzero lattice |k|."""
    j_min = floor(log2(0.75 * grid.k_min))
    r_max = sqrt(grid.n) * grid.k_min * grid.N / 2
    j_max = ceil(log2(r_max / _R0))
    return j_min, j_max


def make_partition(grid: Grid, j0: int = 0) -> DyadicPartition:
    j_min, j_max = resolvable_range(grid)
    if not j_min <= j0 <= j_max:
        raise ValueError(f"j0={j0} outside the resolvable band [{j_min}, {j_max}]")
    return DyadicPartition(grid, j0, j_min, j_max)


def block(f: SpectralField, j: int, partition: DyadicPartition) -> SpectralField:
    return f.with_coeffs(f.coeffs * partition.table(j))


def low_cut(f: SpectralField, partition: DyadicPartition) -> SpectralField:
    return f.with_coeffs(f.coeffs * partition.low_table())


def high_cut(f: SpectralField, partition: DyadicPartition) -> SpectralField:
    return f - low_cut(f, partition)


@dataclass(frozen=True)
class BesovSpec:
    s: float
    p: float = 2.0
    side: str = "full"

    def __post_init__(self):
        if not 1 <= self.p <= np.inf:
            raise ValueError(f"p must lie in [1, inf], got {self.p}")
        if self.side not in ("full", "low", "high"):
            raise ValueError(f"unknown side {self.side!r}")


def lp_norm(values: np.ndarray, grid: Grid, p: float) -> float:
    """Lattice L^p norm of a (ncomp, ...) array using the pointwise Euclidean modulus.

    Tensor arrays should be passed with all n*n entries so the modulus is
    the Frobenius norm.
    """
    mod = np.sqrt(np.sum(values**2, axis=0)) if values.ndim == grid.n + 1 else np.abs(values)
    if p == np.inf:
        return float(mod.max())
    if p == 2:
        return float(np.sqrt(np.sum(mod**2) * grid.dx**grid.n))
    return float((np.sum(mod**p) * grid.dx**grid.n) ** (1.0 / p))


def _frobenius_values(f: SpectralField) -> np.ndarray:
    vals = transform_inverse(f)
    if f.rank != "sym":
        return vals
    # off-diagonal entries appear twice in the full tensor
    n = f.grid.n
    w = np.array([1.0 if i == j else np.sqrt(2.0) for i in range(n) for j in range(i, n)])
    return vals * w.reshape((-1,) + (1,) * n)


def block_norms(f: SpectralField, partition: DyadicPartition, p: float = 2.0,
                js=None) -> dict[int, float]:
    """``{j: ||Delta_j f||_{L^p}}`` over ``js`` (default: the full resolvable range)."""
    g = f.grid
    js = partition.js if js is None else js
    out = {}
    for j in js:
        c = f.coeffs * partition.table(j)
        if not np.any(c):
            out[j] = 0.0
            continue
        if p == 2:
            # Parseval; weights double the hidden half of the spectrum
            w = g.weights
            if f.rank == "sym":
                n = g.n
                cw = np.array([1.0 if i == jj else 2.0 for i in range(n) for jj in range(i, n)])
                tot = np.tensordot(cw, np.abs(c) ** 2 * w, axes=1).sum()
            else:
                tot = np.sum(np.abs(c) ** 2 * w)
            out[j] = float(np.sqrt(tot * g.volume))
        else:
            out[j] = lp_norm(_frobenius_values(f.with_coeffs(c)), g, p)
    return out


def besov_norm(f, spec: BesovSpec, partition: DyadicPartition, full_output: bool = False):
    """sum_j 2^{js} ||Delta_j f||_{L^p} over the side's j-range.

    ``f`` may be a SpectralField or a sequence of them, in which case the
    norms are added (the usual convention for ``||(u, v)||``).

    With ``full_output`` a dict with the truncation range and per-block
    values is returned as a second element.
    """
    fields = [f] if isinstance(f, SpectralField) else list(f)
    js = partition.side_range(spec.side)
    total = 0.0
    blocks = {}
    for fi in fields:
        bn = block_norms(fi, partition, spec.p, js)
        for j, v in bn.items():
            blocks[j] = blocks.get(j, 0.0) + v
            total += 2.0 ** (j * spec.s) * v
    if full_output:
        mean = max(np.abs(fi.coeffs[(slice(None),) + (0,) * fi.grid.n]).max() for fi in fields)
        info = {"j_min": js.start, "j_max": js.stop - 1, "blocks": blocks, "mean": float(mean)}
        return total, info
    return total


@dataclass
class TimeAccumulator:
    """Running per-block L^1-in-time integrals and sup-in-time maxima."""

    partition: DyadicPartition
    p: float = 2.0
    t: float = 0.0
    samples: int = 0
    integral: dict = field(default_factory=dict)
    sup: dict = field(default_factory=dict)
    last: dict = field(default_factory=dict)


def chemin_lerner_update(acc: TimeAccumulator, f, dt: float = 0.0) -> TimeAccumulator:
    """Record the block norms of ``f`` sampled ``dt`` after the previous sample.

    ``dt`` is ignored on the first call. Integrals use the trapezoidal rule.
    """
    fields = [f] if isinstance(f, SpectralField) else list(f)
    cur: dict[int, float] = {}
    for fi in fields:
        for j, v in block_norms(fi, acc.partition, acc.p).items():
            cur[j] = cur.get(j, 0.0) + v
    if acc.samples:
        if dt < 0:
            raise ValueError("time step must be non-negative")
        for j, v in cur.items():
            acc.integral[j] = acc.integral.get(j, 0.0) + 0.5 * dt * (acc.last.get(j, 0.0) + v)
        acc.t += dt
    for j, v in cur.items():
        acc.sup[j] = max(acc.sup.get(j, 0.0), v)
        acc.integral.setdefault(j, 0.0)
    acc.last = cur
    acc.samples += 1
    return acc


def chemin_lerner_norm(acc: TimeAccumulator, spec: BesovSpec, mode: str = "sup") -> float:
    if spec.p != acc.p:
        raise ValueError(f"accumulator was built for p={acc.p}, not p={spec.p}")
    table = {"sup": acc.sup, "L1": acc.integral}[mode]
    js = acc.partition.side_range(spec.side)
    return float(sum(2.0 ** (j * spec.s) * table.get(j, 0.0) for j in js))


# -- empirical checks of the product and commutator estimates ---------------------------

def _ratio(lhs: float, rhs: float) -> float:
    if lhs == 0.0:
        return 0.0
    if rhs == 0.0:
        return np.inf
    return lhs / rhs


def lemma_ratio_product(u: SpectralField, v: SpectralField, s1: float, s2: float,
                        p: float, q: float, partition: DyadicPartition) -> float:
    """||uv||_{B^{s1+s2-n/q}_{p,1}} / (||u||_{B^{s1}_{q,1}} ||v||_{B^{s2}_{p,1}})."""
    n = u.grid.n
    ip, iq = 1.0 / p, 1.0 / q
    if s1 > n * iq:
        raise IndexConstraintError(f"s1 <= n/q violated: {s1} > {n * iq}")
    if s2 > n * min(ip, iq):
        raise IndexConstraintError(f"s2 <= n*min(1/p,1/q) violated: {s2} > {n * min(ip, iq)}")
    if not s1 + s2 > n * max(0.0, ip + iq - 1):
        raise IndexConstraintError(
            f"s1+s2 > n*max(0,1/p+1/q-1) violated: {s1 + s2} <= {n * max(0.0, ip + iq - 1)}")
    if u.rank != "scalar" or v.rank != "scalar":
        raise ValueError("product ratio takes scalar fields")
    prod = transform_forward(u.grid, transform_inverse(u)[0] * transform_inverse(v)[0])
    lhs = besov_norm(prod, BesovSpec(s1 + s2 - n * iq, p), partition)
    rhs = besov_norm(u, BesovSpec(s1, q), partition) * besov_norm(v, BesovSpec(s2, p), partition)
    return _ratio(lhs, rhs)


def lemma_ratio_commutator(u: SpectralField, v: SpectralField, s: float, p: float, q: float,
                           partition: DyadicPartition, div_tol: float = 1e-10) -> float:
    """sum_j 2^{js} ||[Delta_j, u.grad] v||_{L^q} / (||grad u||_{B^{n/p}_{p,1}} ||v||_{B^s_{q,1}})."""
    g = u.grid
    n = g.n
    lo = -1 - n * min(1.0 / p, 1 - 1.0 / q)
    if not lo < s <= n / p:
        raise IndexConstraintError(f"-1-n*min(1/p,1-1/q) < s <= n/p violated: s={s}, range ({lo}, {n / p}]")
    if u.rank != "vector" or v.rank != "scalar":
        raise ValueError("commutator ratio takes a vector u and a scalar v")
    divu = np.abs(sum(kk * c for kk, c in zip(g.k_odd, u.coeffs)))
    scale = np.abs(u.coeffs).max() * g.kmag.max()
    if scale > 0 and divu.max() > div_tol * scale:
        raise IndexConstraintError("div u = 0 violated")
    grad_u = gradient(u)
    if not np.any(grad_u.coeffs):
        # constant transport commutes with every Fourier multiplier
        return 0.0
    U = transform_inverse(u)

    def transport(w: SpectralField) -> np.ndarray:
        G = transform_inverse(gradient(w))
        return sum(U[i] * G[i] for i in range(n))

    adv = transform_forward(g, transport(v))
    lhs = 0.0
    for j in partition.js:
        comm = transform_inverse(block(adv, j, partition))[0] - transport(block(v, j, partition))
        lhs += 2.0 ** (j * s) * lp_norm(comm, g, q)
    rhs = besov_norm(grad_u, BesovSpec(n / p, p), partition) * besov_norm(v, BesovSpec(s, q), partition)
    return _ratio(lhs, rhs)
