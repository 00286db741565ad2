"""Fourier machinery on the periodic box [0, L)^n.

Fields are stored as real-to-complex (``rfftn``) half spectra, normalised so
that the stored coefficient of mode ``k`` is the Fourier-series amplitude::

    f(x) = sum_k c_k exp(i k.x),      k = 2 pi m / L.

Only the last axis is halved; conjugate symmetry is therefore structural
except on the planes ``m_last = 0`` and ``m_last = N/2``, which are kept
consistent by routing every physical-space product through ``irfftn``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "SpectralField",
    "RANKS",
    "sym_index",
    "transform_forward",
    "transform_inverse",
    "lambda_power",
    "leray_project",
    "gamma_from_tau",
    "tau_from_gamma",
    "gradient",
    "divergence",
    "sym_grad",
    "skew_grad",
    "dealias",
    "pressure",
    "l2_norm",
    "inner",
    "full_spectrum",
    "conjugate_symmetry_residual",
    "random_field",
    "resample",
]

RANKS = ("scalar", "vector", "sym", "matrix")


def sym_index(n: int) -> list[tuple[int, int]]:
    """Upper-triangle (i, j) pairs in storage order: 11, 12, (13,) 22, ..."""
    return [(i, j) for i in range(n) for j in range(i, n)]


def _ncomp(rank: str, n: int) -> int:
    return {"scalar": 1, "vector": n, "sym": n * (n + 1) // 2, "matrix": n * n}[rank]


@dataclass(frozen=True)
class Grid:
    n: int
    N: int
    L: float = 2 * np.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"dimension n must be 2 or 3, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"box length L must be positive, got {self.L}")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.N,) * (self.n - 1) + (self.N // 2 + 1,)

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def volume(self) -> float:
        return self.L ** self.n

    @property
    def k_min(self) -> float:
        return 2 * np.pi / self.L

    @cached_property
    def m(self) -> tuple[np.ndarray, ...]:
        """Integer mode numbers, broadcastable to ``spectral_shape``."""
        full = np.fft.fftfreq(self.N, 1.0 / self.N)
        half = np.fft.rfftfreq(self.N, 1.0 / self.N)
        axes = [full] * (self.n - 1) + [half]
        out = []
        for d, a in enumerate(axes):
            shp = [1] * self.n
            shp[d] = a.size
            out.append(a.reshape(shp))
        return tuple(out)

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        return tuple(self.k_min * m for m in self.m)

    @cached_property
    def k_odd(self) -> tuple[np.ndarray, ...]:
        # Nyquist wavenumber zeroed so odd-order derivatives stay real.
        out = []
        for m in self.m:
            kk = self.k_min * m
            out.append(np.where(np.abs(m) == self.N // 2, 0.0, kk))
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(kk**2 for kk in self.k) * np.ones(self.spectral_shape)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def inv_kmag(self) -> np.ndarray:
        out = np.zeros(self.spectral_shape)
        nz = self.k2 > 0
        out[nz] = 1.0 / self.kmag[nz]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = np.floor(self.dealias_fraction * self.N / 2)
        mask = np.ones(self.spectral_shape, dtype=bool)
        for m in self.m:
            mask &= np.abs(m) <= cut
        return mask

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored half-spectrum mode in the full lattice."""
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        shp = [1] * (self.n - 1) + [w.size]
        return np.broadcast_to(w.reshape(shp), self.spectral_shape)

    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.N) * self.dx
        return tuple(np.meshgrid(*([x] * self.n), indexing="ij"))

    def mode_index(self, m: tuple[int, ...]) -> tuple[int, ...]:
        """Storage index of integer mode ``m``; ``m[-1]`` must be >= 0."""
        if m[-1] < 0:
            raise ValueError("last mode component must be non-negative in half storage")
        return tuple(int(mi) % self.N for mi in m[:-1]) + (int(m[-1]),)


@dataclass
class SpectralField:
    grid: Grid
    rank: str
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.rank not in RANKS:
            raise ValueError(f"unknown rank {self.rank!r}")
        want = (_ncomp(self.rank, self.grid.n),) + self.grid.spectral_shape
        if self.coeffs.shape != want:
            raise ValueError(f"coefficient shape {self.coeffs.shape} does not match {want}")

    @classmethod
    def zeros(cls, grid: Grid, rank: str) -> "SpectralField":
        shape = (_ncomp(rank, grid.n),) + grid.spectral_shape
        return cls(grid, rank, np.zeros(shape, dtype=complex))

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.rank, self.coeffs.copy())

    def with_coeffs(self, coeffs: np.ndarray, rank: str | None = None) -> "SpectralField":
        return SpectralField(self.grid, rank or self.rank, coeffs)

    def physical(self) -> np.ndarray:
        return transform_inverse(self)

    def matrix(self) -> list[list[np.ndarray]]:
        """Nested n x n list of component arrays (views) for sym/matrix ranks."""
        n = self.grid.n
        if self.rank == "matrix":
            return [[self.coeffs[i * n + j] for j in range(n)] for i in range(n)]
        if self.rank == "sym":
            out = [[None] * n for _ in range(n)]
            for c, (i, j) in enumerate(sym_index(n)):
                out[i][j] = out[j][i] = self.coeffs[c]
            return out
        raise ValueError(f"rank {self.rank!r} has no matrix form")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs * a)

    __rmul__ = __mul__


def _axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(-grid.n, 0))


def _rank_for(grid: Grid, ncomp: int) -> str:
    n = grid.n
    for r in RANKS:
        if _ncomp(r, n) == ncomp:
            return r
    raise ValueError(f"cannot infer rank for {ncomp} components in dimension {n}")


def transform_forward(grid: Grid, values: np.ndarray, rank: str | None = None) -> SpectralField:
    """Real lattice values -> SpectralField.

    ``values`` has shape ``grid.shape`` (scalar) or ``(ncomp,) + grid.shape``.
    """
    values = np.asarray(values, dtype=float)
    if values.shape == grid.shape:
        values = values[None]
    if values.shape[1:] != grid.shape:
        raise ValueError(f"lattice shape {values.shape} does not match grid {grid.shape}")
    if rank is None:
        rank = "scalar" if values.shape[0] == 1 else _rank_for(grid, values.shape[0])
    coeffs = sfft.rfftn(values, axes=_axes(grid)) / grid.N**grid.n
    return SpectralField(grid, rank, coeffs)


def transform_inverse(f: SpectralField) -> np.ndarray:
    """SpectralField -> real lattice values, shape ``(ncomp,) + grid.shape``."""
    g = f.grid
    return sfft.irfftn(f.coeffs * g.N**g.n, s=g.shape, axes=_axes(g))


def lambda_power(f: SpectralField, alpha: float) -> SpectralField:
    """Apply the multiplier |k|**alpha; the mean is dropped unless alpha == 0."""
    g = f.grid
    if alpha == 0:
        return f.copy()
    if alpha < 0:
        mean = np.abs(f.coeffs[(slice(None),) + (0,) * g.n]).max()
        if mean > 0:
            raise ValueError("negative power of Lambda is undefined on a field with nonzero mean")
        mult = g.inv_kmag ** (-alpha)
    else:
        mult = g.kmag**alpha
    return f.with_coeffs(f.coeffs * mult)


def leray_project(v: SpectralField) -> SpectralField:
    if v.rank != "vector":
        raise ValueError("Leray projection needs a vector field")
    g = v.grid
    # odd-derivative wavenumbers: Nyquist components are left alone, which keeps
    # the projection consistent with divergence() and with conjugate symmetry
    k = g.k_odd
    k2 = sum(kk * kk for kk in k)
    with np.errstate(invalid="ignore", divide="ignore"):
        kdotv = sum(kk * c for kk, c in zip(k, v.coeffs))
        scale = np.where(k2 > 0, kdotv / np.where(k2 > 0, k2, 1.0), 0.0)
    out = np.stack([c - kk * scale for kk, c in zip(k, v.coeffs)])
    return v.with_coeffs(out)


def divergence(f: SpectralField) -> SpectralField:
    """div of a vector (-> scalar) or of a tensor, (div tau)_i = d_j tau_ij."""
    g = f.grid
    if f.rank == "vector":
        c = sum(1j * kk * ci for kk, ci in zip(g.k_odd, f.coeffs))
        return SpectralField(g, "scalar", c[None])
    if f.rank in ("sym", "matrix"):
        M = f.matrix()
        c = np.stack([sum(1j * g.k_odd[j] * M[i][j] for j in range(g.n)) for i in range(g.n)])
        return SpectralField(g, "vector", c)
    raise ValueError(f"divergence undefined for rank {f.rank!r}")


def gradient(f: SpectralField) -> SpectralField:
    """Gradient of a scalar (-> vector) or vector (-> matrix, G_ij = d_j u_i)."""
    g = f.grid
    if f.rank == "scalar":
        return SpectralField(g, "vector", np.stack([1j * kk * f.coeffs[0] for kk in g.k_odd]))
    if f.rank == "vector":
        c = np.stack([1j * g.k_odd[j] * f.coeffs[i] for i in range(g.n) for j in range(g.n)])
        return SpectralField(g, "matrix", c)
    raise ValueError(f"gradient undefined for rank {f.rank!r}")


def sym_grad(u: SpectralField) -> SpectralField:
    """D(u) = (grad u + grad u^T) / 2, stored upper-triangular."""
    G = gradient(u).matrix()
    c = np.stack([0.5 * (G[i][j] + G[j][i]) for i, j in sym_index(u.grid.n)])
    return SpectralField(u.grid, "sym", c)


def skew_grad(u: SpectralField) -> SpectralField:
    """Omega(u) = (grad u - grad u^T) / 2 as a full matrix field."""
    G = gradient(u).matrix()
    n = u.grid.n
    c = np.stack([0.5 * (G[i][j] - G[j][i]) for i in range(n) for j in range(n)])
    return SpectralField(u.grid, "matrix", c)


def gamma_from_tau(tau: SpectralField) -> SpectralField:
    """Lambda^{-1} P div tau; mean-free and divergence-free."""
    if tau.rank != "sym":
        raise ValueError("gamma_from_tau needs a symmetric tensor field")
    pdiv = leray_project(divergence(tau))
    return pdiv.with_coeffs(pdiv.coeffs * tau.grid.inv_kmag)


def tau_from_gamma(gamma: SpectralField) -> SpectralField:
    """Symmetric tensor T with gamma_from_tau(T) = gamma for solenoidal, mean-free gamma.

    T(k) = -i (khat (x) g + g (x) khat). The linearised stress update D(u)
    equals T applied to -(|k|/2) u, which is how the solver's coupling
    reduces to the scalar 2x2 system.
    """
    g = gamma.grid
    khat = [kk * g.inv_kmag for kk in g.k_odd]
    c = np.stack(
        [-1j * (khat[i] * gamma.coeffs[j] + khat[j] * gamma.coeffs[i]) for i, j in sym_index(g.n)]
    )
    return SpectralField(g, "sym", c)


def dealias(f: SpectralField) -> SpectralField:
    return f.with_coeffs(f.coeffs * f.grid.dealias_mask)


def pressure(u: SpectralField, tau: SpectralField) -> SpectralField:
    """Solve -Lap p = div(u.grad u - div tau) mode-wise (output only, mean zero)."""
    g = u.grid
    U = transform_inverse(u)
    G = transform_inverse(gradient(u))
    n = g.n
    adv = np.stack([sum(U[j] * G[i * n + j] for j in range(n)) for i in range(n)])
    src = transform_forward(g, adv, "vector") - divergence(tau)
    rhs = divergence(dealias(src)).coeffs[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(g.k2 > 0, rhs / np.where(g.k2 > 0, g.k2, 1.0), 0.0)
    return SpectralField(g, "scalar", p[None])


def inner(f: SpectralField, h: SpectralField) -> float:
    """L^2 inner product over the box (Frobenius for tensors; off-diagonals twice)."""
    g = f.grid
    w = g.weights
    prod = np.real(np.conj(f.coeffs) * h.coeffs) * w
    if f.rank == "sym":
        mult = np.array([1.0 if i == j else 2.0 for i, j in sym_index(g.n)])
        return float(g.volume * np.tensordot(mult, prod, axes=1).sum())
    return float(g.volume * prod.sum())


def l2_norm(f: SpectralField) -> float:
    """L^2 norm via Parseval."""
    return float(np.sqrt(max(inner(f, f), 0.0)))


def full_spectrum(f: SpectralField) -> np.ndarray:
    """Expand to the full ``fftn`` lattice, shape ``(ncomp,) + grid.shape``."""
    g = f.grid
    return sfft.fftn(transform_inverse(f), axes=_axes(g)) / g.N**g.n


def _reflect(a: np.ndarray, n: int) -> np.ndarray:
    # a(-m) on a full lattice
    axes = tuple(range(-n, 0))
    return np.roll(np.flip(a, axis=axes), 1, axis=axes)


def conjugate_symmetry_residual(f: SpectralField) -> float:
    """max |c(-k) - conj c(k)| over the self-conjugate planes, relative to max |c|."""
    g = f.grid
    scale = np.abs(f.coeffs).max()
    if scale == 0:
        return 0.0
    res = 0.0
    for idx in (0, g.N // 2):
        plane = f.coeffs[..., idx]
        if g.n == 1:
            continue
        refl = _reflect(plane, g.n - 1)
        res = max(res, np.abs(refl - np.conj(plane)).max())
    return float(res / scale)


def random_field(grid: Grid, rank: str, rng: np.random.Generator, kmax: float | None = None,
                 mean_free: bool = True) -> SpectralField:
    """Random real field, optionally band-limited to |k| <= kmax."""
    nc = _ncomp(rank, grid.n)
    f = transform_forward(grid, rng.standard_normal((nc,) + grid.shape), rank)
    c = f.coeffs
    if kmax is not None:
        c = c * (grid.kmag <= kmax)
    if mean_free:
        c[(slice(None),) + (0,) * grid.n] = 0
    return f.with_coeffs(c)


def resample(f: SpectralField, grid: Grid) -> SpectralField:
    """Copy the modes of ``f`` onto another lattice with the same box length.

    Modes at or above either Nyquist index are dropped, so band-limited fields
    represent the same function on both grids.
    """
    if grid.n != f.grid.n or grid.L != f.grid.L:
        raise ValueError("resampling needs the same dimension and box length")
    out = SpectralField.zeros(grid, f.rank)
    M = min(grid.N, f.grid.N) // 2  # keep |m| < M
    idx_src, idx_dst = [], []
    for _ in range(grid.n - 1):
        ms = np.r_[np.arange(0, M), np.arange(-M + 1, 0)]
        idx_src.append(ms % f.grid.N)
        idx_dst.append(ms % grid.N)
    idx_src.append(np.arange(0, M))
    idx_dst.append(np.arange(0, M))
    out.coeffs[(slice(None),) + np.ix_(*idx_dst)] = f.coeffs[(slice(None),) + np.ix_(*idx_src)]
    return out
