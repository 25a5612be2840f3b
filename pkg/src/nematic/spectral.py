"""Fourier calculus on the periodic unit torus.

Fields are stored as real-to-complex FFT coefficients normalised so that

    f(x) = sum_k  f_k exp(2 pi i k.x),    x in [0, 1)^n,

i.e. ``numpy.fft.rfftn(samples, norm="forward")``.  With this normalisation
the coefficients do not depend on the sampling grid, the k = 0 coefficient is
the spatial mean, and Parseval reads ||f||^2 = sum_k |f_k|^2 because |Q| = 1.

Derivatives use angular wavenumbers 2 pi k.  Odd derivatives drop the Nyquist
row/column (it has no real-valued derivative), and every nonlinear product is
truncated back to the band |k_i| < N/2, so the dynamical state never carries
Nyquist content.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TorusGrid",
    "SpectralField",
    "VectorField",
    "gradient",
    "divergence",
    "laplacian",
    "jacobian",
    "leray_project",
    "dealiased_product",
    "inner",
    "norm",
    "random_field",
]

TWO_PI = 2.0 * np.pi
NORM_KINDS = ("L2", "H1", "H2", "H1dual")


def _as_fraction(value) -> Fraction:
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value).limit_denominator(64)
    return Fraction(value)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the unit torus [0, 1)^dim with its wavenumber lattice.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    resolution : int
        Points per axis; a power of two, at least 8.
    padding_factor : Fraction
        Oversampling used by dealiased products (3/2 is exact for quadratic
        terms, 2 for cubic ones).
    """

    dim: int
    resolution: int
    padding_factor: Fraction = field(default=Fraction(3, 2))

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        n = self.resolution
        if n < 8 or n & (n - 1):
            raise ValueError(f"resolution must be a power of two >= 8, got {n}")
        p = _as_fraction(self.padding_factor)
        if p < 1:
            raise ValueError(f"padding_factor must be >= 1, got {p}")
        object.__setattr__(self, "padding_factor", p)

    # -- shapes ---------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return (self.resolution,) * self.dim

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return spectral_shape(self.dim, self.resolution)

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @cached_property
    def padded_resolution(self) -> int:
        m = int(np.ceil(self.resolution * self.padding_factor))
        return m + (m % 2)

    # -- wavenumbers ----------------------------------------------------------
    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers k_i, broadcastable to the spectral shape."""
        return _integer_wavenumbers(self.dim, self.resolution)

    @cached_property
    def derivative_wavenumbers(self) -> np.ndarray:
        """2 pi k_i with the Nyquist entries zeroed, stacked along axis 0."""
        n = self.resolution
        out = []
        for k in self.wavenumbers:
            kd = np.where(np.abs(k) == n // 2, 0, k).astype(float) * TWO_PI
            out.append(np.broadcast_to(kd, self.spectral_shape))
        return _readonly(np.stack(out))

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|2 pi k|^2 on the spectral lattice."""
        ksq = sum((TWO_PI * k.astype(float)) ** 2 for k in self.wavenumbers)
        return _readonly(np.broadcast_to(ksq, self.spectral_shape).copy())

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Multiplicity of each half-spectrum coefficient in the full spectrum."""
        n = self.resolution
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return _readonly(np.broadcast_to(w, self.spectral_shape).copy())

    @cached_property
    def band_mask(self) -> np.ndarray:
        """True on modes with every |k_i| < N/2."""
        n = self.resolution
        mask = np.ones(self.spectral_shape, dtype=bool)
        for k in self.wavenumbers:
            mask &= np.abs(k) < n // 2
        return _readonly(mask)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.resolution) / self.resolution
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def with_padding(self, padding_factor) -> "TorusGrid":
        return TorusGrid(self.dim, self.resolution, padding_factor)

    # -- transforms -----------------------------------------------------------
    def forward(self, samples: np.ndarray) -> np.ndarray:
        """Samples on an m^dim grid (m >= N) -> coefficients on this grid."""
        m = samples.shape[-1]
        coeffs = np.fft.rfftn(samples, axes=self.axes, norm="forward")
        if m == self.resolution:
            return coeffs
        return truncate(coeffs, self.dim, self.resolution)

    def inverse(self, coeffs: np.ndarray, m: int | None = None) -> np.ndarray:
        """Coefficients -> samples on an m^dim grid (default: this grid)."""
        m = self.resolution if m is None else m
        if m != self.resolution:
            coeffs = pad(coeffs, self.dim, m)
        return np.fft.irfftn(coeffs, s=(m,) * self.dim, axes=self.axes, norm="forward")


def spectral_shape(dim: int, n: int) -> tuple[int, ...]:
    return (n,) * (dim - 1) + (n // 2 + 1,)


def _integer_wavenumbers(dim: int, n: int) -> tuple[np.ndarray, ...]:
    full = np.fft.fftfreq(n, 1.0 / n).astype(int)
    half = np.arange(n // 2 + 1)
    ks = []
    for axis in range(dim):
        k = half if axis == dim - 1 else full
        shape = [1] * dim
        shape[axis] = k.size
        ks.append(_readonly(k.reshape(shape)))
    return tuple(ks)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _band_blocks(dim: int, n: int, m: int):
    """Pairs of index tuples mapping the base band of an n-grid into an m-grid."""
    h = n // 2
    full_axis = [(slice(0, h), slice(0, h)), (slice(h + 1, n), slice(m - h + 1, m))]
    last_axis = [(slice(0, h), slice(0, h))]
    for combo in itertools.product(*([full_axis] * (dim - 1) + [last_axis])):
        src = tuple(c[0] for c in combo)
        dst = tuple(c[1] for c in combo)
        yield (Ellipsis,) + src, (Ellipsis,) + dst


def pad(coeffs: np.ndarray, dim: int, m: int) -> np.ndarray:
    """Zero-pad base-band coefficients of an N-grid onto an m-grid (m > N)."""
    n = coeffs.shape[-2] if dim > 1 else 2 * (coeffs.shape[-1] - 1)
    out = np.zeros(coeffs.shape[:-dim] + spectral_shape(dim, m), dtype=complex)
    for src, dst in _band_blocks(dim, n, m):
        out[dst] = coeffs[src]
    return out


def truncate(coeffs: np.ndarray, dim: int, n: int) -> np.ndarray:
    """Keep the base band |k_i| < n/2 of coefficients from a finer grid."""
    m = coeffs.shape[-2]
    out = np.zeros(coeffs.shape[:-dim] + spectral_shape(dim, n), dtype=complex)
    for src, dst in _band_blocks(dim, n, m):
        out[src] = coeffs[dst]
    return out


class SpectralField:
    """A real field on a TorusGrid, held as Fourier coefficients.

    ``coeffs`` has shape ``components + grid.spectral_shape``: ``()`` for a
    scalar, ``(n,)`` for a vector, ``(n, n)`` for a matrix field.  Instances
    are treated as immutable values; the coefficient array is read-only.
    """

    def __init__(self, grid: TorusGrid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[coeffs.ndim - grid.dim:] != grid.spectral_shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not end in {grid.spectral_shape}"
            )
        if coeffs.flags.writeable:
            coeffs = coeffs.copy()
            coeffs.flags.writeable = False
        self.grid = grid
        self.coeffs = coeffs

    @classmethod
    def from_samples(cls, grid: TorusGrid, samples) -> "SpectralField":
        samples = np.array(samples, dtype=float)
        out = cls(grid, np.fft.rfftn(samples, axes=grid.axes, norm="forward"))
        # keep the exact samples so that writing them out again is lossless
        samples.flags.writeable = False
        out.__dict__["samples"] = samples
        return out

    @classmethod
    def from_function(cls, grid: TorusGrid, fn: Callable) -> "SpectralField":
        """Sample ``fn(*coords)`` on the grid; tuples/lists give vector fields."""
        values = fn(*grid.coordinates())
        if isinstance(values, (tuple, list)):
            values = np.stack([np.broadcast_to(np.asarray(v, float), grid.shape) for v in values])
        else:
            values = np.broadcast_to(np.asarray(values, float), grid.shape)
        return cls.from_samples(grid, values)

    @classmethod
    def constant(cls, grid: TorusGrid, value) -> "SpectralField":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + grid.spectral_shape, dtype=complex)
        coeffs[(Ellipsis,) + (0,) * grid.dim] = value
        return cls(grid, coeffs)

    @classmethod
    def zeros(cls, grid: TorusGrid, components: tuple[int, ...] = ()) -> "SpectralField":
        return cls(grid, np.zeros(components + grid.spectral_shape, dtype=complex))

    @property
    def components(self) -> tuple[int, ...]:
        return self.coeffs.shape[: self.coeffs.ndim - self.grid.dim]

    @property
    def rank(self) -> int:
        return len(self.components)

    @cached_property
    def samples(self) -> np.ndarray:
        s = self.grid.inverse(self.coeffs)
        s.flags.writeable = False
        return s

    @property
    def mean(self):
        return self.coeffs[(Ellipsis,) + (0,) * self.grid.dim].real

    def __getitem__(self, index) -> "SpectralField":
        sub = self.coeffs[index]
        if sub.ndim == self.grid.dim + 1 and sub.shape[0] == self.grid.dim:
            return VectorField(self.grid, sub)
        return SpectralField(self.grid, sub)

    def __len__(self) -> int:
        if not self.components:
            raise TypeError("scalar field has no components")
        return self.components[0]

    def _new(self, coeffs):
        return type(self)(self.grid, coeffs)

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return self._new(self.coeffs + other.coeffs)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return self._new(self.coeffs - other.coeffs)
        return NotImplemented

    def __neg__(self):
        return self._new(-self.coeffs)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return self._new(self.coeffs * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"{type(self).__name__}(components={self.components}, grid={self.grid})"


class VectorField(SpectralField):
    """An n-vector field on an n-dimensional torus."""

    def __init__(self, grid: TorusGrid, coeffs: np.ndarray):
        super().__init__(grid, coeffs)
        if self.components != (grid.dim,):
            raise ValueError(f"vector field needs {grid.dim} components, got {self.components}")

    @classmethod
    def stack(cls, fields: Sequence[SpectralField]) -> "VectorField":
        grid = fields[0].grid
        return cls(grid, np.stack([f.coeffs for f in fields]))


# -- differential operators ---------------------------------------------------

def gradient(f: SpectralField) -> SpectralField:
    """Gradient; a new trailing component axis holds d/dx_i.

    For a scalar this is a VectorField; for a vector V the result has
    components (i, j) = dV_i/dx_j, i.e. the Jacobian.
    """
    g = f.grid
    ik = 1j * g.derivative_wavenumbers
    out = np.expand_dims(f.coeffs, f.coeffs.ndim - g.dim) * ik
    if f.rank == 0:
        return VectorField(g, out)
    return SpectralField(g, out)


def jacobian(v: SpectralField) -> SpectralField:
    """Matrix field J_ij = dv_i/dx_j, so that (J d)_i = (d . grad) v_i."""
    return gradient(v)


def divergence(v: SpectralField) -> SpectralField:
    """Contract the last component axis with the gradient: (div s)_i = d_j s_ij."""
    g = v.grid
    if not v.components or v.components[-1] != g.dim:
        raise ValueError("divergence needs a trailing component axis of length dim")
    ik = 1j * g.derivative_wavenumbers
    c = v.coeffs
    out = np.sum(c * ik, axis=c.ndim - g.dim - 1)
    cls = VectorField if out.shape[: out.ndim - g.dim] == (g.dim,) else SpectralField
    return cls(g, out)


def laplacian(f: SpectralField) -> SpectralField:
    return type(f)(f.grid, -f.grid.k_squared * f.coeffs)


def leray_project(v: SpectralField) -> VectorField:
    """Remove the gradient part of a vector field mode by mode.

    The k = 0 coefficient (the mean) is left untouched.
    """
    g = v.grid
    return VectorField(g, leray_coeffs(g, v.coeffs))


def leray_coeffs(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    kd = grid.derivative_wavenumbers
    ksq = np.sum(kd * kd, axis=0)
    inv = np.divide(1.0, ksq, out=np.zeros_like(ksq), where=ksq > 0)
    kdotv = np.sum(kd * c, axis=0)
    out = c - kd * (kdotv * inv)
    out[(Ellipsis,) + (0,) * grid.dim] = c[(Ellipsis,) + (0,) * grid.dim]
    return out


# -- products -----------------------------------------------------------------

def dealiased_product(fields: Sequence[SpectralField], padding_factor=None) -> SpectralField:
    """Pointwise product of fields, evaluated on a padded grid and truncated.

    Scalars multiply pointwise; at most one non-scalar factor is allowed and it
    is scaled componentwise.  ``padding_factor`` defaults to the grid's own.
    """
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("fields live on different grids")
    pg = g if padding_factor is None else g.with_padding(padding_factor)
    m = pg.padded_resolution
    prod = None
    for f in fields:
        s = g.inverse(f.coeffs, m)
        prod = s if prod is None else prod * s
    coeffs = g.forward(prod)
    if m == g.resolution:
        coeffs = coeffs * g.band_mask
    cls = VectorField if coeffs.shape[: coeffs.ndim - g.dim] == (g.dim,) else SpectralField
    return cls(g, coeffs)


# -- norms --------------------------------------------------------------------

def inner(a: SpectralField, b: SpectralField) -> float:
    """L2 inner product over Q, summed over components."""
    w = a.grid.parseval_weights
    return float(np.sum(w * (a.coeffs * np.conj(b.coeffs)).real))


def norm(f: SpectralField, kind: str = "L2") -> float:
    """Sobolev norm of a (possibly vector-valued) field via Parseval.

    kind is one of ``L2``, ``H1``, ``H2`` or ``H1dual`` with multipliers
    1, (1+|2 pi k|^2), (1+|2 pi k|^2)^2 and 1/(1+|2 pi k|^2).
    """
    return float(np.sqrt(norm_squared(f.grid, f.coeffs, kind)))


def norm_squared(grid: TorusGrid, coeffs: np.ndarray, kind: str = "L2") -> float:
    w = grid.parseval_weights
    power = np.abs(coeffs) ** 2
    if kind == "L2":
        mult = w
    elif kind == "H1":
        mult = w * (1.0 + grid.k_squared)
    elif kind == "H2":
        mult = w * (1.0 + grid.k_squared) ** 2
    elif kind == "H1dual":
        mult = w / (1.0 + grid.k_squared)
    else:
        raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")
    return float(np.sum(mult * power))


def random_field(grid: TorusGrid, rng: np.random.Generator, components: tuple[int, ...] = (),
                 kmax: int = 4, amplitude: float = 1.0, mean: bool = True) -> SpectralField:
    """Smooth random real field with modes |k_i| <= kmax (Gaussian coefficients)."""
    kmax = min(kmax, grid.resolution // 2 - 1)
    shape = components + grid.spectral_shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    mask = np.ones(grid.spectral_shape, dtype=bool)
    for k in grid.wavenumbers:
        mask &= np.abs(k) <= kmax
    if not mean:
        mask[(0,) * grid.dim] = False
    # round trip through samples to impose Hermitian symmetry on the k_last = 0 plane
    samples = grid.inverse(c * mask)
    samples *= amplitude / max(np.sqrt(np.mean(samples ** 2)), 1e-300)
    cls = VectorField if components == (grid.dim,) else SpectralField
    return cls(grid, grid.forward(samples) * grid.band_mask)
