"""Domain types: model parameters, ultraviolet cutoff profiles, periodic grids,
grid wavefunctions, external potentials, and their validity checks.

Everything here is immutable after construction and safe to share across
threads. All L2 norms carry the cell-volume weight so grid quantities converge
to their continuum values under refinement.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * np.pi

PROFILE_KINDS = ("sharp-flat", "sharp-over-omega", "gaussian")
POTENTIAL_FAMILIES = ("gaussian-well", "scaled-table")


class ModelError(ValueError):
    """Invalid model parameters or profile/grid combination."""


class IRViolationError(ModelError):
    """A momentum-space integrand is non-integrable at k=0 (d=1, sigma=0)."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Periodic position/momentum grid with wrapped FFT momenta.

    Positions per axis are x_m = -L/2 + m L/n; momenta are 2*pi*wrap(m)/L with
    the standard FFT wrapping, so max |k| = pi n / L (one Nyquist point).
    `dims` is the total configuration dimension (d*N, or d*(N-1) for fibers).
    """

    dims: int
    n: int
    L: float
    axis_positions: np.ndarray = field(init=False, repr=False, compare=False)
    axis_momenta: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dims < 1:
            raise ModelError(f"grid dims must be >= 1, got {self.dims}")
        if self.n % 2 != 0:
            raise ModelError(f"grid points per axis must be even, got n={self.n}")
        if not _is_power_of_two(self.n):
            raise ModelError(f"grid points per axis must be a power of two, got n={self.n}")
        if self.L <= 0:
            raise ModelError(f"box side must be positive, got L={self.L}")
        x = -self.L / 2 + np.arange(self.n) * (self.L / self.n)
        k = TWO_PI * np.fft.fftfreq(self.n, d=self.L / self.n)
        object.__setattr__(self, "axis_positions", x)
        object.__setattr__(self, "axis_momenta", k)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.dims

    @property
    def size(self) -> int:
        return self.n ** self.dims

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def dk(self) -> float:
        return TWO_PI / self.L

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dims

    @property
    def momentum_cell_volume(self) -> float:
        return self.dk ** self.dims

    @property
    def box_volume(self) -> float:
        return self.L ** self.dims

    @property
    def nyquist(self) -> float:
        return np.pi * self.n / self.L

    def momentum_radii(self) -> np.ndarray:
        """|k| over the full dims-dimensional momentum grid."""
        k2 = np.zeros(self.shape)
        for ax in range(self.dims):
            shape = [1] * self.dims
            shape[ax] = self.n
            k2 = k2 + (self.axis_momenta ** 2).reshape(shape)
        return np.sqrt(k2)

    def position_radii(self) -> np.ndarray:
        """|x| over the full dims-dimensional position grid."""
        x2 = np.zeros(self.shape)
        for ax in range(self.dims):
            shape = [1] * self.dims
            shape[ax] = self.n
            x2 = x2 + (self.axis_positions ** 2).reshape(shape)
        return np.sqrt(x2)

    def displacement_radii(self) -> np.ndarray:
        """|d| where index q along each axis means wrapped displacement q*L/n.

        This is the natural indexing of pair-potential tables produced by an
        FFT: entry q corresponds to x_i - x_j = q*L/n folded to [-L/2, L/2).
        """
        d = np.where(np.arange(self.n) < self.n // 2,
                     np.arange(self.n) * self.dx,
                     (np.arange(self.n) - self.n) * self.dx)
        d2 = np.zeros(self.shape)
        for ax in range(self.dims):
            shape = [1] * self.dims
            shape[ax] = self.n
            d2 = d2 + (d ** 2).reshape(shape)
        return np.sqrt(d2)

    def displacement_values(self) -> np.ndarray:
        """Wrapped displacement value per table index along one axis."""
        q = np.arange(self.n)
        return np.where(q < self.n // 2, q * self.dx, (q - self.n) * self.dx)

    def refined(self) -> "Grid":
        """Grid with halved momentum spacing and unchanged Nyquist momentum."""
        return Grid(self.dims, 2 * self.n, 2 * self.L)


def make_grid(dims: int, n: int, L: float) -> Grid:
    """Construct a periodic grid; rejects odd or non-power-of-two n."""
    return Grid(dims, n, L)


@dataclass(frozen=True)
class CutoffProfile:
    """Ultraviolet form factor lambda-hat(k), radial in |k|.

    kinds:
      sharp-flat:       (2pi)^{-d/2} * 1_{sigma <= |k| <= Lambda}
      sharp-over-omega: (2pi)^{-d/2} * 1_{sigma <= |k| <= Lambda} / omega(k)
      gaussian:         (2pi)^{-d/2} * exp(-|k|^2/(2 Lambda^2)) * 1_{|k| >= sigma}

    `scale` multiplies the whole profile (scale=0 gives the zero profile).
    The profile is even and nonnegative by construction; a negative scale is
    rejected because nonnegativity is what makes pair potentials attractive.
    """

    kind: str
    Lambda: float
    sigma_floor: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ModelError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        if self.Lambda <= 0:
            raise ModelError(f"profile Lambda must be positive, got {self.Lambda}")
        if self.sigma_floor < 0:
            raise ModelError(f"profile sigma_floor must be >= 0, got {self.sigma_floor}")
        if self.scale < 0:
            raise ModelError("profile scale must be >= 0 (nonnegativity of lambda-hat)")

    def evaluate(self, k_radii: np.ndarray, d: int) -> np.ndarray:
        """lambda-hat(|k|) on an array of momentum radii, for dimension d."""
        r = np.asarray(k_radii, dtype=float)
        amp = self.scale * (TWO_PI) ** (-d / 2.0)
        if self.kind == "sharp-flat":
            vals = np.where((r >= self.sigma_floor) & (r <= self.Lambda), amp, 0.0)
        elif self.kind == "sharp-over-omega":
            with np.errstate(divide="ignore"):
                inv = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), np.inf)
            vals = np.where((r >= self.sigma_floor) & (r <= self.Lambda), amp * inv, 0.0)
            # a k=0 point survives only if sigma_floor == 0; treat separately
            vals = np.where((r == 0) & (self.sigma_floor == 0), np.inf if amp > 0 else 0.0, vals)
        else:  # gaussian
            vals = np.where(r >= self.sigma_floor,
                            amp * np.exp(-r * r / (2.0 * self.Lambda ** 2)), 0.0)
        return vals

    def is_zero(self) -> bool:
        return self.scale == 0.0


@dataclass(frozen=True)
class ValidityReport:
    """Numerical witnesses of the (UV)/(IR) integrability assumptions.

    Norms are Riemann sums over the momentum grid; each `*_finite` flag is a
    refinement witness: the squared sum on a grid with halved dk (doubled n
    and L) must not grow by more than 20%. Divergent integrals (1/k^2-type)
    grow proportionally to the refinement and trip the flag.
    """

    norm_l2: float
    norm_over_omega: float
    norm_over_sqrt_omega: float
    uv_finite: bool
    ir_finite: bool
    sqrt_omega_finite: bool
    symmetric: bool

    def as_dict(self) -> dict:
        return {
            "norm_l2": self.norm_l2,
            "norm_over_omega": self.norm_over_omega,
            "norm_over_sqrt_omega": self.norm_over_sqrt_omega,
            "uv_finite": self.uv_finite,
            "ir_finite": self.ir_finite,
            "sqrt_omega_finite": self.sqrt_omega_finite,
            "symmetric": self.symmetric,
        }


_GROWTH_LIMIT = 1.2


def _profile_square_sums(profile: CutoffProfile, grid: Grid) -> Tuple[float, float, float]:
    """Riemann sums of lambda^2, lambda^2/omega^2, lambda^2/omega on `grid`.

    The k=0 cell is assigned integrand 0 (measure-zero point); divergence at
    the origin is detected by refinement growth, not by inf arithmetic.
    """
    d = grid.dims
    r = grid.momentum_radii()
    lam = profile.evaluate(r, d)
    lam = np.where(np.isfinite(lam), lam, 0.0)
    lam2 = lam * lam
    dv = grid.momentum_cell_volume
    with np.errstate(divide="ignore", invalid="ignore"):
        over_w2 = np.where(r > 0, lam2 / np.where(r > 0, r * r, 1.0), 0.0)
        over_w = np.where(r > 0, lam2 / np.where(r > 0, r, 1.0), 0.0)
    return float(lam2.sum() * dv), float(over_w2.sum() * dv), float(over_w.sum() * dv)


def _origin_integrability(profile: CutoffProfile, d: int) -> Tuple[bool, bool, bool]:
    """Local integrability at k=0 of lambda^2 / omega^p for p = 0, 2, 1.

    The Riemann sums assign the k=0 cell 0, so a non-integrable origin must be
    flagged analytically: lambda ~ k^{-q} near 0 makes the integrand
    r^{d-1-2q-p}, integrable iff d > 2q + p.
    """
    at0 = profile.evaluate(np.array([0.0]), d)[0]
    if at0 == 0.0:
        return True, True, True
    q = 1 if not np.isfinite(at0) else 0  # sharp-over-omega diverges like 1/k
    return d > 2 * q, d > 2 * q + 2, d > 2 * q + 1


def validate_profile(profile: CutoffProfile, grid: Grid) -> ValidityReport:
    """Check (UV)/(IR) witnesses of a cutoff profile on a momentum grid.

    Returns ||lambda||_2, ||lambda/omega||_2 and ||lambda/sqrt(omega)||_2 as
    grid Riemann sums together with finiteness flags (refinement growth test
    combined with exact origin integrability) and the evenness flag.
    Deterministic and pure.
    """
    if profile.scale < 0:
        raise ModelError("profile has negative values")
    l2, ow2, osw = _profile_square_sums(profile, grid)
    l2_f, ow2_f, osw_f = _profile_square_sums(profile, grid.refined())
    uv_origin, ir_origin, sqrt_origin = _origin_integrability(profile, grid.dims)

    def finite(coarse: float, fine: float) -> bool:
        if coarse == 0.0:
            return True
        return fine <= _GROWTH_LIMIT * coarse

    lam = profile.evaluate(grid.momentum_radii(), grid.dims)
    lam = np.where(np.isfinite(lam), lam, 0.0)
    flipped = lam.copy()
    for ax in range(grid.dims):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    symmetric = bool(np.array_equal(lam, flipped))

    return ValidityReport(
        norm_l2=np.sqrt(l2),
        norm_over_omega=np.sqrt(ow2),
        norm_over_sqrt_omega=np.sqrt(osw),
        uv_finite=finite(l2, l2_f) and uv_origin,
        ir_finite=finite(ow2, ow2_f) and ir_origin,
        sqrt_omega_finite=finite(osw, osw_f) and sqrt_origin,
        symmetric=symmetric,
    )


@dataclass(frozen=True)
class ExternalPotential:
    """External one-particle potential V, radial in |x|.

    gaussian-well: V(x) = -v0 * exp(-|x|^2 / (2 w^2))
    scaled-table:  V(x) = delta * interp(|x|; table) with linear interpolation
                   and 0 beyond the last tabulated radius.
    """

    family: str
    v0: float = 0.0
    w: float = 1.0
    delta: float = 1.0
    table_r: Optional[np.ndarray] = None
    table_v: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family not in POTENTIAL_FAMILIES:
            raise ModelError(f"unknown potential family {self.family!r}")
        if self.family == "gaussian-well":
            if self.v0 < 0 or self.w <= 0:
                raise ModelError("gaussian-well needs v0 >= 0 and w > 0")
        else:
            if self.table_r is None or self.table_v is None:
                raise ModelError("scaled-table needs table_r and table_v")
            if self.delta <= 0:
                raise ModelError("scaled-table needs delta > 0")
            r = np.asarray(self.table_r, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or r.size < 2:
                raise ModelError("scaled-table table must be two equal 1-d arrays")
            if np.any(np.diff(r) <= 0) or r[0] < 0:
                raise ModelError("scaled-table radii must be increasing and >= 0")
            if not np.all(np.isfinite(v)):
                raise ModelError("scaled-table values must be finite (V bounded below)")
            object.__setattr__(self, "table_r", r)
            object.__setattr__(self, "table_v", v)

    def radial(self, r: np.ndarray) -> np.ndarray:
        """V(|x|) on an array of radii."""
        r = np.asarray(r, dtype=float)
        if self.family == "gaussian-well":
            return -self.v0 * np.exp(-r * r / (2.0 * self.w ** 2))
        return self.delta * np.interp(r, self.table_r, self.table_v, right=0.0)

    def on_axis_grid(self, grid: Grid) -> np.ndarray:
        """V sampled on a d-dimensional position grid (one particle block)."""
        return self.radial(grid.position_radii())

    def min_value(self) -> float:
        if self.family == "gaussian-well":
            return -self.v0
        return float(min(self.delta * np.min(self.table_v), 0.0))

    def width(self) -> float:
        if self.family == "gaussian-well":
            return self.w
        return float(self.table_r[-1]) / 4.0

    def edge_witness(self, grid: Grid, tol: float = 0.05) -> bool:
        """True when |V| at the box edge is below tol * |min V| (EN(1) witness)."""
        edge = abs(self.radial(np.array([grid.L / 2.0]))[0])
        floor = abs(self.min_value())
        if floor == 0.0:
            return True
        ok = edge <= tol * floor
        if not ok:
            warnings.warn(
                f"potential does not vanish at the box edge: |V(L/2)|={edge:.3g} "
                f"vs {tol:.0%} of |min V|={floor:.3g}; enlarge L",
                stacklevel=2,
            )
        return ok


def check_box_fits_potential(grid: Grid, potential: ExternalPotential, factor: float = 8.0) -> bool:
    """Warn unless the box side is at least `factor` potential widths."""
    ok = grid.L >= factor * potential.width()
    if not ok:
        warnings.warn(
            f"box side L={grid.L} is below {factor}x potential width {potential.width():.3g}; "
            "minimum-image wrapping of V/W may be inaccurate",
            stacklevel=2,
        )
    return ok


@dataclass(frozen=True)
class ModelParams:
    """Single source of truth for a model instance."""

    d: int
    N: int
    masses: Tuple[float, ...]
    alpha: float
    kappa: float
    ir_cutoff: float
    profiles: Tuple[CutoffProfile, ...]

    def __post_init__(self):
        if self.d < 1:
            raise ModelError(f"dimension d must be >= 1, got {self.d}")
        if self.N < 1:
            raise ModelError(f"particle count N must be >= 1, got {self.N}")
        masses = tuple(float(m) for m in self.masses)
        if len(masses) != self.N:
            raise ModelError(f"need {self.N} masses, got {len(masses)}")
        if any(m <= 0 for m in masses):
            raise ModelError("all masses must be positive")
        if self.alpha < 0:
            raise ModelError(f"coupling alpha must be >= 0, got {self.alpha}")
        if self.kappa <= 0:
            raise ModelError(f"scaling kappa must be positive, got {self.kappa}")
        if self.ir_cutoff < 0:
            raise ModelError(f"ir_cutoff sigma must be >= 0, got {self.ir_cutoff}")
        profiles = tuple(self.profiles)
        if len(profiles) == 1 and self.N > 1:
            profiles = profiles * self.N
        if len(profiles) != self.N:
            raise ModelError(f"need 1 or {self.N} profiles, got {len(profiles)}")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "profiles", profiles)

    def with_alpha(self, alpha: float) -> "ModelParams":
        return ModelParams(self.d, self.N, self.masses, alpha, self.kappa,
                           self.ir_cutoff, self.profiles)

    def subset(self, particles: Sequence[int]) -> "ModelParams":
        """Model restricted to a particle subset (labels are 0-based)."""
        parts = tuple(particles)
        if len(parts) < 1:
            raise ModelError("particle subset must be nonempty")
        return ModelParams(
            d=self.d,
            N=len(parts),
            masses=tuple(self.masses[j] for j in parts),
            alpha=self.alpha,
            kappa=self.kappa,
            ir_cutoff=self.ir_cutoff,
            profiles=tuple(self.profiles[j] for j in parts),
        )


class GridWavefunction:
    """Complex amplitudes on a configuration grid, with cell-volume norm."""

    def __init__(self, grid: Grid, amplitudes: np.ndarray):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != grid.shape:
            raise ModelError(f"amplitudes shape {amplitudes.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(amplitudes)):
            raise ModelError("wavefunction amplitudes must be finite")
        self.grid = grid
        self.amplitudes = amplitudes

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.cell_volume))

    def normalized(self) -> "GridWavefunction":
        n = self.norm()
        if n == 0:
            raise ModelError("cannot normalize the zero wavefunction")
        return GridWavefunction(self.grid, self.amplitudes / n)

    def inner(self, other: "GridWavefunction") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.cell_volume)

    @classmethod
    def constant(cls, grid: Grid) -> "GridWavefunction":
        amp = np.full(grid.shape, 1.0 + 0.0j)
        return cls(grid, amp).normalized()

    @classmethod
    def random(cls, grid: Grid, seed: int) -> "GridWavefunction":
        rng = np.random.Generator(np.random.Philox(seed))
        amp = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        return cls(grid, amp).normalized()
