"""Effective pair potentials W_ij, the diagonal self-energy, and the assembled
pair interaction V_eff = alpha^2 sum_{i<j} W_ij(x_i - x_j).

W_ij(x) = -int lambda_i(-k) lambda_j(k) / omega(k) e^{-ikx} dk is computed on
the grid by an FFT with continuum normalization (sum * dk^d), and off the grid
by an adaptive radial quadrature of the same integral (used when Monte Carlo
paths leave the box). Nonnegativity of the profiles makes W(0) strictly
negative and the minimum of W, which is the whole binding mechanism.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .model import CutoffProfile, Grid, IRViolationError, ModelError

_IMAG_TOL = 1e-12


@dataclass(frozen=True)
class PairPotentialTable:
    """W_ij sampled on a one-axis-block grid, indexed by wrapped displacement.

    values[q] is W at displacement q*L/n folded to [-L/2, L/2); values[0] is
    W(0), the most negative entry for admissible profiles.
    """

    grid: Grid
    values: np.ndarray
    w0: float
    profile_i: CutoffProfile
    profile_j: CutoffProfile

    def at_index(self, q) -> np.ndarray:
        return self.values[q]


def _pair_integrand(profile_i: CutoffProfile, profile_j: CutoffProfile,
                    grid: Grid) -> np.ndarray:
    """lambda_i lambda_j / omega on the momentum grid, k=0 cell per convention.

    At k=0 with a nonvanishing product the integrand is assigned 0 for d >= 2
    (integrable, measure-zero cell) and is an error in d=1 (non-integrable).
    """
    d = grid.dims
    r = grid.momentum_radii()
    li = profile_i.evaluate(r, d)
    lj = profile_j.evaluate(r, d)
    li = np.where(np.isfinite(li), li, 0.0)
    lj = np.where(np.isfinite(lj), lj, 0.0)
    prod = li * lj
    origin = tuple([0] * d)
    if prod[origin] != 0.0:
        if d == 1:
            raise IRViolationError(
                "lambda_i*lambda_j/omega is non-integrable at k=0 in d=1 with "
                "sigma=0; set a positive infrared floor"
            )
        prod = prod.copy()
        prod[origin] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(r > 0, prod / np.where(r > 0, r, 1.0), 0.0)
    return out


def compute_pair_potential(profile_i: CutoffProfile, profile_j: CutoffProfile,
                           grid: Grid) -> PairPotentialTable:
    """W table on the grid: -(FFT of lambda_i lambda_j / omega) * dk^d.

    The imaginary residue of the transform of the even real integrand is
    asserted below 1e-12 (relative) and discarded.
    """
    F = _pair_integrand(profile_i, profile_j, grid)
    w = -np.fft.fftn(F) * grid.momentum_cell_volume
    scale = max(1.0, float(np.max(np.abs(w))))
    imag_max = float(np.max(np.abs(w.imag)))
    if imag_max > _IMAG_TOL * scale:
        raise ModelError(f"pair potential has imaginary residue {imag_max:.3e}")
    values = np.ascontiguousarray(w.real)
    # the transform of the even integrand is even up to rounding; make it exact
    flipped = values
    for ax in range(grid.dims):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    values = 0.5 * (values + flipped)
    return PairPotentialTable(
        grid=grid, values=values, w0=float(values[tuple([0] * grid.dims)]),
        profile_i=profile_i, profile_j=profile_j,
    )


def compute_ediag(params, grid: Grid) -> float:
    """E_diag = (alpha^2/2) sum_j ||lambda_j / sqrt(omega)||^2 (grid Riemann sum).

    `grid` must be the d-dimensional one-particle momentum grid. Raises when a
    profile makes the d=1 integrand non-integrable at the origin.
    """
    if grid.dims != params.d:
        raise ModelError("compute_ediag expects the d-dimensional one-axis grid")
    r = grid.momentum_radii()
    total = 0.0
    for profile in params.profiles:
        lam = profile.evaluate(r, params.d)
        lam = np.where(np.isfinite(lam), lam, 0.0)
        lam2 = lam * lam
        origin = tuple([0] * grid.dims)
        if lam2[origin] != 0.0:
            if params.d == 1:
                raise IRViolationError(
                    "||lambda/sqrt(omega)|| diverges at k=0 in d=1 with sigma=0")
            lam2 = lam2.copy()
            lam2[origin] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(r > 0, lam2 / np.where(r > 0, r, 1.0), 0.0)
        total += float(integrand.sum() * grid.momentum_cell_volume)
    return 0.5 * params.alpha ** 2 * total


def radial_pair_potential(profile_i: CutoffProfile, profile_j: CutoffProfile,
                          d: int, r_max: float, n_samples: int = 2048,
                          n_quad: int = 16384) -> Callable[[np.ndarray], np.ndarray]:
    """W(|x|) from the defining radial integral, tabulated and interpolated.

    d=1: W(r) = -2 int F(k) cos(kr) dk
    d=2: W(r) = -2 pi int F(k) J0(kr) k dk
    d=3: W(r) = -(4 pi / r) int F(k) sin(kr) k dk
    with F = lambda_i lambda_j / omega, integrated by a composite Simpson rule
    over the profile support (the integrand is smooth there). Beyond r_max the
    value is 0 (Riemann-Lebesgue). Used for continuum path evaluation outside
    the box, where grid tables do not reach.
    """
    if d not in (1, 2, 3):
        raise ModelError("radial quadrature implemented for d in {1,2,3}")
    from scipy.special import j0

    at0 = profile_i.evaluate(np.array([0.0]), d)[0] * profile_j.evaluate(np.array([0.0]), d)[0]
    if d == 1 and at0 != 0.0:
        raise IRViolationError("d=1 pair integrand non-integrable at k=0 with sigma=0")

    k_lo = max(profile_i.sigma_floor, profile_j.sigma_floor)
    k_hi = max(profile_i.Lambda, profile_j.Lambda)
    if profile_i.kind == "gaussian" or profile_j.kind == "gaussian":
        k_hi *= 8.0
    if k_lo == 0.0:
        k_lo = k_hi * 1e-9  # integrable origin in d >= 2
    if n_quad % 2 == 1:
        n_quad += 1
    k = np.linspace(k_lo, k_hi, n_quad + 1)
    li = profile_i.evaluate(k, d)
    lj = profile_j.evaluate(k, d)
    li = np.where(np.isfinite(li), li, 0.0)
    lj = np.where(np.isfinite(lj), lj, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        F = np.where(k > 0, li * lj / np.where(k > 0, k, 1.0), 0.0)
    simpson = np.ones(n_quad + 1)
    simpson[1:-1:2] = 4.0
    simpson[2:-1:2] = 2.0
    simpson *= (k[1] - k[0]) / 3.0
    weighted = F * simpson

    radii = np.linspace(0.0, r_max, n_samples)
    vals = np.empty_like(radii)
    chunk = max(1, 4_000_000 // (n_quad + 1))
    for lo in range(0, n_samples, chunk):
        r = radii[lo:lo + chunk]
        kr = np.outer(r, k)
        if d == 1:
            kernel = 2.0 * np.cos(kr)
        elif d == 2:
            kernel = 2.0 * np.pi * j0(kr) * k[None, :]
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                kernel = np.where(r[:, None] > 0,
                                  4.0 * np.pi * k[None, :] * np.sin(kr)
                                  / np.where(r[:, None] > 0, r[:, None], 1.0),
                                  4.0 * np.pi * k[None, :] ** 2)
        vals[lo:lo + chunk] = -(kernel @ weighted)

    def evaluator(r):
        r = np.asarray(r, dtype=float)
        return np.interp(r, radii, vals, right=0.0)

    return evaluator


@dataclass(frozen=True)
class VeffEvaluator:
    """alpha^2 sum_{i<j} W_ij(x_i - x_j) in grid and continuum form.

    `config_array(grid)` embeds the grid tables into a configuration grid with
    minimum-image differences; `at_points(X)` evaluates the radial-quadrature
    form at arbitrary configurations X of shape (..., N, d).
    """

    n_particles: int
    d: int
    alpha: float
    tables: Dict[Tuple[int, int], PairPotentialTable]
    radial: Dict[Tuple[int, int], Callable]
    bound: float

    def config_array(self, grid: Grid) -> np.ndarray:
        from .kinetic import pair_difference_table

        if grid.dims != self.d * self.n_particles:
            raise ModelError("config grid dims mismatch in V_eff assembly")
        out = np.zeros(grid.shape)
        if self.alpha == 0.0:
            return out
        for (i, j), table in self.tables.items():
            block = pair_difference_table(table.values, grid, self.d)
            shape = [1] * grid.dims
            for a in range(self.d):
                shape[i * self.d + a] = grid.n
                shape[j * self.d + a] = grid.n
            out = out + self.alpha ** 2 * block.reshape(shape)
        return out

    def at_points(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-2:] != (self.n_particles, self.d):
            raise ModelError(f"configurations must end with shape (N={self.n_particles}, d={self.d})")
        out = np.zeros(X.shape[:-2])
        if self.alpha == 0.0:
            return out
        for (i, j), w_of_r in self.radial.items():
            diff = X[..., i, :] - X[..., j, :]
            out = out + self.alpha ** 2 * w_of_r(np.linalg.norm(diff, axis=-1))
        return out


def veff_assemble(params, grid: Grid, r_max: Optional[float] = None,
                  tables: Optional[Dict[Tuple[int, int], PairPotentialTable]] = None) -> VeffEvaluator:
    """Build the V_eff evaluator for all N(N-1)/2 pairs of a model instance.

    `grid` is the d-dimensional one-axis-block grid shared by all tables.
    """
    if grid.dims != params.d:
        raise ModelError("veff_assemble expects the d-dimensional one-axis grid")
    if tables is None:
        tables = {}
        cache: Dict[Tuple[CutoffProfile, CutoffProfile], PairPotentialTable] = {}
        for i in range(params.N):
            for j in range(i + 1, params.N):
                pkey = (params.profiles[i], params.profiles[j])
                if pkey not in cache:
                    cache[pkey] = compute_pair_potential(pkey[0], pkey[1], grid)
                tables[(i, j)] = cache[pkey]
    radial: Dict[Tuple[int, int], Callable] = {}
    r_top = r_max if r_max is not None else 4.0 * grid.L
    rad_cache: Dict[Tuple[CutoffProfile, CutoffProfile], Callable] = {}
    for (i, j) in tables:
        pkey = (params.profiles[i], params.profiles[j])
        if pkey not in rad_cache:
            rad_cache[pkey] = radial_pair_potential(pkey[0], pkey[1], params.d, r_top)
        radial[(i, j)] = rad_cache[pkey]
    bound = params.alpha ** 2 * sum(abs(t.w0) for t in tables.values())
    return VeffEvaluator(n_particles=params.N, d=params.d, alpha=params.alpha,
                         tables=tables, radial=radial, bound=bound)


def export_table_csv(table: PairPotentialTable, path) -> None:
    """CSV with one row per table entry: x components then the W value."""
    import csv

    disp = table.grid.displacement_values()
    d = table.grid.dims
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{a}" for a in range(d)] + ["W"])
        it = np.ndindex(*table.grid.shape)
        for idx in it:
            row = [repr(disp[q]) for q in idx] + [repr(float(table.values[idx]))]
            writer.writerow(row)
