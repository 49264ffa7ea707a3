"""Ground states and spectral diagnostics: restarted Lanczos with full
reorthogonalization, dense reference diagonalization, cluster energies and the
lowest two-cluster threshold, negative-eigenvalue counts, and localization
metrics of eigenvectors.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import chain, combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .effpot import PairPotentialTable, compute_pair_potential
from .kinetic import EffectiveHamiltonian, build_effective_hamiltonian
from .model import ExternalPotential, Grid, GridWavefunction, ModelError, ModelParams

DENSE_LIMIT = 4096
NEAR_DEGENERATE_GAP = 1e-6


class SolverError(RuntimeError):
    """Eigensolver failed to converge; carries the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass
class EigenResult:
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    iterations: int
    seed: int
    converged: bool
    gap: Optional[float] = None
    near_degenerate: bool = False

    def wavefunction(self, grid: Grid) -> GridWavefunction:
        return GridWavefunction(grid, self.eigenvector.reshape(grid.shape))


def ground_state(h, tol: float = 1e-8, max_iter: int = 60, seed: int = 7,
                 krylov: int = 0) -> EigenResult:
    """Smallest eigenpair of a Hermitian matvec by restarted Lanczos.

    Full reorthogonalization inside each Krylov sweep; restarts from the Ritz
    vector until ||Hv - lambda v|| <= tol * (|lambda| + 1). The start vector is
    drawn from a counter-based generator keyed by `seed`, so results are
    reproducible. Non-convergence raises SolverError carrying the best iterate.
    """
    dim = h.dim
    if krylov <= 0:
        # small problems take the full Krylov space (exact in one sweep);
        # large ones restart from the Ritz vector
        if dim <= 1024:
            krylov = dim
        elif dim > 200_000:
            krylov = 80
        else:
            krylov = 160
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)

    theta = 0.0
    resid = np.inf
    gap = None
    matvecs = 0
    for sweep in range(max_iter):
        basis = np.empty((krylov, dim), dtype=complex)
        alphas = np.empty(krylov)
        betas = np.empty(max(krylov - 1, 0))
        basis[0] = v
        w = h.matvec(v)
        matvecs += 1
        a = float(np.real(np.vdot(v, w)))
        alphas[0] = a
        w = w - a * v
        k = 1
        while k < krylov:
            # full reorthogonalization keeps the basis numerically orthonormal
            # (conjugate w, not the basis block, to avoid copying the basis)
            coeffs = np.conj(basis[:k] @ np.conj(w))
            w = w - coeffs @ basis[:k]
            b = np.linalg.norm(w)
            if b < 1e-14:
                break
            betas[k - 1] = b
            v_next = w / b
            basis[k] = v_next
            w = h.matvec(v_next)
            matvecs += 1
            a = float(np.real(np.vdot(v_next, w)))
            alphas[k] = a
            w = w - a * v_next - b * basis[k - 1]
            k += 1
        from scipy.linalg import eigh_tridiagonal

        try:
            evals, evecs = eigh_tridiagonal(alphas[:k], betas[:max(k - 1, 0)])
        except np.linalg.LinAlgError:
            # stemr can fail on extreme spectral ranges; dense QR is stable
            tri = np.diag(alphas[:k])
            if k > 1:
                tri += np.diag(betas[:k - 1], 1) + np.diag(betas[:k - 1], -1)
            evals, evecs = np.linalg.eigh(tri)
        theta = float(evals[0])
        gap = float(evals[1] - evals[0]) if k > 1 else None
        v = evecs[:, 0] @ basis[:k]
        v /= np.linalg.norm(v)
        hv = h.matvec(v)
        matvecs += 1
        resid = float(np.linalg.norm(hv - theta * v))
        if resid <= tol * (abs(theta) + 1.0):
            return EigenResult(
                eigenvalue=theta, eigenvector=v, residual=resid,
                iterations=matvecs, seed=seed, converged=True, gap=gap,
                near_degenerate=(gap is not None and gap < NEAR_DEGENERATE_GAP),
            )
    best = EigenResult(eigenvalue=theta, eigenvector=v, residual=resid,
                       iterations=matvecs, seed=seed, converged=False, gap=gap,
                       near_degenerate=(gap is not None and gap < NEAR_DEGENERATE_GAP))
    raise SolverError(
        f"Lanczos did not reach residual {tol:g}*(|lambda|+1) after {max_iter} "
        f"restarts (residual {resid:.3e})", result=best)


def dense_matrix(h) -> np.ndarray:
    """Assemble the dense matrix of a matvec operator (size-guarded)."""
    dim = h.dim
    if dim > DENSE_LIMIT:
        raise ModelError(f"dense assembly limited to dim <= {DENSE_LIMIT}, got {dim}")
    eye = np.eye(dim, dtype=complex)
    cols = [h.matvec(eye[:, j]) for j in range(dim)]
    return np.column_stack(cols)


def dense_ground_state(h) -> Tuple[float, np.ndarray]:
    mat = dense_matrix(h)
    evals, evecs = np.linalg.eigh(mat)
    return float(evals[0]), evecs[:, 0]


def count_negative_eigenvalues(h, floor_tol: float = 1e-3) -> int:
    """Number of eigenvalues below -floor_tol, by dense spectrum.

    floor_tol absorbs sub-resolution grid eigenvalues: in d=1 any attractive
    well binds weakly in the continuum, so "no binding" at desk scale means
    nothing below the grid's energy floor.
    """
    mat = dense_matrix(h)
    evals = np.linalg.eigvalsh(mat)
    return int(np.sum(evals < -floor_tol))


def grid_energy_resolution(grid: Grid, masses: Sequence[float]) -> float:
    """Smallest nonzero kinetic quantum on the grid (lightest particle)."""
    m = min(masses)
    return float(np.sqrt(grid.dk ** 2 + m * m) - m)


@dataclass
class LocalizationMetrics:
    participation_ratio: float
    mass_outside: Dict[float, float]
    decay_rate: Optional[float]

    def as_dict(self) -> dict:
        return {
            "participation_ratio": self.participation_ratio,
            "mass_outside": {repr(k): v for k, v in self.mass_outside.items()},
            "decay_rate": self.decay_rate,
        }


def localization_metrics(v: GridWavefunction, radii: Sequence[float] = (2.0,),
                         floor: float = 1e-10) -> LocalizationMetrics:
    """Participation ratio, mass outside |X| > r, and a log-decay slope fit.

    The decay rate is the negated least-squares slope of log|v| against |X|
    over cells with |v| above `floor`; None when fewer than two cells qualify.
    """
    grid = v.grid
    amp = v.amplitudes
    cell = grid.cell_volume
    dens = np.abs(amp) ** 2
    total = dens.sum() * cell
    pr = float(1.0 / (np.sum(np.abs(amp) ** 4) * cell)) if total > 0 else 0.0
    r = grid.position_radii()
    outside = {}
    for radius in radii:
        outside[float(radius)] = float(dens[r > radius].sum() * cell / total) if total > 0 else 0.0
    mag = np.abs(amp)
    mask = mag > floor
    rate = None
    if np.sum(mask) >= 2:
        xs = r[mask].ravel()
        ys = np.log(mag[mask]).ravel()
        if np.ptp(xs) > 0:
            slope = np.polyfit(xs, ys, 1)[0]
            rate = float(-slope)
    return LocalizationMetrics(participation_ratio=pr, mass_outside=outside, decay_rate=rate)


@dataclass
class ClusterRow:
    beta: Tuple[int, ...]
    e_v_beta: float
    e0_complement: float

    @property
    def total(self) -> float:
        return self.e_v_beta + self.e0_complement


@dataclass
class ThresholdReport:
    rows: List[ClusterRow]
    xi: float
    argmin_beta: Tuple[int, ...]
    e_v_full: float
    residuals: Dict[Tuple[int, ...], float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "rows": [
                {"beta": list(r.beta), "e_v_beta": r.e_v_beta,
                 "e0_complement": r.e0_complement, "total": r.total}
                for r in self.rows
            ],
            "xi": self.xi,
            "argmin_beta": list(self.argmin_beta),
            "e_v_full": self.e_v_full,
        }


def _proper_subsets(n: int):
    labels = range(n)
    return chain.from_iterable(combinations(labels, k) for k in range(n))


def build_heff(params: ModelParams, grid: Grid, potential: Optional[ExternalPotential],
               particles: Optional[Sequence[int]] = None,
               tables: Optional[Dict[Tuple[int, int], PairPotentialTable]] = None,
               include_potential: bool = True) -> EffectiveHamiltonian:
    """h_eff for a particle subset on its own compact configuration grid."""
    parts = tuple(particles) if particles is not None else tuple(range(params.N))
    if len(parts) == 0:
        raise ModelError("empty cluster mask is a convention, not an operator")
    d = params.d
    if grid.dims != d * len(parts):
        raise ModelError(f"grid dims {grid.dims} != d*|beta| = {d * len(parts)}")
    axis_grid = Grid(d, grid.n, grid.L)
    v_axis = potential.on_axis_grid(axis_grid) if (potential is not None and include_potential) else None
    pair_tables = {}
    if params.alpha != 0.0:
        cache: Dict[Tuple, PairPotentialTable] = {}
        for a in range(len(parts)):
            for b in range(a + 1, len(parts)):
                gi, gj = parts[a], parts[b]
                if tables is not None and (gi, gj) in tables:
                    pair_tables[(a, b)] = tables[(gi, gj)].values
                else:
                    pkey = (params.profiles[gi], params.profiles[gj])
                    if pkey not in cache:
                        cache[pkey] = compute_pair_potential(pkey[0], pkey[1], axis_grid)
                    pair_tables[(a, b)] = cache[pkey].values
    masses = [params.masses[j] for j in parts]
    return build_effective_hamiltonian(grid, masses, d, v_axis, pair_tables,
                                       params.alpha, mask=parts)


def cluster_energies(params: ModelParams, grid: Grid, potential: ExternalPotential,
                     tol: float = 1e-8, seed: int = 7, threads: int = 1,
                     tables: Optional[Dict[Tuple[int, int], PairPotentialTable]] = None,
                     e_v_full: Optional[float] = None) -> ThresholdReport:
    """E^V(beta) + E^0(beta^c) for every proper subset beta, and the minimum.

    E^V(beta) is solved on the d|beta|-dimensional grid; E^0 of a complement is
    0 for singletons (free particle) and otherwise the fiber operator at P=0
    in relative coordinates. beta = empty set contributes E^0(C_N): the whole
    system escaping as one bound cluster. Requires N <= 4.
    """
    if params.N > 4:
        raise ModelError("cluster enumeration limited to N <= 4 (2^N - 1 solves)")
    from .fiber import fiber_ground_energy

    residuals: Dict[Tuple[int, ...], float] = {}

    def e_v(parts: Tuple[int, ...]) -> float:
        if len(parts) == 0:
            return 0.0
        sub_grid = Grid(params.d * len(parts), grid.n, grid.L)
        h = build_heff(params, sub_grid, potential, parts, tables)
        try:
            res = ground_state(h, tol=tol, seed=seed)
        except SolverError as err:
            raise SolverError(f"E^V solve failed for beta={parts}: {err}", err.result) from err
        residuals[parts] = res.residual
        return res.eigenvalue

    def e_0(parts: Tuple[int, ...]) -> float:
        if len(parts) <= 1:
            return 0.0
        try:
            return fiber_ground_energy(params, parts, grid.n, grid.L, tol=tol,
                                       seed=seed, tables=tables)
        except SolverError as err:
            raise SolverError(f"E^0 solve failed for beta^c={parts}: {err}", err.result) from err

    subsets = list(_proper_subsets(params.N))
    full = tuple(range(params.N))

    def row(beta: Tuple[int, ...]) -> ClusterRow:
        comp = tuple(j for j in full if j not in beta)
        return ClusterRow(beta=beta, e_v_beta=e_v(beta), e0_complement=e_0(comp))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, subsets))
    else:
        rows = [row(beta) for beta in subsets]

    if e_v_full is None:
        e_v_full = e_v(full)
    best = min(rows, key=lambda r: r.total)
    return ThresholdReport(rows=rows, xi=best.total, argmin_beta=best.beta,
                           e_v_full=e_v_full, residuals=residuals)


@dataclass
class BindingVerdict:
    bound: bool
    margin: float
    margin_threshold: float
    participation_ratio: float
    pr_threshold: float
    decay_rate: Optional[float]

    def as_dict(self) -> dict:
        return {
            "bound": self.bound,
            "margin": self.margin,
            "margin_threshold": self.margin_threshold,
            "participation_ratio": self.participation_ratio,
            "pr_threshold": self.pr_threshold,
            "decay_rate": self.decay_rate,
        }


def binding_verdict(report: ThresholdReport, state: GridWavefunction,
                    grid: Grid, masses: Sequence[float]) -> BindingVerdict:
    """Finite-grid binding proxy: threshold margin above resolution AND a
    localized eigenvector (participation ratio below 10% of box volume)."""
    margin = report.xi - report.e_v_full
    thresh = max(5.0 * grid_energy_resolution(grid, masses), 1e-4)
    metrics = localization_metrics(state)
    pr_limit = 0.1 * grid.box_volume
    bound = bool(margin > thresh and metrics.participation_ratio < pr_limit)
    return BindingVerdict(bound=bound, margin=float(margin), margin_threshold=float(thresh),
                          participation_ratio=metrics.participation_ratio,
                          pr_threshold=pr_limit, decay_rate=metrics.decay_rate)
