"""Total-momentum fiber decomposition of the translation-invariant effective
Hamiltonian.

The reference particle is particle 1 (relative coordinates x_j - x_1 for
j >= 2), so the fiber at total momentum P is

    k(P) = Omega_1(P - sum_{j>=2} k_j) + sum_{j>=2} Omega_j(k_j)
           + alpha^2 [ sum_{j>=2} W_1j(x_j) + sum_{2<=i<j} W_ij(x_i - x_j) ]

acting on the d(N-1)-dimensional relative grid. Omega_1 is evaluated at the
exact real argument, so P need not be a grid momentum.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .effpot import PairPotentialTable, compute_pair_potential
from .kinetic import pair_difference_table
from .model import Grid, GridWavefunction, ModelError, ModelParams

Vector = Tuple[float, ...]


@dataclass(frozen=True)
class FiberOperator:
    grid: Grid                       # relative grid, dims = d*(n_active-1)
    P: Vector
    symbol: np.ndarray               # full kinetic multiplier on the relative grid
    diagonal: np.ndarray             # alpha^2 * (pair terms) in position space
    masses: Tuple[float, ...]
    alpha: float
    edge_sample: bool                # some |P| component at/over the Nyquist momentum

    @property
    def dim(self) -> int:
        return self.grid.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        psi = v.reshape(self.grid.shape)
        out = self.diagonal * psi
        ft = np.fft.fftn(psi, norm="ortho")
        out = out + np.fft.ifftn(self.symbol * ft, norm="ortho")
        return out.reshape(v.shape)

    def apply(self, psi: GridWavefunction) -> GridWavefunction:
        return GridWavefunction(self.grid, self.matvec(psi.amplitudes.ravel()).reshape(self.grid.shape))


def build_fiber(P: Sequence[float], params: ModelParams, grid_rel: Grid,
                particles: Optional[Sequence[int]] = None,
                tables: Optional[Dict[Tuple[int, int], PairPotentialTable]] = None,
                ) -> FiberOperator:
    """Assemble k(P) for a particle subset (default: all particles).

    The subset's first particle is the reference; the relative grid must have
    dims = d * (len(subset) - 1).
    """
    parts = tuple(particles) if particles is not None else tuple(range(params.N))
    if len(parts) < 2:
        raise ModelError("fiber decomposition needs at least two particles")
    d = params.d
    n_rel = len(parts) - 1
    if grid_rel.dims != d * n_rel:
        raise ModelError(f"relative grid dims {grid_rel.dims} != d*(|beta|-1) = {d * n_rel}")
    P = tuple(float(p) for p in P)
    if len(P) != d:
        raise ModelError(f"total momentum must have {d} components")

    # kinetic symbol: Omega_ref(P - sum k_j) + sum_j Omega_j(k_j)
    k_axes = []
    for j in range(n_rel):
        shape = [1] * grid_rel.dims
        comps = []
        for a in range(d):
            sh = [1] * grid_rel.dims
            sh[j * d + a] = grid_rel.n
            comps.append(grid_rel.axis_momenta.reshape(sh))
        k_axes.append(comps)

    m_ref = params.masses[parts[0]]
    arg2 = np.zeros(grid_rel.shape)
    for a in range(d):
        comp = np.zeros(grid_rel.shape)
        for j in range(n_rel):
            comp = comp + k_axes[j][a]
        arg2 = arg2 + (P[a] - comp) ** 2
    symbol = np.sqrt(arg2 + m_ref ** 2) - m_ref
    for j in range(n_rel):
        mj = params.masses[parts[1 + j]]
        kj2 = np.zeros(grid_rel.shape)
        for a in range(d):
            kj2 = kj2 + k_axes[j][a] ** 2
        symbol = symbol + np.sqrt(kj2 + mj * mj) - mj

    axis_grid = Grid(d, grid_rel.n, grid_rel.L)
    diag = np.zeros(grid_rel.shape)
    if params.alpha != 0.0:
        cache: Dict[Tuple, np.ndarray] = {}

        def table_for(gi: int, gj: int) -> np.ndarray:
            lo, hi = min(gi, gj), max(gi, gj)
            if tables is not None and (lo, hi) in tables:
                return tables[(lo, hi)].values
            pkey = (params.profiles[lo], params.profiles[hi])
            if pkey not in cache:
                cache[pkey] = compute_pair_potential(pkey[0], pkey[1], axis_grid).values
            return cache[pkey]

        a2 = params.alpha ** 2
        # W_{ref,j}(x_j): x_j is the j-th relative block; the table is indexed by
        # wrapped displacement, and position index m maps to displacement index
        # (m + n/2) mod n because positions start at -L/2.
        n = grid_rel.n
        pos_to_disp = (np.arange(n) + n // 2) % n
        for j in range(n_rel):
            w = table_for(parts[0], parts[1 + j])
            block = w
            for a in range(d):
                block = np.take(block, pos_to_disp, axis=a)
            shape = [1] * grid_rel.dims
            for a in range(d):
                shape[j * d + a] = n
            diag = diag + a2 * block.reshape(shape)
        for i in range(n_rel):
            for j in range(i + 1, n_rel):
                w = table_for(parts[1 + i], parts[1 + j])
                block = pair_difference_table(w, grid_rel, d)
                shape = [1] * grid_rel.dims
                for a in range(d):
                    shape[i * d + a] = n
                    shape[j * d + a] = n
                diag = diag + a2 * block.reshape(shape)

    edge = any(abs(p) >= grid_rel.nyquist for p in P)
    return FiberOperator(grid=grid_rel, P=P, symbol=symbol, diagonal=diag,
                         masses=tuple(params.masses[j] for j in parts),
                         alpha=params.alpha, edge_sample=edge)


@dataclass
class DispersionCurve:
    P_samples: List[Vector]
    energies: List[Optional[float]]
    residuals: List[Optional[float]]
    failures: Dict[int, str]
    modulus: Optional[float]
    e0: Optional[float]
    monotone_ok: bool

    def as_dict(self) -> dict:
        return {
            "P_samples": [list(p) for p in self.P_samples],
            "energies": self.energies,
            "residuals": self.residuals,
            "failures": {str(k): v for k, v in self.failures.items()},
            "modulus": self.modulus,
            "e0": self.e0,
            "monotone_ok": self.monotone_ok,
        }


def dispersion_scan(P_samples: Sequence[Sequence[float]], params: ModelParams,
                    grid_rel: Grid, tol: float = 1e-8, seed: int = 7,
                    threads: int = 1,
                    tables: Optional[Dict[Tuple[int, int], PairPotentialTable]] = None,
                    ) -> DispersionCurve:
    """E(P) over the samples; checks E(0) <= E(P) + 2 tol and records the
    empirical continuity modulus (max adjacent |dE|/|dP|).

    Per-sample solver failures are recorded and the scan continues.
    """
    from .spectral import SolverError, ground_state

    samples = [tuple(float(c) for c in p) for p in P_samples]
    if not any(all(c == 0.0 for c in p) for p in samples):
        raise ModelError("P samples must include 0")

    def solve(p):
        op = build_fiber(p, params, grid_rel, tables=tables)
        res = ground_state(op, tol=tol, seed=seed)
        return res.eigenvalue, res.residual

    energies: List[Optional[float]] = [None] * len(samples)
    residuals: List[Optional[float]] = [None] * len(samples)
    failures: Dict[int, str] = {}

    def run(idx):
        try:
            e, r = solve(samples[idx])
            return idx, e, r, None
        except SolverError as err:
            return idx, None, None, str(err)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(len(samples))))
    else:
        results = [run(i) for i in range(len(samples))]
    for idx, e, r, err in results:
        if err is None:
            energies[idx] = e
            residuals[idx] = r
        else:
            failures[idx] = err

    e0 = None
    for p, e in zip(samples, energies):
        if all(c == 0.0 for c in p) and e is not None:
            e0 = e
            break
    monotone_ok = True
    if e0 is not None:
        for e in energies:
            if e is not None and e0 > e + 2.0 * max(tol, 1e-9) * (abs(e) + 1.0):
                monotone_ok = False
    modulus = None
    slopes = []
    for i in range(1, len(samples)):
        ea, eb = energies[i - 1], energies[i]
        if ea is None or eb is None:
            continue
        dp = np.linalg.norm(np.subtract(samples[i], samples[i - 1]))
        if dp > 0:
            slopes.append(abs(eb - ea) / dp)
    if slopes:
        modulus = float(max(slopes))
    return DispersionCurve(P_samples=samples, energies=energies, residuals=residuals,
                           failures=failures, modulus=modulus, e0=e0,
                           monotone_ok=monotone_ok)


def default_p_samples(grid_rel: Grid, d: int, count: int = 9) -> List[Vector]:
    """Equispaced P along the first axis from 0 to half the Nyquist momentum."""
    half = grid_rel.nyquist / 2.0
    out = []
    for i in range(count):
        p = [0.0] * d
        p[0] = half * i / (count - 1) if count > 1 else 0.0
        out.append(tuple(p))
    return out


@dataclass
class FiberGroundState:
    state: GridWavefunction
    eigenvalue: float
    residual: float
    localized: bool
    participation_ratio: float


def fiber_ground_state(alpha: float, params: ModelParams, grid_rel: Grid,
                       tol: float = 1e-8, seed: int = 7,
                       tables: Optional[Dict[Tuple[int, int], PairPotentialTable]] = None,
                       ) -> FiberGroundState:
    """Normalized ground state u_alpha of k(0) at the given coupling.

    In the unbound regime the state is returned with localized=False rather
    than raising; concentration diagnostics live in spectral.localization_metrics.
    """
    from .spectral import ground_state, localization_metrics

    p = params.with_alpha(alpha)
    op = build_fiber([0.0] * p.d, p, grid_rel, tables=tables)
    res = ground_state(op, tol=tol, seed=seed)
    state = GridWavefunction(grid_rel, res.eigenvector.reshape(grid_rel.shape)).normalized()
    metrics = localization_metrics(state)
    localized = metrics.participation_ratio < 0.1 * grid_rel.box_volume
    return FiberGroundState(state=state, eigenvalue=res.eigenvalue, residual=res.residual,
                            localized=localized, participation_ratio=metrics.participation_ratio)


def fiber_ground_energy(params: ModelParams, particles: Sequence[int], n: int, L: float,
                        tol: float = 1e-8, seed: int = 7,
                        tables: Optional[Dict[Tuple[int, int], PairPotentialTable]] = None,
                        ) -> float:
    """E^0 of a translation-invariant cluster, solved at P=0 in relative
    coordinates (E^0 = inf spec k(0))."""
    from .spectral import ground_state

    parts = tuple(particles)
    grid_rel = Grid(params.d * (len(parts) - 1), n, L)
    op = build_fiber([0.0] * params.d, params, grid_rel, particles=parts, tables=tables)
    return ground_state(op, tol=tol, seed=seed).eigenvalue


def subcluster_threshold(P: Sequence[float], params: ModelParams, grid_rel: Grid,
                         tol: float = 1e-8, seed: int = 7) -> dict:
    """Discreteness proxy for k(P): gap between E_0(k(P)) and the minimum over
    proper subsets beta of {2..N} of E_0(k_beta) + E_0(kbar_{beta^c}).

    k_beta keeps the W_1j attraction of the (removed) reference particle;
    kbar keeps only internal pairs. Subsets are enumerated directly.
    """
    from itertools import combinations

    from .spectral import ground_state

    d = params.d
    n_rel = params.N - 1
    op = build_fiber(P, params, grid_rel)
    e_p = ground_state(op, tol=tol, seed=seed).eigenvalue

    others = tuple(range(1, params.N))  # global labels 1..N-1 (0 is reference)

    def e0_kbeta(sub: Tuple[int, ...], keep_reference: bool) -> float:
        if len(sub) == 0:
            return 0.0
        # operator on d*len(sub) relative grid: kinetic of each member plus
        # W_1j terms (only when keep_reference) plus internal pairs
        g = Grid(d * len(sub), grid_rel.n, grid_rel.L)
        axis_grid = Grid(d, grid_rel.n, grid_rel.L)
        sym = np.zeros(g.shape)
        for j, gj in enumerate(sub):
            kj2 = np.zeros(g.shape)
            for a in range(d):
                sh = [1] * g.dims
                sh[j * d + a] = g.n
                kj2 = kj2 + (g.axis_momenta ** 2).reshape(sh)
            mj = params.masses[gj]
            sym = sym + np.sqrt(kj2 + mj * mj) - mj
        diag = np.zeros(g.shape)
        if params.alpha != 0.0:
            a2 = params.alpha ** 2
            n_pts = g.n
            pos_to_disp = (np.arange(n_pts) + n_pts // 2) % n_pts
            if keep_reference:
                for j, gj in enumerate(sub):
                    w = compute_pair_potential(params.profiles[0], params.profiles[gj], axis_grid).values
                    block = w
                    for a in range(d):
                        block = np.take(block, pos_to_disp, axis=a)
                    sh = [1] * g.dims
                    for a in range(d):
                        sh[j * d + a] = n_pts
                    diag = diag + a2 * block.reshape(sh)
            for i in range(len(sub)):
                for j in range(i + 1, len(sub)):
                    w = compute_pair_potential(params.profiles[sub[i]], params.profiles[sub[j]], axis_grid).values
                    block = pair_difference_table(w, g, d)
                    sh = [1] * g.dims
                    for a in range(d):
                        sh[i * d + a] = n_pts
                        sh[j * d + a] = n_pts
                    diag = diag + a2 * block.reshape(sh)

        op_sub = FiberOperator(grid=g, P=tuple([0.0] * d), symbol=sym, diagonal=diag,
                               masses=tuple(params.masses[j] for j in sub),
                               alpha=params.alpha, edge_sample=False)
        return ground_state(op_sub, tol=tol, seed=seed).eigenvalue

    best = None
    best_beta = None
    for k in range(0, n_rel):
        for sub in combinations(others, k):
            comp = tuple(j for j in others if j not in sub)
            val = e0_kbeta(sub, keep_reference=True) + e0_kbeta(comp, keep_reference=False)
            if best is None or val < best:
                best = val
                best_beta = sub
    return {"e_p": e_p, "threshold": best, "argmin_beta": list(best_beta or ()),
            "gap": (best - e_p) if best is not None else None}
