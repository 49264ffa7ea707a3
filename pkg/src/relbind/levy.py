"""Relativistic Levy-process sampling and Feynman-Kac estimators.

The process X_t per particle is Brownian motion run on an inverse-Gaussian
clock: the subordinator with Laplace exponent sqrt(2u + m^2) - m is
InverseGaussian(mean = t/m, shape = t^2), so B_{T_t} has characteristic
exponent sqrt(|u|^2 + m^2) - m. Sampling uses numpy's Wald generator (the
root-transform method) on counter-based Philox streams, one stream per fixed
chunk of paths, so results are bit-reproducible and independent of worker
count. Time integrals are left-endpoint Riemann sums on the path grid (Levy
paths jump; nothing higher-order is justified).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .model import Grid, ModelError, ModelParams

CHUNK = 16384


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)).jumped(chunk_index))


def _chunks(n: int) -> List[Tuple[int, int]]:
    out = []
    start = 0
    idx = 0
    while start < n:
        size = min(CHUNK, n - start)
        out.append((idx, size))
        start += size
        idx += 1
    return out


class _ChunkDraws:
    """Full-chunk draws sliced to the used size, so the values of path i
    depend only on (seed, chunk index, offset) and never on the batch size."""

    def __init__(self, rng: np.random.Generator, size: int):
        self.rng = rng
        self.size = size

    def wald(self, mean: float, shape: float) -> np.ndarray:
        return self.rng.wald(mean, shape, size=CHUNK)[: self.size]

    def normal(self, cols: int) -> np.ndarray:
        return self.rng.standard_normal((CHUNK, cols))[: self.size]

    def choice(self, n_items: int, p: np.ndarray) -> np.ndarray:
        return self.rng.choice(n_items, size=CHUNK, p=p)[: self.size]


class _MomentAccumulator:
    """Streaming mean and standard error from per-path first/second moments."""

    def __init__(self):
        self.s1 = 0.0
        self.s2 = 0.0
        self.n = 0

    def add(self, values: np.ndarray) -> None:
        self.s1 += float(np.sum(values))
        self.s2 += float(np.sum(values * values))
        self.n += values.size

    def stats(self) -> Tuple[float, float]:
        if self.n == 0:
            return 0.0, np.inf
        mean = self.s1 / self.n
        if self.n < 2:
            return mean, np.inf
        var = max(self.s2 / self.n - mean * mean, 0.0) * self.n / (self.n - 1)
        return mean, float(np.sqrt(var / self.n))


def sample_subordinator(m: float, t: float, n: int, seed: int) -> np.ndarray:
    """n draws of the subordinator value T_t (inverse-Gaussian law).

    E[exp(-u T_t)] = exp(-t (sqrt(2u + m^2) - m)); mean is t/m, shape t^2.
    t = 0 returns zeros.
    """
    if m <= 0:
        raise ModelError("subordinator needs m > 0")
    if t < 0:
        raise ModelError("subordinator needs t >= 0")
    if t == 0.0:
        return np.zeros(n)
    out = np.empty(n)
    for idx, size in _chunks(n):
        draws = _ChunkDraws(_chunk_rng(seed, idx), size)
        out[idx * CHUNK: idx * CHUNK + size] = draws.wald(t / m, t * t)
    return out


@dataclass
class LevyPathBatch:
    seed: int
    t_grid: np.ndarray                 # K+1 times, t_0 = 0
    subordinator: np.ndarray           # (n_paths, K+1, N) clock values
    positions: np.ndarray              # (n_paths, K+1, N, d)
    n_paths: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.positions)):
            raise ModelError("non-finite path positions")
        incr = np.diff(self.subordinator, axis=1)
        if self.t_grid.size > 1 and not np.all(incr > 0):
            raise ModelError("subordinator values must be strictly increasing")


def sample_paths(params: ModelParams, t_grid: Sequence[float], n: int, seed: int,
                 start: Optional[np.ndarray] = None) -> LevyPathBatch:
    """Seeded batch of N-particle relativistic Levy paths on the time grid.

    Positions start at `start` (default the origin), shape (N, d) or
    (n, N, d). Increments per step: dT ~ IG(dt/m, dt^2) per particle and
    dX = sqrt(dT) * standard normal per coordinate.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size < 1 or t[0] != 0.0 or (t.size > 1 and np.any(np.diff(t) <= 0)):
        raise ModelError("t_grid must start at 0 and increase strictly")
    N, d = params.N, params.d
    K = t.size - 1
    subs = np.zeros((n, t.size, N))
    pos = np.zeros((n, t.size, N, d))
    if start is not None:
        start = np.asarray(start, dtype=float)
        pos[:, 0, :, :] = start if start.ndim == 3 else start[None, :, :]
    dts = np.diff(t)
    for idx, size in _chunks(n):
        draws = _ChunkDraws(_chunk_rng(seed, idx), size)
        sl = slice(idx * CHUNK, idx * CHUNK + size)
        for k, dt in enumerate(dts):
            for j in range(N):
                dT = draws.wald(dt / params.masses[j], dt * dt)
                subs[sl, k + 1, j] = subs[sl, k, j] + dT
                dX = np.sqrt(dT)[:, None] * draws.normal(d)
                pos[sl, k + 1, j, :] = pos[sl, k, j, :] + dX
    return LevyPathBatch(seed=seed, t_grid=t, subordinator=subs, positions=pos, n_paths=n)


def levy_density(x, m: float, d: int) -> float:
    """Jump density nu(x) of the relativistic process, by adaptive quadrature.

    nu(x) = 2 (m/2pi)^{(d+1)/2} |x|^{-(d+1)/2}
            * int_0^inf xi^{(d-1)/2} exp(-(xi + 1/xi) m|x|/2) dxi,
    evaluated with the substitution xi = e^s (the integrand becomes
    2 cosh((d+1)s/2) exp(-m|x| cosh s) on s >= 0). Rejects |x| < 1e-8.
    """
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    if r < 1e-8:
        raise ModelError("levy density rejected below |x| = 1e-8 (non-integrable origin)")
    if m <= 0:
        raise ModelError("levy density needs m > 0")
    z = m * r
    nu_half = (d + 1) / 2.0
    s_cap = np.arccosh(700.0 / z) if z < 700.0 else 0.0

    def integrand(s):
        return 2.0 * np.cosh(nu_half * s) * np.exp(-z * np.cosh(s))

    if s_cap == 0.0:
        val = 0.0
    else:
        val, _ = integrate.quad(integrand, 0.0, s_cap + 1.0, limit=200)
    return float(2.0 * (m / (2.0 * np.pi)) ** nu_half * r ** (-nu_half) * val)


@dataclass
class MCEstimate:
    value: float
    stderr: float
    n_paths: int
    k_steps: int

    def zscore(self, truth: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.value == truth else np.inf
        return (self.value - truth) / self.stderr

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr,
                "n_paths": self.n_paths, "k_steps": self.k_steps}


def exceedance_probability(a: float, t: float, params: ModelParams, n: int, seed: int,
                           k_steps: int = 64, max_doublings: int = 3) -> MCEstimate:
    """P^0(sup_{s<=t} |X_s| > a) with the supremum over the discrete grid.

    The discrete supremum biases downward; the step count is doubled until the
    estimate moves by less than one standard error (or the cap is reached).
    """
    if a < 0:
        raise ModelError("exceedance level a must be >= 0")
    if a == 0.0:
        return MCEstimate(value=1.0, stderr=0.0, n_paths=n, k_steps=k_steps)

    def estimate(k: int) -> MCEstimate:
        acc = _MomentAccumulator()
        dts = np.full(k, t / k)
        for idx, size in _chunks(n):
            draws = _ChunkDraws(_chunk_rng(seed, idx), size)
            sup2 = np.zeros(size)
            cur = np.zeros((size, params.N, params.d))
            for dt in dts:
                for j in range(params.N):
                    dT = draws.wald(dt / params.masses[j], dt * dt)
                    cur[:, j, :] += np.sqrt(dT)[:, None] * draws.normal(params.d)
                sup2 = np.maximum(sup2, np.einsum("pjd,pjd->p", cur, cur))
            acc.add((sup2 > a * a).astype(float))
        val, err = acc.stats()
        return MCEstimate(value=val, stderr=err, n_paths=n, k_steps=k)

    est = estimate(k_steps)
    for _ in range(max_doublings):
        finer = estimate(2 * est.k_steps)
        moved = abs(finer.value - est.value)
        tol = max(est.stderr, finer.stderr, 1e-12)
        est = finer
        if moved < tol:
            break
    return est


def _interp_grid_function(grid: Grid, values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Multilinear interpolation of a grid function, 0 outside the box."""
    from scipy.interpolate import RegularGridInterpolator

    axes = [grid.axis_positions] * grid.dims
    interp = RegularGridInterpolator(axes, values, method="linear",
                                     bounds_error=False, fill_value=0.0)

    def f(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return interp(pts.reshape(-1, grid.dims)).reshape(pts.shape[:-1])

    return f


def feynman_kac(f_grid, g_grid, t: float, potential: Callable[[np.ndarray], np.ndarray],
                params: ModelParams, n: int, seed: int, k_steps: int = 64) -> MCEstimate:
    """Monte Carlo estimate of (f, e^{-tH} g) through the path representation.

    Start points are drawn from |f| * cellvolume over the grid; each path
    contributes phase(f(x0)) * ||f||_1 * g(X_t) * exp(-int_0^t W(X_s) ds) with
    a left-endpoint Riemann time integral. `potential` maps configuration
    arrays of shape (..., N, d) to W values. g is interpolated linearly and
    vanishes outside the box. t = 0 degenerates to the overlap quadrature.
    """
    grid = f_grid.grid
    if g_grid.grid.shape != grid.shape:
        raise ModelError("f and g must live on the same grid")
    if grid.dims != params.N * params.d:
        raise ModelError("grid dims must equal N*d for path sampling")
    f_amp = f_grid.amplitudes
    cell = grid.cell_volume
    overlap_weights = np.abs(f_amp) * cell
    total_mass = float(overlap_weights.sum())
    if total_mass == 0.0:
        return MCEstimate(value=0.0, stderr=0.0, n_paths=n, k_steps=k_steps)
    if t == 0.0:
        val = complex(np.sum(np.conj(f_amp) * g_grid.amplitudes) * cell)
        return MCEstimate(value=float(val.real), stderr=0.0, n_paths=n, k_steps=0)

    probs = (overlap_weights / total_mass).ravel()
    phases = np.conj(f_amp.ravel()) / np.where(np.abs(f_amp.ravel()) > 0, np.abs(f_amp.ravel()), 1.0)
    # start positions by flat grid index -> configuration (N, d)
    axis_pos = grid.axis_positions
    g_eval = _interp_grid_function(grid, g_grid.amplitudes.real)
    g_eval_im = _interp_grid_function(grid, g_grid.amplitudes.imag)
    dt = t / k_steps

    acc = _MomentAccumulator()
    for idx, size in _chunks(n):
        draws = _ChunkDraws(_chunk_rng(seed, idx), size)
        flat = draws.choice(len(probs), probs)
        unraveled = np.unravel_index(flat, grid.shape)
        x0 = np.stack([axis_pos[u] for u in unraveled], axis=-1)  # (size, dims)
        cur = x0.reshape(size, params.N, params.d)
        w_int = np.zeros(size)
        for _ in range(k_steps):
            w_int += potential(cur) * dt
            for j in range(params.N):
                dT = draws.wald(dt / params.masses[j], dt * dt)
                cur[:, j, :] = cur[:, j, :] + np.sqrt(dT)[:, None] * draws.normal(params.d)
        xt = cur.reshape(size, grid.dims)
        gv = g_eval(xt) + 1j * g_eval_im(xt)
        acc.add((phases[flat] * gv * np.exp(-w_int)).real * total_mass)
    val, err = acc.stats()
    return MCEstimate(value=val, stderr=err, n_paths=n, k_steps=k_steps)


def fk_step_consistency(f_grid, g_grid, t: float, potential, params: ModelParams,
                        n: int, seed: int, k_steps: int = 64) -> dict:
    """Halved-step check of the left-endpoint time integral's bias.

    Runs the estimator at k_steps and k_steps//2; they should agree within
    their combined standard errors once the discretization bias is below the
    Monte Carlo noise."""
    full = feynman_kac(f_grid, g_grid, t, potential, params, n, seed, k_steps)
    half = feynman_kac(f_grid, g_grid, t, potential, params, n, seed, max(k_steps // 2, 1))
    gap = abs(full.value - half.value)
    tol = 3.0 * (full.stderr + half.stderr)
    return {"full": full, "half": half, "gap": gap,
            "consistent": bool(gap <= max(tol, 1e-12))}


def dump_paths_csv(batch: LevyPathBatch, path, max_paths: int = 1000) -> None:
    """Raw-path dump for debugging: one row per (path, time) sample."""
    import csv

    n = min(batch.n_paths, max_paths)
    N, d = batch.positions.shape[2], batch.positions.shape[3]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["path", "t"] + [f"T_{j}" for j in range(N)]
        header += [f"x_{j}_{a}" for j in range(N) for a in range(d)]
        writer.writerow(header)
        for p in range(n):
            for k, t in enumerate(batch.t_grid):
                row = [p, repr(float(t))]
                row += [repr(float(batch.subordinator[p, k, j])) for j in range(N)]
                row += [repr(float(batch.positions[p, k, j, a]))
                        for j in range(N) for a in range(d)]
                writer.writerow(row)


@dataclass
class EnvelopeEstimate:
    X: np.ndarray
    t: float
    value: float
    stderr: float
    n_paths: int

    def as_dict(self) -> dict:
        return {"X": np.asarray(self.X).tolist(), "t": self.t, "value": self.value,
                "stderr": self.stderr, "n_paths": self.n_paths}


def decay_envelope(X, t: float, params: ModelParams,
                   weff: Callable[[np.ndarray], np.ndarray], n: int, seed: int,
                   k_steps: int = 64) -> EnvelopeEstimate:
    """E^X[exp(-2 int_0^t W_eff(X_s) ds)] started from configuration X.

    W_eff must be evaluable at arbitrary continuum configurations (paths leave
    the box; V and W are evaluated by their defining formulas out there).
    """
    X = np.asarray(X, dtype=float).reshape(params.N, params.d)
    if t <= 0:
        return EnvelopeEstimate(X=X, t=t, value=1.0, stderr=0.0, n_paths=n)
    dt = t / k_steps
    acc = _MomentAccumulator()
    for idx, size in _chunks(n):
        draws = _ChunkDraws(_chunk_rng(seed, idx), size)
        cur = np.broadcast_to(X, (size, params.N, params.d)).copy()
        w_int = np.zeros(size)
        for _ in range(k_steps):
            w_int += weff(cur) * dt
            for j in range(params.N):
                dT = draws.wald(dt / params.masses[j], dt * dt)
                cur[:, j, :] += np.sqrt(dT)[:, None] * draws.normal(params.d)
        acc.add(np.exp(-2.0 * w_int))
    val, err = acc.stats()
    return EnvelopeEstimate(X=X, t=t, value=val, stderr=err, n_paths=n)


def make_weff(potential, veff) -> Callable[[np.ndarray], np.ndarray]:
    """W_eff(X) = sum_j V(x_j) + V_eff(X) for configuration arrays (..., N, d)."""

    def weff(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        r = np.linalg.norm(X, axis=-1)
        out = potential.radial(r).sum(axis=-1)
        return out + veff.at_points(X)

    return weff


def in_b_region(X: np.ndarray, R: float) -> np.ndarray:
    """Membership in B_R = {|X| >= 2R and min_{i!=j} |x_i - x_j| <= |X|/2}."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None, ...]
    norms = np.sqrt(np.einsum("pjd,pjd->p", X, X))
    n_particles = X.shape[1]
    min_pair = np.full(X.shape[0], np.inf)
    for i in range(n_particles):
        for j in range(i + 1, n_particles):
            dij = np.linalg.norm(X[:, i, :] - X[:, j, :], axis=-1)
            min_pair = np.minimum(min_pair, dij)
    if n_particles < 2:
        min_pair = np.full(X.shape[0], np.inf)
    return (norms >= 2.0 * R) & (min_pair <= norms / 2.0)


def split_veff(veff, R: float):
    """V_eff = V_eff,0^R + V_eff,inf^R by the B_R indicator; exact pointwise."""

    def near(X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 2
        Xb = X[None, ...] if single else X
        vals = veff.at_points(Xb) * (~in_b_region(Xb, R))
        return vals[0] if single else vals

    def far(X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 2
        Xb = X[None, ...] if single else X
        vals = veff.at_points(Xb) * in_b_region(Xb, R)
        return vals[0] if single else vals

    return near, far


def schwarz_split_check(X, t: float, params: ModelParams, potential, veff, R: float,
                        n: int, seed: int, k_steps: int = 64) -> dict:
    """Both sides of the Schwarz split of E[1_{B^c} e^{-2 int W_eff}].

    All three expectations run on common paths; the inequality
    lhs <= sqrt(E[1 e^{-4 int V_inf}]) * sqrt(E[1 e^{-4 int (V + V_0)}])
    is returned with combined standard errors.
    """
    X = np.asarray(X, dtype=float).reshape(params.N, params.d)
    near, far = split_veff(veff, R)

    def v_only(Xs):
        r = np.linalg.norm(Xs, axis=-1)
        return potential.radial(r).sum(axis=-1)

    dt = t / k_steps
    acc = {"lhs": _MomentAccumulator(), "far": _MomentAccumulator(),
           "near": _MomentAccumulator()}
    for idx, size in _chunks(n):
        draws = _ChunkDraws(_chunk_rng(seed, idx), size)
        cur = np.broadcast_to(X, (size, params.N, params.d)).copy()
        int_full = np.zeros(size)
        int_far = np.zeros(size)
        int_near = np.zeros(size)
        entered = np.zeros(size, dtype=bool)
        for _ in range(k_steps):
            entered |= in_b_region(cur, R)
            vn = near(cur)
            vf = far(cur)
            vv = v_only(cur)
            int_full += (vv + vn + vf) * dt
            int_far += vf * dt
            int_near += (vv + vn) * dt
            for j in range(params.N):
                dT = draws.wald(dt / params.masses[j], dt * dt)
                cur[:, j, :] += np.sqrt(dT)[:, None] * draws.normal(params.d)
        ind = entered.astype(float)
        acc["lhs"].add(ind * np.exp(-2.0 * int_full))
        acc["far"].add(ind * np.exp(-4.0 * int_far))
        acc["near"].add(ind * np.exp(-4.0 * int_near))
    out = {key: a.stats() for key, a in acc.items()}
    lhs, lhs_err = out["lhs"]
    far_v, far_err = out["far"]
    near_v, near_err = out["near"]
    rhs = float(np.sqrt(max(far_v, 0.0)) * np.sqrt(max(near_v, 0.0)))
    # first-order error propagation for the product of square roots
    rhs_err = 0.0
    if far_v > 0 and near_v > 0:
        rhs_err = 0.5 * rhs * float(np.sqrt((far_err / far_v) ** 2 + (near_err / near_v) ** 2))
    return {"lhs": lhs, "lhs_err": lhs_err, "rhs": rhs, "rhs_err": rhs_err,
            "holds": lhs <= rhs + 3.0 * (lhs_err + rhs_err)}
