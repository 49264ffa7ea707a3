"""Relativistic kinetic operators sqrt(p^2 + m^2) - m as FFT multipliers and
the effective N-particle Hamiltonian matvec (kinetic + external + pair terms).

The multiplier is exact on the wrapped momentum grid; both transforms use the
unitary convention so Hermiticity holds to rounding. Pair potentials are
looked up in a one-axis-block table at wrapped difference indices, which keeps
storage at one configuration-grid array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .model import Grid, GridWavefunction, ModelError


def kinetic_symbol(momenta: np.ndarray, mass: float) -> np.ndarray:
    """sqrt(|k|^2 + m^2) - m, nonnegative, zero exactly at k=0."""
    if mass < 0:
        raise ModelError("mass must be >= 0 for a kinetic symbol")
    k2 = np.asarray(momenta, dtype=float) ** 2
    return np.sqrt(k2 + mass * mass) - mass


@dataclass(frozen=True)
class KineticOperator:
    """Kinetic multiplier for one particle acting on a block of d config axes."""

    mass: float
    axes: Tuple[int, ...]
    grid: Grid
    symbol: np.ndarray  # shaped to broadcast over the configuration grid

    @classmethod
    def build(cls, grid: Grid, mass: float, axes: Sequence[int]) -> "KineticOperator":
        axes = tuple(axes)
        if any(a < 0 or a >= grid.dims for a in axes):
            raise ModelError(f"axis block {axes} outside grid dims {grid.dims}")
        k2 = np.zeros((grid.n,) * len(axes))
        for i in range(len(axes)):
            shape = [1] * len(axes)
            shape[i] = grid.n
            k2 = k2 + (grid.axis_momenta ** 2).reshape(shape)
        sym = np.sqrt(k2 + mass * mass) - mass
        full = [1] * grid.dims
        for a in axes:
            full[a] = grid.n
        return cls(mass=mass, axes=axes, grid=grid, symbol=sym.reshape(full))


def apply_kinetic(op: KineticOperator, psi: GridWavefunction) -> GridWavefunction:
    """inverse-FFT(symbol * FFT(psi)) over the operator's axis block."""
    if psi.grid.shape != op.grid.shape:
        raise ModelError("wavefunction grid does not match kinetic operator grid")
    ft = np.fft.fftn(psi.amplitudes, axes=op.axes, norm="ortho")
    out = np.fft.ifftn(op.symbol * ft, axes=op.axes, norm="ortho")
    return GridWavefunction(psi.grid, out)


def pair_difference_table(table_values: np.ndarray, grid: Grid, d: int) -> np.ndarray:
    """Index helper arrays are avoided; returns a callable-free 2d-block array.

    Given a d-dimensional displacement-indexed table W[q], returns the
    (n,)*2d array T[mi, mj] = W[(mi - mj) mod n] used to embed a pair term
    into the configuration grid by broadcasting.
    """
    n = grid.n
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    out = table_values
    # peel one axis at a time: result axes ordered (mi_1..mi_d, mj_1..mj_d)
    for ax in range(d):
        out = np.take(out, idx, axis=ax)
        # take() inserts the two new axes at position ax; move the mj axis to the end
        out = np.moveaxis(out, ax + 1, -1)
    return out


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Matvec for h_eff on a configuration grid.

    h = sum_j [sqrt(-Delta_j + m_j^2) - m_j] + sum_j V(x_j)
        + alpha^2 sum_{i<j} W_ij(x_i - x_j)

    `mask` records the original particle labels this operator covers (cluster
    Hamiltonians act on their own compact grid); an empty mask is rejected.
    The diagonal (external + pair) part is precomputed as one real array.
    """

    grid: Grid
    kinetics: Tuple[KineticOperator, ...]
    diagonal: np.ndarray
    mask: Tuple[int, ...]
    alpha: float

    def __post_init__(self):
        if len(self.mask) == 0:
            raise ModelError("empty cluster mask: energies of the empty set are a "
                             "bookkeeping convention, not an operator")
        if self.diagonal.shape != self.grid.shape:
            raise ModelError("diagonal potential shape mismatch")
        if np.iscomplexobj(self.diagonal):
            raise ModelError("diagonal potential must be real")

    @property
    def dim(self) -> int:
        return self.grid.size

    def apply(self, psi: GridWavefunction) -> GridWavefunction:
        out = self.diagonal * psi.amplitudes
        for op in self.kinetics:
            ft = np.fft.fftn(psi.amplitudes, axes=op.axes, norm="ortho")
            out = out + np.fft.ifftn(op.symbol * ft, axes=op.axes, norm="ortho")
        return GridWavefunction(self.grid, out)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        psi = v.reshape(self.grid.shape)
        out = self.diagonal * psi
        for op in self.kinetics:
            ft = np.fft.fftn(psi, axes=op.axes, norm="ortho")
            out = out + np.fft.ifftn(op.symbol * ft, axes=op.axes, norm="ortho")
        return out.reshape(v.shape)

    def expectation(self, psi: GridWavefunction) -> float:
        hp = self.apply(psi)
        val = psi.inner(hp)
        return float(val.real)


def build_effective_hamiltonian(
    grid: Grid,
    masses: Sequence[float],
    d: int,
    v_axis: Optional[np.ndarray],
    pair_tables: Optional[Dict[Tuple[int, int], np.ndarray]],
    alpha: float,
    mask: Optional[Sequence[int]] = None,
) -> EffectiveHamiltonian:
    """Assemble h_eff for the particles of `masses` on a d*len(masses) grid.

    v_axis: external potential sampled on the one-axis-block grid (or None);
    pair_tables: displacement-indexed W tables per (i, j) local pair, i < j.
    """
    n_active = len(masses)
    if grid.dims != d * n_active:
        raise ModelError(f"grid dims {grid.dims} != d*N = {d * n_active}")
    kinetics = tuple(
        KineticOperator.build(grid, masses[j], range(j * d, (j + 1) * d))
        for j in range(n_active)
    )
    diag = np.zeros(grid.shape)
    if v_axis is not None:
        if v_axis.shape != (grid.n,) * d:
            raise ModelError("v_axis shape must be the one-axis-block grid")
        for j in range(n_active):
            shape = [1] * grid.dims
            for a in range(d):
                shape[j * d + a] = grid.n
            diag = diag + v_axis.reshape(shape)
    if pair_tables and alpha != 0.0:
        for (i, j), table in pair_tables.items():
            if not (0 <= i < j < n_active):
                raise ModelError(f"bad pair index {(i, j)}")
            block = pair_difference_table(table, grid, d)
            shape = [1] * grid.dims
            for a in range(d):
                shape[i * d + a] = grid.n
            for a in range(d):
                shape[j * d + a] = grid.n
            # block axes are (i-block..., j-block...); reshape aligns them
            diag = diag + alpha * alpha * block.reshape(shape)
    return EffectiveHamiltonian(
        grid=grid,
        kinetics=kinetics,
        diagonal=diag,
        mask=tuple(mask) if mask is not None else tuple(range(n_active)),
        alpha=alpha,
    )


def hermiticity_defect(h, seed: int = 0, trials: int = 5) -> float:
    """max |<u,Hv> - conj(<v,Hu>)| over random normalized pairs."""
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(h.dim) + 1j * rng.standard_normal(h.dim)
        v = rng.standard_normal(h.dim) + 1j * rng.standard_normal(h.dim)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        lhs = np.vdot(u, h.matvec(v))
        rhs = np.conj(np.vdot(v, h.matvec(u)))
        worst = max(worst, abs(lhs - rhs))
    return worst
