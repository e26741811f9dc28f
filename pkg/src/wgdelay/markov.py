"""Markovian reference: dense Lindblad master equation for collective emitter decay.

The dissipator is written with the two collective jump operators
``E_R, E_L = i sqrt(gamma/2) sum_j exp(+-i k0 x_j) sigma_j``; summing
``E rho E^dag - {E^dag E, rho}/2`` over both reproduces the double sum with
``Gamma_ij = (gamma/2) cos(k0 |x_i - x_j|)`` term by term. A single emitter
therefore decays at rate ``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import List, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import IntegrationError, InputError

SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)


def lowering_operators(n_emitters: int) -> List[sp.csr_matrix]:
    """``sigma_j`` embedded in the ``2^N`` space, emitter 1 most significant."""
    eye = sp.identity(2, dtype=np.complex128, format="csr")
    ops = []
    for j in range(n_emitters):
        factors = [eye] * n_emitters
        factors[j] = sp.csr_matrix(SIGMA)
        ops.append(reduce(lambda a, b: sp.kron(a, b, format="csr"), factors))
    return ops


@dataclass
class LindbladSpec:
    """Operators defining the collective master equation.

    Attributes
    ----------
    hamiltonian : ndarray
        Coherent exchange ``H_S`` (dense, ``2^N x 2^N``).
    kossakowski : ndarray
        Real symmetric ``Gamma_ij``.
    lowering : list of sparse matrices
        ``sigma_j`` for ``j = 1..N``.
    jumps : list of ndarray
        Collective jump operators whose dissipators sum to the double-sum form.
    mode : str
        ``"general"`` or ``"dicke"``.
    """

    n_emitters: int
    gamma: float
    hamiltonian: np.ndarray
    kossakowski: np.ndarray
    lowering: List[sp.csr_matrix]
    jumps: List[np.ndarray]
    mode: str = "general"

    @property
    def dim(self) -> int:
        return 2**self.n_emitters


def kossakowski_matrix(n_emitters: int, gamma: float = 1.0, k0d: float = 2 * math.pi) -> np.ndarray:
    x = np.arange(n_emitters)
    return 0.5 * gamma * np.cos(k0d * np.abs(x[:, None] - x[None, :]))


def collective_jump_ops(n_emitters: int, gamma: float = 1.0, k0d: float = 2 * math.pi) -> List[np.ndarray]:
    """``[E_R, E_L]`` as dense matrices."""
    sig = lowering_operators(n_emitters)
    phases = np.exp(1j * k0d * np.arange(n_emitters))
    amp = 1j * math.sqrt(gamma / 2.0)
    e_r = amp * sum(p * s for p, s in zip(phases, sig))
    e_l = amp * sum(np.conj(p) * s for p, s in zip(phases, sig))
    return [np.asarray(e_r.todense()), np.asarray(e_l.todense())]


def build_spec(n_emitters: int, gamma: float = 1.0, k0d: float = 2 * math.pi, mode: str = "general") -> LindbladSpec:
    """Master-equation data for emitters at ``x_j = (j - 1) d`` with phase ``k0 d``.

    ``mode="dicke"`` uses the single collective operator ``sqrt(gamma) S`` and
    requires nothing about ``k0d`` (it is the mirror-configuration form).
    """
    if n_emitters < 1:
        raise InputError(f"need at least one emitter, got {n_emitters}")
    sig = lowering_operators(n_emitters)
    x = np.arange(n_emitters)
    dist = np.abs(x[:, None] - x[None, :])
    coupling = 0.5 * gamma * np.sin(k0d * dist)
    ham = np.zeros((2**n_emitters,) * 2, dtype=np.complex128)
    if mode == "general":
        for i in range(n_emitters):
            for j in range(n_emitters):
                if coupling[i, j] != 0.0:
                    ham += coupling[i, j] * (sig[i].conj().T @ sig[j]).toarray()
        jumps = collective_jump_ops(n_emitters, gamma, k0d)
        gam = kossakowski_matrix(n_emitters, gamma, k0d)
    elif mode == "dicke":
        s_op = sum(sig).toarray()
        jumps = [math.sqrt(gamma) * s_op]
        gam = np.full((n_emitters, n_emitters), 0.5 * gamma)
    else:
        raise InputError(f"unknown mode {mode!r}")
    return LindbladSpec(n_emitters, gamma, ham, gam, sig, jumps, mode)


def lindblad_rhs(spec: LindbladSpec, rho: np.ndarray) -> np.ndarray:
    """``d rho / dt`` from the jump-operator form."""
    out = -1j * (spec.hamiltonian @ rho - rho @ spec.hamiltonian)
    for e in spec.jumps:
        ed = e.conj().T
        ede = ed @ e
        out += e @ rho @ ed - 0.5 * (ede @ rho + rho @ ede)
    return out


def lindblad_rhs_double_sum(spec: LindbladSpec, rho: np.ndarray) -> np.ndarray:
    """Literal ``sum_ij Gamma_ij (2 s_j rho s_i^dag - {s_i^dag s_j, rho})``; slow reference."""
    out = -1j * (spec.hamiltonian @ rho - rho @ spec.hamiltonian)
    sig = [s.toarray() for s in spec.lowering]
    n = spec.n_emitters
    for i in range(n):
        for j in range(n):
            g = spec.kossakowski[i, j]
            if g == 0.0:
                continue
            sdi = sig[i].conj().T
            out += g * (2 * sig[j] @ rho @ sdi - (sdi @ sig[j] @ rho + rho @ sdi @ sig[j]))
    return out


def max_step(spec: LindbladSpec) -> float:
    """Fixed RK4 step bound ``1 / (50 gamma N^2)``."""
    g = spec.gamma if spec.gamma > 0 else 1.0
    return 1.0 / (50.0 * g * spec.n_emitters**2)


def evolve(spec: LindbladSpec, rho0: np.ndarray, t_grid: Sequence[float], max_substeps: int = 10_000_000) -> np.ndarray:
    """Density matrices at the times in ``t_grid`` (fixed-step RK4 between grid points).

    Returns an array of shape ``(len(t_grid), 2^N, 2^N)``.
    """
    rho = np.array(rho0, dtype=np.complex128)
    if rho.shape != (spec.dim, spec.dim):
        raise InputError(f"rho0 has shape {rho.shape}, expected {(spec.dim, spec.dim)}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10 or abs(np.trace(rho) - 1) > 1e-10:
        raise InputError("rho0 must be Hermitian with unit trace")
    if np.linalg.eigvalsh(rho)[0] < -1e-10:
        raise InputError("rho0 must be positive semidefinite")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0):
        raise InputError("t_grid must be a non-empty strictly increasing sequence")
    h_max = max_step(spec)
    out = np.empty((t_grid.size, spec.dim, spec.dim), dtype=np.complex128)
    out[0] = rho
    for idx in range(1, t_grid.size):
        span = t_grid[idx] - t_grid[idx - 1]
        count = int(math.ceil(span / h_max - 1e-12))
        if count > max_substeps:
            raise IntegrationError(f"interval {span:.3g} needs {count} substeps (limit {max_substeps})")
        h = span / count
        for _ in range(count):
            k1 = lindblad_rhs(spec, rho)
            k2 = lindblad_rhs(spec, rho + 0.5 * h * k1)
            k3 = lindblad_rhs(spec, rho + 0.5 * h * k2)
            k4 = lindblad_rhs(spec, rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(rho)):
            raise IntegrationError(f"non-finite density matrix at t = {t_grid[idx]:.4g}")
        rho = 0.5 * (rho + rho.conj().T)
        out[idx] = rho
    return out


def all_excited(n_emitters: int) -> np.ndarray:
    rho = np.zeros((2**n_emitters,) * 2, dtype=np.complex128)
    rho[-1, -1] = 1.0
    return rho


def pure(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def dicke_observables(trajectory: np.ndarray, t_grid: Sequence[float], reference: np.ndarray | None = None, gamma: float = 1.0):
    """Time-series records computed directly from a density-matrix trajectory.

    ``reference`` is the emitter state vector used for the survival probability
    (defaults to none, leaving ``F`` and ``R_s`` absent).
    """
    from .observables import TimeSeriesRecord, emitter_field_entropy, excitation_number_from_rho
    from .observables import instantaneous_rate, logarithmic_negativity, sector_populations, singlet_projections

    t_grid = np.asarray(t_grid, dtype=float)
    n_emitters = int(round(math.log2(trajectory.shape[1])))
    n_exc = np.array([excitation_number_from_rho(r) for r in trajectory])
    rate = instantaneous_rate(t_grid, n_exc)
    surv = rs = None
    if reference is not None:
        ref = np.asarray(reference, dtype=np.complex128)
        ref = ref / np.linalg.norm(ref)
        surv = np.array([float(np.real(ref.conj() @ r @ ref)) for r in trajectory])
        rs = instantaneous_rate(t_grid, surv)
    records = []
    for i, rho in enumerate(trajectory):
        rec = TimeSeriesRecord(
            t=float(t_grid[i]),
            gamma=gamma,
            n_exc=float(n_exc[i]),
            rate=float(rate[i]),
            norm_sq=float(np.trace(rho).real),
            discarded=0.0,
            s_ef=emitter_field_entropy(rho),
            neg=logarithmic_negativity(rho),
            sectors=sector_populations(rho),
        )
        if n_emitters == 4:
            rec.singlets = singlet_projections(rho)
        if surv is not None:
            rec.survival = float(surv[i])
            rec.survival_rate = float(rs[i])
        records.append(rec)
    return records
