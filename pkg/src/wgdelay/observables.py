"""Measured quantities: excitation numbers, rates, field profiles, correlations, entanglement.

Emitter-only quantities take the reduced emitter density matrix (``2^N x 2^N``,
emitter 1 most significant, excited = 1). Field quantities take a running
:class:`~wgdelay.collision.Simulation`, since bins that have left the array
are read from its frozen-bin cache.

Field positions live on an integer grid ``m`` with ``x = m / ell`` in units of
the emitter spacing and emitter 1 at ``m = 0``. At step ``n`` the right mover
of bin ``k`` sits at ``m = n - k`` and its left mover at
``m = (N - 1) ell - (n - k)``, so the grid ``m = -n .. n + (N - 1) ell``
covers every mode that was ever allocated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InputError, UnsupportedSizeError
from .mps import emitter_density_matrix, entropy_bits

RATE_GUARD = 1e-9
G_FLOOR = 1e-8


# -- records ------------------------------------------------------------------------


@dataclass
class TimeSeriesRecord:
    """One row of observables at one sampled time.

    Optional blocks are ``None`` when not measured. ``sectors`` holds
    ``P^(0..N)``; ``singlets`` holds ``(P_S1, P_S2)``.
    """

    t: float
    n_exc: float
    gamma: float = 1.0
    rate: Optional[float] = None
    norm_sq: float = 1.0
    discarded: float = 0.0
    n_photons: Optional[float] = None
    s_ef: Optional[float] = None
    s_inout: Optional[float] = None
    neg: Optional[float] = None
    sectors: Optional[List[float]] = None
    singlets: Optional[tuple] = None
    survival: Optional[float] = None
    survival_rate: Optional[float] = None
    intensity: Optional[float] = None

    def row(self, n_emitters: int) -> List[str]:
        """CSV cells in :func:`csv_columns` order; absent values are empty strings."""

        def cell(v):
            if v is None or (isinstance(v, float) and math.isnan(v)):
                return ""
            return repr(float(v))

        sectors = self.sectors if self.sectors is not None else [None] * (n_emitters + 1)
        singlets = self.singlets if self.singlets is not None else (None, None)
        cells = [self.t, self.gamma * self.t, self.n_exc, self.rate, self.norm_sq, self.discarded]
        cells += [self.s_ef, self.s_inout, self.neg, *sectors, *singlets, self.survival, self.survival_rate]
        return [cell(v) for v in cells]


def csv_columns(n_emitters: int) -> List[str]:
    return (
        ["t", "gamma_t", "n_exc", "rate", "norm_sq", "discarded", "s_ef", "s_inout", "neg"]
        + [f"p{k}" for k in range(n_emitters + 1)]
        + ["ps1", "ps2", "F", "Rs"]
    )


def write_csv(records: Sequence[TimeSeriesRecord], path, n_emitters: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_columns(n_emitters))
        for rec in records:
            w.writerow(rec.row(n_emitters))


def read_csv(path) -> Dict[str, np.ndarray]:
    """Columns of a time-series CSV as float arrays (empty cells become NaN)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    out = {}
    for i, name in enumerate(header):
        out[name] = np.array([float(r[i]) if r[i] != "" else np.nan for r in body])
    return out


# -- emitter observables ---------------------------------------------------------------


def _n_from_dim(rho: np.ndarray) -> int:
    n = int(round(math.log2(rho.shape[0])))
    if rho.shape != (2**n, 2**n):
        raise InputError(f"expected a 2^N x 2^N matrix, got {rho.shape}")
    return n


def _popcounts(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    return np.array([bin(i).count("1") for i in idx])


def excitation_number_from_rho(rho: np.ndarray) -> float:
    """``sum_j <sigma_j^dag sigma_j>`` for an emitter density matrix."""
    rho = np.asarray(rho)
    return float(np.real(np.diag(rho)) @ _popcounts(_n_from_dim(rho)))


def excitation_number(sim) -> float:
    """Emitter excitation number of a running simulation."""
    return excitation_number_from_rho(emitter_density_matrix(sim.state))


def sector_populations(rho: np.ndarray) -> List[float]:
    """``P^(k) = Tr[Pi_k rho]`` for ``k = 0..N``."""
    rho = np.asarray(rho)
    n = _n_from_dim(rho)
    diag = np.real(np.diag(rho))
    return [float(v) for v in np.bincount(_popcounts(n), weights=diag, minlength=n + 1)]


def singlet_states() -> np.ndarray:
    """The two four-emitter singlet vectors as rows (basis ``|q1 q2 q3 q4>``, e = 1)."""

    def ket(bits: str) -> np.ndarray:
        v = np.zeros(16)
        v[int(bits.replace("e", "1").replace("g", "0"), 2)] = 1.0
        return v

    s1 = (ket("eegg") - ket("egeg") - ket("gege") + ket("ggee")) / 2.0
    s2 = (ket("eegg") + ket("egeg") + ket("gege") + ket("ggee")) / (2.0 * math.sqrt(3.0)) - (
        ket("egge") + ket("geeg")
    ) / math.sqrt(3.0)
    return np.array([s1, s2], dtype=np.complex128)


def singlet_projections(rho: np.ndarray) -> tuple:
    """``(P_S1, P_S2)`` for four emitters."""
    rho = np.asarray(rho)
    if rho.shape != (16, 16):
        raise UnsupportedSizeError(f"singlet projections need N = 4 emitters, got a {rho.shape} matrix")
    s = singlet_states()
    return tuple(float(np.real(v.conj() @ rho @ v)) for v in s)


def emitter_field_entropy(rho: np.ndarray) -> float:
    """Von Neumann entropy (bits) of the emitter state."""
    rho = np.asarray(rho)
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return entropy_bits(np.clip(w, 0.0, None))


def partial_transpose(rho: np.ndarray, n_first: int) -> np.ndarray:
    """Transpose the first ``n_first`` emitters (the most significant ones)."""
    rho = np.asarray(rho)
    n = _n_from_dim(rho)
    da, db = 2**n_first, 2 ** (n - n_first)
    return rho.reshape(da, db, da, db).transpose(2, 1, 0, 3).reshape(2**n, 2**n)


def logarithmic_negativity(rho: np.ndarray) -> float:
    """``log2 || rho^{T_A} ||_1`` with ``A`` = emitters ``1 .. floor(N / 2)``."""
    rho = np.asarray(rho)
    n = _n_from_dim(rho)
    if n < 2:
        return 0.0
    pt = partial_transpose(0.5 * (rho + rho.conj().T), n // 2)
    trace_norm = float(np.sum(np.abs(np.linalg.eigvalsh(pt))))
    return max(0.0, math.log2(trace_norm / np.trace(rho).real))


def survival_probability(rho: np.ndarray, reference: np.ndarray) -> float:
    """``|<Psi(0)|Psi(t)>|^2`` for an initial state ``reference (x) vacuum``.

    ``reference`` must have a definite excitation number: then the only part
    of the joint state with that many emitter excitations carries a vacuum
    field, and the overlap reduces to ``<ref| rho_emitters |ref>``.
    """
    ref = np.asarray(reference, dtype=np.complex128)
    ref = ref / np.linalg.norm(ref)
    counts = _popcounts(_n_from_dim(np.asarray(rho)))
    support = np.unique(counts[np.abs(ref) > 1e-12])
    if support.size != 1:
        raise InputError("survival reference must have a definite number of excitations")
    return float(np.real(ref.conj() @ rho @ ref))


def instantaneous_rate(t: Sequence[float], y: Sequence[float], guard: float = RATE_GUARD) -> np.ndarray:
    """``-(dy/dt) / y`` by central differences (one-sided at the ends); NaN where ``y < guard``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 3 or t.shape != y.shape:
        raise InputError("need at least three aligned samples")
    dy = np.gradient(y, t)
    out = np.full_like(y, np.nan)
    ok = y >= guard
    out[ok] = -dy[ok] / y[ok]
    return out


# -- field observables -----------------------------------------------------------------


def _mode_operators(params):
    from .collision import photon_annihilation

    return photon_annihilation(params)


def bin_densities(sim, at_step: Optional[int] = None) -> Dict[int, Optional[np.ndarray]]:
    """Single-bin density matrices for every allocated bin that has collided.

    Frozen bins come from the cache, live bins from one sweep over the chain.
    With ``at_step`` later than the current step, bins that are still live are
    reported as ``None``: their final state is not known yet.
    """
    lay = sim.layout
    n = sim.n if at_step is None else int(at_step)
    if n < sim.n:
        raise InputError(f"cannot look back to step {n} from step {sim.n}")
    out: Dict[int, Optional[np.ndarray]] = {k: rho for k, rho in sim.frozen.items() if k < n}
    live = [k for k in lay.live_bins(sim.n) if k not in out]
    if n == sim.n and live:
        pos = {lay.bin_position(k, sim.n): k for k in live}
        for p, rho in sim.state.site_densities(list(pos)).items():
            out[pos[p]] = rho
    else:
        for k in live:
            out[k] = None
        for k in range(sim.n, n):
            out[k] = None
    return out


@dataclass
class FieldProfile:
    """A per-mode quantity on the position grid.

    Attributes
    ----------
    m : ndarray of int
        Grid index; ``x = m / ell``.
    x : ndarray
        Position in units of the emitter spacing.
    right, left : ndarray
        Direction-resolved values (NaN where unknown).
    """

    m: np.ndarray
    x: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.right + self.left

    def window(self, x_lo: float, x_hi: float) -> np.ndarray:
        """Boolean mask for the open interval ``x_lo < x < x_hi``."""
        return (self.x > x_lo + 1e-12) & (self.x < x_hi - 1e-12)


def _profile(sim, ops_r: np.ndarray, ops_l: np.ndarray, at_step: Optional[int]) -> FieldProfile:
    lay = sim.layout
    n = sim.n if at_step is None else int(at_step)
    span = (lay.n_emitters - 1) * lay.ell
    m = np.arange(-n, n + span + 1)
    right = np.zeros(m.size)
    left = np.zeros(m.size)
    for k, rho in bin_densities(sim, n).items():
        age = n - k
        ir = age + n  # index of m = age
        il = span - age + n  # index of m = span - age
        if rho is None:
            right[ir] = left[il] = np.nan
            continue
        right[ir] = float(np.real(np.trace(rho @ ops_r)))
        left[il] = float(np.real(np.trace(rho @ ops_l)))
    return FieldProfile(m, m / lay.ell, right, left)


def field_energy_density(sim, at_step: Optional[int] = None) -> FieldProfile:
    """Photon number per bin on the position grid (both directions)."""
    a_r, a_l = _mode_operators(sim.params)
    return _profile(sim, a_r.conj().T @ a_r, a_l.conj().T @ a_l, at_step)


def autocorrelation(sim, order: int, at_step: Optional[int] = None) -> FieldProfile:
    """Same-direction ``G^(m) = <(a^dag)^m a^m>`` per mode on the position grid."""
    order = int(order)
    if order < 1:
        raise InputError(f"correlation order must be positive, got {order}")
    if sim.params.n_max < order:
        raise ConfigurationError(
            f"order-{order} correlations need at least {order} photons per mode: set n_max >= {order}"
        )
    a_r, a_l = _mode_operators(sim.params)
    pr = np.linalg.matrix_power(a_r, order)
    pl = np.linalg.matrix_power(a_l, order)
    return _profile(sim, pr.conj().T @ pr, pl.conj().T @ pl, at_step)


def normalized_autocorrelation(g_m: FieldProfile, density: FieldProfile, order: int, floor: float = G_FLOOR) -> FieldProfile:
    """``g^(m) = G^(m) / n^m`` per direction; NaN where ``n < floor``."""

    def ratio(num, den):
        out = np.full(num.shape, np.nan)
        ok = np.isfinite(den) & (den >= floor)
        out[ok] = num[ok] / den[ok] ** order
        return out

    return FieldProfile(g_m.m, g_m.x, ratio(g_m.right, density.right), ratio(g_m.left, density.left))


def photon_number(sim) -> float:
    """Total photon number in the field (all bins that have collided)."""
    prof = field_energy_density(sim)
    return float(np.sum(prof.total))


def output_intensity(sim, direction: str = "both") -> np.ndarray:
    """Photons per unit time leaving the array, indexed by frozen bin (time of exit).

    Entry ``i`` belongs to the bin frozen during step ``i``; its right mover
    leaves past emitter ``N`` and its left mover past emitter 1 at that step.
    """
    a_r, a_l = _mode_operators(sim.params)
    ops = {"right": [a_r], "left": [a_l], "both": [a_r, a_l]}[direction]
    lay = sim.layout
    out = np.zeros(sim.n)
    for i in range(sim.n):
        rho = sim.frozen.get(lay.frozen_bin(i))
        if rho is not None:
            out[i] = sum(float(np.real(np.trace(rho @ a.conj().T @ a))) for a in ops)
    return out / sim.params.dt


def in_out_entropy(sim) -> float:
    """Entanglement entropy (bits) between the trapping region and the rest of the field.

    The region runs in the chain from ``S_1`` to the newest bin; every site to
    its right is an untouched vacuum bin, so one cut just left of ``S_1`` gives
    the entropy exactly.
    """
    lo, _ = sim.layout.trapping_span(sim.n)
    if lo == 0:
        return 0.0
    return sim.state.bond_entropy(lo - 1)


def trapping_region_entropy(sim, max_dim: int = 4096) -> float:
    """Two-cut reference for :func:`in_out_entropy` (small chains only).

    Builds the reduced density matrix of the trapping region directly.
    """
    lo, hi = sim.layout.trapping_span(sim.n)
    sites = list(range(lo, hi + 1))
    dim = int(np.prod([sim.state.tensors[s].shape[1] for s in sites]))
    if dim > max_dim:
        raise UnsupportedSizeError(f"trapping region dimension {dim} exceeds {max_dim}")
    rho = sim.state.reduced_density_matrix(sites)
    rho = rho / np.trace(rho).real
    return emitter_field_entropy(rho)


# -- observer ----------------------------------------------------------------------------


@dataclass
class Observer:
    """Collects :class:`TimeSeriesRecord` rows during a collision run.

    Parameters
    ----------
    stride : int
        Record every ``stride`` steps (plus the final step).
    blocks : set of str
        Optional blocks among ``entropies``, ``negativity``, ``sectors``,
        ``singlets``, ``survival``, ``photons``.
    """

    stride: int = 1
    blocks: frozenset = frozenset({"entropies", "negativity", "sectors", "singlets", "survival", "photons"})
    records: List[TimeSeriesRecord] = field(default_factory=list)
    reference: Optional[np.ndarray] = None

    def __call__(self, sim) -> None:
        if sim.n == 0 and self.reference is None:
            self.reference = sim.initial_emitters
        if sim.n % self.stride and not sim.done:
            return
        rho = emitter_density_matrix(sim.state)
        rec = TimeSeriesRecord(
            t=sim.t,
            n_exc=excitation_number_from_rho(rho),
            gamma=sim.params.gamma,
            norm_sq=sim.state.norm_sq(),
            discarded=sim.state.cumulative_discarded,
        )
        b = self.blocks
        if "photons" in b:
            rec.n_photons = photon_number(sim)
        if "entropies" in b:
            rec.s_ef = emitter_field_entropy(rho)
            rec.s_inout = in_out_entropy(sim)
        if "negativity" in b:
            rec.neg = logarithmic_negativity(rho)
        if "sectors" in b:
            rec.sectors = sector_populations(rho)
        if "singlets" in b and sim.params.n_emitters == 4:
            rec.singlets = singlet_projections(rho)
        if "survival" in b and self.reference is not None:
            try:
                rec.survival = survival_probability(rho, self.reference)
            except InputError:
                pass
        self.records.append(rec)

    def finalize(self) -> List[TimeSeriesRecord]:
        """Fill the rate columns from the recorded series."""
        return fill_rates(self.records)


def fill_rates(records: List[TimeSeriesRecord]) -> List[TimeSeriesRecord]:
    if len(records) < 3:
        return records
    t = np.array([r.t for r in records])
    rate = instantaneous_rate(t, [r.n_exc for r in records])
    for r, v in zip(records, rate):
        r.rate = None if np.isnan(v) else float(v)
    if all(r.survival is not None for r in records):
        rs = instantaneous_rate(t, [r.survival for r in records])
        for r, v in zip(records, rs):
            r.survival_rate = None if np.isnan(v) else float(v)
    return records
