"""Coarse-grained collision model for emitters in a delayed bidirectional waveguide.

Conventions
-----------
Emitter pair site ``S_j`` holds emitters ``j`` and ``j' = N + 1 - j``; its basis
index is ``2 * q_j + q_j'`` with ``q = 0`` for ground and ``1`` for excited.
Photon bin ``k`` holds a right-moving and a (shifted) left-moving mode; its
basis index is ``r * (n_max + 1) + l``.

During step ``n`` pair ``j`` collides with bins ``A = n - (j - 1) ell`` and
``B = n - (N - j) ell``. With the left-moving field shifted by ``(N - 1) tau``,
both modes of bin ``k`` enter the array at step ``k`` and leave it after step
``k + (N - 1) ell``. At time ``t_n`` a bin of age ``a = n - k`` places its
right mover at ``x = a / ell`` and its left mover at ``x = N - 1 - a / ell``
(units of the emitter spacing, emitter 1 at ``x = 0``).

Chain order at the start of step ``n``: bins in increasing ``k``, with ``S_j``
inserted right after bin ``n - (N - j) ell``. Hence ``B_j`` always sits just
left of ``S_j``, all ``A_j`` lie in the ``N ell / 2`` bins after ``S_{N/2}``,
and shifting every ``S_j`` one site to the right prepares step ``n + 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractViolation, InputError, LayoutError, UnsupportedSizeError
from .mps import MatrixProductState, SiteKind, emitter_density_matrix, product_state
from .tensor_core import TruncationPolicy, expm_hermitian_generator, svd_truncate, unitarity_error

GAMMA_DT_WARNING = 0.02


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical knobs of one collision-model run.

    Parameters
    ----------
    n_emitters : int
        Even number of emitters ``N``.
    gamma : float
        Single-emitter decay rate; sets the time unit.
    tau : float
        Propagation delay between neighbouring emitters.
    ell : int
        Number of collision steps per delay, ``dt = tau / ell``.
    phi : float
        Phase ``k0 d`` per inter-emitter hop; multiples of ``2 pi`` give the
        mirror configuration.
    n_max : int
        Photons kept per direction and bin (1 or 3).
    t_max : float
        Total evolution time.
    policy : TruncationPolicy
        Bond truncation used by every SVD.
    pad_emitters : bool
        Give emitter sites the photon-site dimension (only the first four
        levels are used).
    """

    n_emitters: int = 4
    gamma: float = 1.0
    tau: float = 0.4
    ell: int = 40
    phi: float = 2 * math.pi
    n_max: int = 1
    t_max: float = 16.0
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    pad_emitters: bool = False

    def __post_init__(self):
        n = self.n_emitters
        if int(n) != n or n < 2 or n % 2:
            raise ValueError(f"n_emitters must be an even integer >= 2, got {n}")
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValueError(f"ell must be a positive integer, got {self.ell}")
        if self.gamma < 0 or self.tau <= 0:
            raise ValueError(f"need gamma >= 0 and tau > 0, got gamma={self.gamma}, tau={self.tau}")
        if self.n_max not in (1, 3):
            raise ValueError(f"n_max must be 1 or 3, got {self.n_max}")
        if self.t_max < 0:
            raise ValueError(f"t_max must be non-negative, got {self.t_max}")
        if self.gamma * self.dt > GAMMA_DT_WARNING + 1e-12:
            warnings.warn(
                f"gamma*dt = {self.gamma * self.dt:.4g} exceeds {GAMMA_DT_WARNING}; "
                "first-order coarse graining may be inaccurate",
                stacklevel=3,
            )

    @classmethod
    def from_eta(cls, n_emitters: int, eta: float, gamma_dt: float = 0.01, gamma: float = 1.0, **kwargs) -> "ModelParams":
        """Build parameters from ``eta = gamma tau`` and ``gamma dt`` (``ell`` rounded)."""
        if eta <= 0:
            raise ValueError("eta must be positive for the collision model; use the Markov solver for eta = 0")
        ell = max(1, int(round(eta / gamma_dt)))
        return cls(n_emitters=n_emitters, gamma=gamma, tau=eta / gamma, ell=ell, **kwargs)

    @property
    def dt(self) -> float:
        return self.tau / self.ell

    @property
    def eta(self) -> float:
        return self.gamma * self.tau

    @property
    def pairs(self) -> int:
        return self.n_emitters // 2

    @property
    def photon_levels(self) -> int:
        return self.n_max + 1

    @property
    def d_photon(self) -> int:
        return self.photon_levels**2

    @property
    def d_emitter(self) -> int:
        return self.d_photon if self.pad_emitters else 4

    @property
    def n_steps(self) -> int:
        ratio = self.t_max / self.dt
        steps = int(math.ceil(ratio - 1e-9))
        if abs(steps - ratio) > 1e-9:
            warnings.warn(f"t_max/dt = {ratio:.6g} is not integral; running {steps} steps", stacklevel=2)
        return steps

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


# -- local operators ----------------------------------------------------------------

SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)  # |g><e|


def annihilation(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels)), k=1).astype(np.complex128)


def emitter_lowering(params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Lowering operators of the first and second emitter of a pair site."""
    eye2 = np.eye(2)
    first, second = np.kron(SIGMA, eye2), np.kron(eye2, SIGMA)
    d = params.d_emitter
    if d == 4:
        return first, second
    out = []
    for op in (first, second):
        big = np.zeros((d, d), dtype=np.complex128)
        big[:4, :4] = op
        out.append(big)
    return out[0], out[1]


def photon_annihilation(params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Right- and left-mover annihilation operators on one photon bin."""
    a = annihilation(params.photon_levels)
    eye = np.eye(params.photon_levels)
    return np.kron(a, eye), np.kron(eye, a)


def photon_charges(params: ModelParams) -> np.ndarray:
    """Photon number of every photon-bin basis state."""
    n = np.arange(params.photon_levels)
    return np.add.outer(n, n).ravel()


def emitter_charges(params: ModelParams) -> np.ndarray:
    """Excitation number of every emitter-pair basis state (padding levels count as 0)."""
    out = np.zeros(params.d_emitter, dtype=np.int64)
    out[:4] = [0, 1, 1, 2]
    return out


def site_charges(params: ModelParams, kinds: Sequence[SiteKind]) -> List[np.ndarray]:
    ph, em = photon_charges(params), emitter_charges(params)
    return [em if k.is_emitter else ph for k in kinds]


@dataclass
class CollisionGate:
    """Unitary ``exp(-i O_j)`` for emitter pair ``j`` on sites (bin B, S_j, bin A) in chain order."""

    pair: int
    unitary: np.ndarray
    dims: Tuple[int, int, int]

    def __post_init__(self):
        err = unitarity_error(self.unitary)
        if err > 1e-10:
            raise ContractViolation(f"gate for pair {self.pair} deviates from unitarity by {err:.2e}")


def collision_generator(params: ModelParams, j: int) -> np.ndarray:
    """Hermitian generator ``O_j`` on (bin B, S_j, bin A), legs in that order."""
    n = params.n_emitters
    if not 1 <= j <= params.pairs:
        raise IndexError(f"pair index {j} outside 1..{params.pairs}")
    s_first, s_second = emitter_lowering(params)
    a_r, a_l = photon_annihilation(params)
    dp, ds = params.d_photon, params.d_emitter
    eye_p, eye_s = np.eye(dp), np.eye(ds)

    def on_b(op):
        return np.kron(np.kron(op, eye_s), eye_p)

    def on_s(op):
        return np.kron(np.kron(eye_p, op), eye_p)

    def on_a(op):
        return np.kron(np.kron(eye_p, eye_s), op)

    near = np.exp(-1j * (j - 1) * params.phi)
    far = np.exp(-1j * (n - j) * params.phi)
    cr_a, cl_a = on_a(a_r.conj().T), on_a(a_l.conj().T)
    cr_b, cl_b = on_b(a_r.conj().T), on_b(a_l.conj().T)
    emit = on_s(s_first) @ (near * cr_a + far * cl_b) + on_s(s_second) @ (far * cr_b + near * cl_a)
    g = math.sqrt(params.gamma * params.dt / 2.0)
    return g * (emit + emit.conj().T)


def build_gates(params: ModelParams) -> List[CollisionGate]:
    """Step-independent collision gates for pairs ``1..N/2``."""
    dims = (params.d_photon, params.d_emitter, params.d_photon)
    return [
        CollisionGate(j, expm_hermitian_generator(collision_generator(params, j)), dims)
        for j in range(1, params.pairs + 1)
    ]


# -- layout ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SiteLayout:
    """Where every site sits in the chain at the start of each step.

    Bins ``k_min .. k_max`` are allocated: ``k_min = -(N - 1) ell`` is the first
    bin any gate touches, ``k_max`` leaves one delay of margin after the last
    fresh bin.
    """

    n_emitters: int
    ell: int
    n_steps: int

    @classmethod
    def for_params(cls, params: ModelParams) -> "SiteLayout":
        return cls(params.n_emitters, params.ell, params.n_steps)

    @property
    def pairs(self) -> int:
        return self.n_emitters // 2

    @property
    def k_min(self) -> int:
        return -(self.n_emitters - 1) * self.ell

    @property
    def k_max(self) -> int:
        return self.n_steps - 1 + self.ell

    @property
    def n_bins(self) -> int:
        return self.k_max - self.k_min + 1

    @property
    def n_sites(self) -> int:
        return self.n_bins + self.pairs

    def _check_step(self, n: int) -> None:
        if not 0 <= n <= self.n_steps:
            raise LayoutError(f"step {n} outside the allocated window 0..{self.n_steps}")

    def anchor_bin(self, j: int, n: int) -> int:
        """Bin just left of ``S_j`` at step ``n`` (this is ``B_j``)."""
        return n - (self.n_emitters - j) * self.ell

    def emitter_position(self, j: int, n: int) -> int:
        self._check_step(n)
        return self.anchor_bin(j, n) - self.k_min + j

    def bin_position(self, k: int, n: int) -> int:
        self._check_step(n)
        if not self.k_min <= k <= self.k_max:
            raise LayoutError(f"bin {k} outside allocated range {self.k_min}..{self.k_max}")
        before = sum(1 for j in range(1, self.pairs + 1) if k > self.anchor_bin(j, n))
        return k - self.k_min + before

    def target_bins(self, j: int, n: int) -> Tuple[int, int]:
        """``(B, A)`` bin indices for pair ``j`` at step ``n``."""
        return n - (self.n_emitters - j) * self.ell, n - (j - 1) * self.ell

    def targets(self, j: int, n: int) -> Tuple[int, int, int]:
        """Chain positions of (B, S_j, A) for pair ``j`` at step ``n``."""
        if n >= self.n_steps:
            raise LayoutError(f"step {n} is beyond the {self.n_steps} allocated steps")
        b, a = self.target_bins(j, n)
        return self.bin_position(b, n), self.emitter_position(j, n), self.bin_position(a, n)

    def kinds_at(self, n: int) -> List[SiteKind]:
        kinds = [SiteKind.photon_bin(k) for k in range(self.k_min, self.k_max + 1)]
        for j in range(1, self.pairs + 1):
            kinds.insert(self.emitter_position(j, n), SiteKind.emitter_pair(j))
        return kinds

    def frozen_bin(self, n: int) -> int:
        """Bin that has its last collision during step ``n``."""
        return n - (self.n_emitters - 1) * self.ell

    def live_bins(self, n: int) -> range:
        """Bins that have collided at least once and may collide again, at time ``t_n``."""
        return range(max(self.k_min, n - (self.n_emitters - 1) * self.ell), n)

    def trapping_span(self, n: int) -> Tuple[int, int]:
        """First and last chain position of the region between emitter 1 and emitter N.

        The region holds every emitter site plus the bins whose right mover or
        left mover lies strictly between the outermost emitters, i.e. ages
        ``1 .. (N - 1) ell - 1``. In chain order this is the contiguous block
        from ``S_1`` to bin ``n - 1``.
        """
        lo, hi = self.emitter_position(1, n), self.emitter_position(self.pairs, n)
        if (self.n_emitters - 1) * self.ell >= 2:
            hi = max(hi, self.bin_position(n - 1, n))
        return lo, hi

    def positions(self, k: int, n: int) -> Tuple[float, float]:
        """Positions (units of the spacing) of the right and left movers of bin ``k`` at ``t_n``."""
        age = n - k
        return age / self.ell, (self.n_emitters - 1) - age / self.ell


# -- initial states ---------------------------------------------------------------


def _embed(vec: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros(d, dtype=np.complex128)
    out[: vec.size] = vec
    return out


def _vacuum(params: ModelParams) -> np.ndarray:
    return _embed(np.array([1.0]), params.d_photon)


def prepare_product(params: ModelParams, pair_vectors: Sequence[np.ndarray]) -> MatrixProductState:
    layout = SiteLayout.for_params(params)
    kinds = layout.kinds_at(0)
    vectors = []
    for kind in kinds:
        if kind.is_emitter:
            vectors.append(_embed(np.asarray(pair_vectors[kind.index - 1], dtype=np.complex128), params.d_emitter))
        else:
            vectors.append(_vacuum(params))
    return product_state(vectors, kinds, site_charges(params, kinds))


def prepare_all_excited(params: ModelParams) -> MatrixProductState:
    """All emitters excited (``|ee>`` on every pair site), every bin in vacuum."""
    ee = np.zeros(4)
    ee[3] = 1.0
    return prepare_product(params, [ee] * params.pairs)


def dicke_vector(n_emitters: int, excitations: int) -> np.ndarray:
    """Normalized symmetric Dicke state on ``n_emitters`` qubits (emitter 1 most significant)."""
    if not 0 <= excitations <= n_emitters:
        raise ValueError(f"cannot place {excitations} excitations on {n_emitters} emitters")
    idx = np.arange(2**n_emitters)
    weight = np.array([bin(i).count("1") for i in idx])
    vec = (weight == excitations).astype(np.complex128)
    return vec / np.linalg.norm(vec)


def emitter_to_pair_order(vec: np.ndarray, n_emitters: int) -> np.ndarray:
    """Reorder an emitter-ordered state vector into pair-site order (S_1, S_2, ...)."""
    psi = np.asarray(vec).reshape([2] * n_emitters)
    axes = []
    for j in range(1, n_emitters // 2 + 1):
        axes += [j - 1, n_emitters - j]
    return psi.transpose(axes).reshape(-1)


def prepare_symmetric_dicke(params: ModelParams, excitations: Optional[int] = None) -> MatrixProductState:
    """Emitters in the symmetric Dicke state with ``N/2`` excitations, field in vacuum.

    Emitter sites are brought together by swaps, replaced by an exact SVD
    decomposition of the emitter state vector, and swapped back.
    """
    n = params.n_emitters
    if n > 8:
        raise UnsupportedSizeError(f"symmetric Dicke preparation implemented for N <= 8, got {n}")
    excitations = n // 2 if excitations is None else excitations
    ground = np.zeros(4)
    ground[0] = 1.0
    state = prepare_product(params, [ground] * params.pairs)
    layout = SiteLayout.for_params(params)
    home = [layout.emitter_position(j, 0) for j in range(1, params.pairs + 1)]
    first = home[0]
    exact = TruncationPolicy.exact()
    for q in range(1, params.pairs):
        state.move_site(home[q], first + q, exact)

    psi = emitter_to_pair_order(dicke_vector(n, excitations), n)
    ds = params.d_emitter
    tensors = []
    rest = psi.reshape(1, -1)
    for q in range(params.pairs - 1):
        left = rest.shape[0]
        res = svd_truncate(rest.reshape(left * 4, -1), exact)
        u = res.left_isometry.reshape(left, 4, res.rank)
        tensors.append(u)
        rest = res.singular_values[:, None] * res.right_isometry
    tensors.append(rest.reshape(rest.shape[0], 4, 1))
    state.move_center(first + params.pairs - 1)
    for q, t in enumerate(tensors):
        padded = np.zeros((t.shape[0], ds, t.shape[2]), dtype=np.complex128)
        padded[:, :4, :] = t
        state.tensors[first + q] = padded
    state.assign_charges(site_charges(params, state.kinds))

    for q in range(params.pairs - 1, 0, -1):
        state.move_site(first + q, home[q], exact)
    return state


# -- evolution -----------------------------------------------------------------------


FreezeHook = Callable[[int, np.ndarray], None]


def step(
    state: MatrixProductState,
    layout: SiteLayout,
    gates: Sequence[CollisionGate],
    n: int,
    policy: TruncationPolicy | None = None,
    on_freeze: FreezeHook | None = None,
) -> None:
    """Advance ``state`` from ``t_n`` to ``t_{n+1}``.

    Applies the pair gates in ascending ``j`` and then moves every emitter
    site one position to the right. ``on_freeze(k, rho)`` receives the
    single-bin density of the bin whose last collision happens in this step.
    """
    for gate in gates:
        j = gate.pair
        p_b, p_s, p_a = layout.targets(j, n)
        k_b, k_a = layout.target_bins(j, n)
        expected = (SiteKind.photon_bin(k_b), SiteKind.emitter_pair(j), SiteKind.photon_bin(k_a))
        found = (state.kinds[p_b], state.kinds[p_s], state.kinds[p_a])
        if found != expected:
            raise LayoutError(f"step {n}, pair {j}: expected sites {expected}, found {found}")
        if j == 1:
            # the fresh bin is still a product factor, so it moves for free
            state.move_site(p_a, p_s + 1, policy)
            state.apply_gate_adjacent(gate.unitary, p_b, 3, policy, center="left")
            if on_freeze is not None:
                on_freeze(k_b, state.site_densities([p_b])[p_b])
            state.move_site(p_s + 1, p_a, policy)
        else:
            state.apply_gate_routed(gate.unitary, (p_b, p_s, p_a), policy)
    for j in range(layout.pairs, 0, -1):
        state.swap_adjacent(layout.emitter_position(j, n), policy, center="left")


class Simulation:
    """A collision-model run in progress: state, step counter and frozen-bin cache.

    Parameters
    ----------
    params : ModelParams
    initial : str or MatrixProductState
        ``"all_excited"``, ``"symmetric_dicke"`` or a prepared state laid out
        for step 0.
    """

    def __init__(self, params: ModelParams, initial="all_excited"):
        self.params = params
        self.layout = SiteLayout.for_params(params)
        self.gates = build_gates(params)
        if isinstance(initial, MatrixProductState):
            state = initial
        elif initial == "all_excited":
            state = prepare_all_excited(params)
        elif initial == "symmetric_dicke":
            state = prepare_symmetric_dicke(params)
        else:
            raise InputError(f"unknown initial state {initial!r}")
        if len(state) != self.layout.n_sites or state.kinds != self.layout.kinds_at(0):
            raise InputError("initial state does not match the layout for these parameters")
        self.state = state
        self.n = 0
        self.frozen: Dict[int, np.ndarray] = {}
        self.initial_emitters = self._emitter_vector()

    def _emitter_vector(self) -> np.ndarray:
        rho = emitter_density_matrix(self.state)
        w, v = np.linalg.eigh(rho)
        if w[-1] < 1 - 1e-10:
            return None  # mixed emitter state: no survival reference
        return v[:, -1]

    @property
    def t(self) -> float:
        return self.n * self.params.dt

    @property
    def done(self) -> bool:
        return self.n >= self.layout.n_steps

    def _store(self, k: int, rho: np.ndarray) -> None:
        self.frozen[k] = rho

    def advance(self) -> None:
        step(self.state, self.layout, self.gates, self.n, self.params.policy, self._store)
        self.n += 1


def run(params: ModelParams, initial="all_excited", observer=None) -> list:
    """Evolve for ``params.n_steps`` steps; ``observer(sim)`` is called at ``t = 0`` and after every step.

    Returns whatever the observer accumulated in its ``records`` attribute
    (an empty list without observer).
    """
    sim = Simulation(params, initial)
    if observer is not None:
        observer(sim)
    while not sim.done:
        sim.advance()
        if observer is not None:
            observer(sim)
    return list(getattr(observer, "records", []))
