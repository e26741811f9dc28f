"""Matrix product states for the joint emitter and field chain.

Site tensors carry legs ``(left bond, physical, right bond)``. Bond ``b`` joins
sites ``b`` and ``b + 1``. The state keeps a single orthogonality center:
tensors to its left are left isometries and tensors to its right are right
isometries, so the squared norm is the squared norm of the center tensor.

When every site carries a definite conserved charge per basis state (here
the excitation number), each bond index is labelled by the charge to its
left and all SVDs and QRs run block by block. Tensors stay dense; the labels
only select blocks. States without charge information use dense kernels.

Truncations never renormalize the state. The relative weights dropped by
every SVD are summed into ``cumulative_discarded``, which bounds the norm loss
(``norm_sq >= 1 - cumulative_discarded``). Expectation values divide by the
current squared norm.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence

import numpy as np

from .errors import ContractViolation, DimensionError, InputError
from .tensor_core import TruncationPolicy, qr_labeled, svd_truncate


class SiteRole(enum.IntEnum):
    EMITTER_PAIR = 0
    PHOTON_BIN = 1


@dataclass(frozen=True)
class SiteKind:
    """What a chain site holds.

    For an emitter pair ``index`` is the pair number ``j`` (1-based), hosting
    emitters ``j`` and ``N + 1 - j``. For a photon bin it is the bin time index.
    """

    role: SiteRole
    index: int

    @classmethod
    def emitter_pair(cls, j: int) -> "SiteKind":
        return cls(SiteRole.EMITTER_PAIR, int(j))

    @classmethod
    def photon_bin(cls, n: int) -> "SiteKind":
        return cls(SiteRole.PHOTON_BIN, int(n))

    @property
    def is_emitter(self) -> bool:
        return self.role is SiteRole.EMITTER_PAIR

    def __repr__(self):
        return f"S{self.index}" if self.is_emitter else f"b{self.index}"


def _transfer_from_left(env: np.ndarray, a: np.ndarray) -> np.ndarray:
    # env[a, a'] (ket, bra) -> env[b, b']
    t = np.tensordot(env, a, axes=(0, 0))
    return np.tensordot(t, a.conj(), axes=([0, 1], [0, 1]))


def _transfer_from_right(env: np.ndarray, a: np.ndarray) -> np.ndarray:
    # env[b, b'] (ket, bra) -> env[a, a']
    t = np.tensordot(a, env, axes=(2, 0))
    return np.tensordot(t, a.conj(), axes=([1, 2], [1, 2]))


def _site_value(a: np.ndarray, op: np.ndarray, left: np.ndarray | None, right: np.ndarray | None) -> complex:
    oa = np.tensordot(op, a, axes=(1, 1)).transpose(1, 0, 2)  # (l, s, r)
    if left is not None:
        oa = np.tensordot(left.T, oa, axes=(1, 0))  # bra index now leads
    if right is not None:
        oa = np.tensordot(oa, right, axes=(2, 0))
    return complex(np.vdot(a, oa))


def _fuse_left(left: np.ndarray, *charges: np.ndarray) -> np.ndarray:
    # labels of the row index (a, s1, ..., sk): charge left of the cut
    out = left
    for c in charges:
        out = np.add.outer(out, c).ravel()
    return out


def _fuse_right(right: np.ndarray, *charges: np.ndarray) -> np.ndarray:
    # labels of the column index (s1, ..., sk, c): charge left of the cut
    out = np.zeros(1, dtype=np.int64)
    for c in charges:
        out = np.add.outer(out, -np.asarray(c)).ravel()
    return np.add.outer(out, right).ravel()


class MatrixProductState:
    """Open-boundary MPS with mixed physical dimensions and a tracked center.

    ``site_charges`` (optional) gives the conserved charge of every basis
    state of every site; bond labels are then inferred from the tensors and
    kept up to date by every operation.
    """

    def __init__(
        self,
        tensors: Sequence[np.ndarray],
        kinds: Sequence[SiteKind],
        center: int = 0,
        cumulative_discarded: float = 0.0,
        site_charges: Sequence[np.ndarray] | None = None,
    ):
        tensors = [np.asarray(t, dtype=np.complex128) for t in tensors]
        kinds = list(kinds)
        if len(tensors) != len(kinds) or not tensors:
            raise DimensionError("need one kind per site and at least one site")
        for i, t in enumerate(tensors):
            if t.ndim != 3:
                raise DimensionError(f"site {i} has rank {t.ndim}, expected 3")
            if i and tensors[i - 1].shape[2] != t.shape[0]:
                raise DimensionError(f"bond {i - 1} extents differ: {tensors[i - 1].shape[2]} vs {t.shape[0]}")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise DimensionError("boundary bonds must have extent 1")
        if not 0 <= center < len(tensors):
            raise IndexError(f"center {center} outside chain of {len(tensors)} sites")
        self.tensors: List[np.ndarray] = tensors
        self.kinds: List[SiteKind] = kinds
        self.center = int(center)
        self.cumulative_discarded = float(cumulative_discarded)
        self.charges: List[np.ndarray] | None = None
        self.labels: List[np.ndarray] | None = None
        if site_charges is not None:
            self.assign_charges(site_charges)

    def assign_charges(self, site_charges: Sequence[np.ndarray], tol: float = 1e-12) -> bool:
        """Attach per-site charges and infer bond labels; False if the state has no definite charge."""
        charges = [np.asarray(c, dtype=np.int64) for c in site_charges]
        if len(charges) != len(self) or any(c.shape != (t.shape[1],) for c, t in zip(charges, self.tensors)):
            raise DimensionError("need one charge per basis state of every site")
        labels = [np.zeros(1, dtype=np.int64)]
        for t, c in zip(self.tensors, charges):
            fused = _fuse_left(labels[-1], c)
            mag = np.abs(t.reshape(-1, t.shape[2]))
            scale = mag.max() if mag.size else 0.0
            lab = fused[np.argmax(mag, axis=0)]
            if scale > 0 and np.max(np.where(fused[:, None] != lab[None, :], mag, 0.0)) > tol * scale:
                self.charges = self.labels = None
                return False
            labels.append(lab)
        self.charges, self.labels = charges, labels
        return True

    @property
    def total_charge(self) -> int | None:
        return None if self.labels is None else int(self.labels[-1][0])

    # -- bookkeeping --------------------------------------------------------

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> List[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> List[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> "MatrixProductState":
        """Independent copy. Tensors are shared until replaced, never mutated in place."""
        out = MatrixProductState(list(self.tensors), list(self.kinds), self.center, self.cumulative_discarded)
        if self.labels is not None:
            out.charges, out.labels = list(self.charges), list(self.labels)
        return out

    def position(self, kind: SiteKind) -> int:
        return self.kinds.index(kind)

    def emitter_positions(self) -> List[int]:
        """Chain positions of the emitter-pair sites, ordered by pair index."""
        found = [(k.index, i) for i, k in enumerate(self.kinds) if k.is_emitter]
        return [i for _, i in sorted(found)]

    def norm_sq(self) -> float:
        c = self.tensors[self.center]
        return float(np.vdot(c, c).real)

    def isometry_error(self) -> float:
        """Largest deviation from the left/right isometry conditions around the center."""
        err = 0.0
        for i, t in enumerate(self.tensors):
            if i < self.center:
                m = t.reshape(-1, t.shape[2])
                err = max(err, float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1])))))
            elif i > self.center:
                m = t.reshape(t.shape[0], -1)
                err = max(err, float(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0])))))
        return err

    # -- gauge moves ---------------------------------------------------------

    def move_center(self, k: int) -> None:
        """Shift the orthogonality center to site ``k`` with QR sweeps (no truncation)."""
        if not 0 <= k < len(self):
            raise IndexError(f"site {k} outside chain of {len(self)} sites")
        ts = self.tensors
        lab = self.labels
        while self.center < k:
            c = self.center
            l, d, r = ts[c].shape
            if lab is None:
                q, rr, new = *np.linalg.qr(ts[c].reshape(l * d, r)), None
            else:
                q, rr, new = qr_labeled(ts[c].reshape(l * d, r), _fuse_left(lab[c], self.charges[c]), lab[c + 1])
                lab[c + 1] = new
            ts[c] = q.reshape(l, d, q.shape[1])
            ts[c + 1] = np.tensordot(rr, ts[c + 1], axes=(1, 0))
            self.center = c + 1
        while self.center > k:
            c = self.center
            l, d, r = ts[c].shape
            if lab is None:
                q, rr = np.linalg.qr(ts[c].reshape(l, d * r).T)
            else:
                q, rr, new = qr_labeled(ts[c].reshape(l, d * r).T, _fuse_right(lab[c + 1], self.charges[c]), lab[c])
                lab[c] = new
            ts[c] = q.T.reshape(q.shape[1], d, r)
            ts[c - 1] = np.tensordot(ts[c - 1], rr.T, axes=(2, 0))
            self.center = c - 1

    def _center_into(self, lo: int, hi: int) -> None:
        if self.center < lo:
            self.move_center(lo)
        elif self.center > hi:
            self.move_center(hi)

    # -- local updates --------------------------------------------------------

    def swap_adjacent(self, i: int, policy: TruncationPolicy | None = None, center: str = "right") -> float:
        """Exchange the contents of sites ``i`` and ``i + 1``.

        The global state is unchanged up to truncation; kinds and physical
        dimensions move with the contents. ``center`` selects which of the two
        sites holds the orthogonality center afterwards. Returns the discarded
        weight of the split.
        """
        if not 0 <= i < len(self) - 1:
            raise IndexError(f"cannot swap sites {i} and {i + 1} in a chain of {len(self)}")
        policy = policy or TruncationPolicy.exact()
        self._center_into(i, i + 1)
        theta = np.tensordot(self.tensors[i], self.tensors[i + 1], axes=(2, 0))
        l, d1, d2, r = theta.shape
        mat = theta.transpose(0, 2, 1, 3).reshape(l * d2, d1 * r)
        if self.labels is None:
            res = svd_truncate(mat, policy)
        else:
            ch = self.charges
            rows = _fuse_left(self.labels[i], ch[i + 1])
            cols = _fuse_right(self.labels[i + 2], ch[i])
            res = svd_truncate(mat, policy, rows, cols)
            self.labels[i + 1] = res.labels
            ch[i], ch[i + 1] = ch[i + 1], ch[i]
        k = res.rank
        if center == "left":
            self.tensors[i] = (res.left_isometry * res.singular_values).reshape(l, d2, k)
            self.tensors[i + 1] = res.right_isometry.reshape(k, d1, r)
            self.center = i
        else:
            self.tensors[i] = res.left_isometry.reshape(l, d2, k)
            self.tensors[i + 1] = (res.singular_values[:, None] * res.right_isometry).reshape(k, d1, r)
            self.center = i + 1
        self.kinds[i], self.kinds[i + 1] = self.kinds[i + 1], self.kinds[i]
        self.cumulative_discarded += res.discarded_weight
        return res.discarded_weight

    def apply_gate_adjacent(
        self,
        gate: np.ndarray,
        i: int,
        span: int,
        policy: TruncationPolicy | None = None,
        center: str = "right",
    ) -> float:
        """Apply a ``span``-site gate to sites ``i .. i + span - 1``.

        ``gate`` is a ``(D, D)`` matrix whose row/column index runs over the
        spanned physical indices in chain order (first site most significant).
        Unitarity is not re-checked here. Returns the total discarded weight.
        """
        if span < 1 or i < 0 or i + span > len(self):
            raise IndexError(f"gate block [{i}, {i + span}) outside chain of {len(self)}")
        dims = [self.tensors[i + q].shape[1] for q in range(span)]
        dim = int(np.prod(dims))
        gate = np.asarray(gate)
        if gate.shape != (dim, dim):
            raise DimensionError(f"gate shape {gate.shape} does not match block dimension {dim}")
        policy = policy or TruncationPolicy.exact()
        self._center_into(i, i + span - 1)
        theta = self.tensors[i]
        for q in range(1, span):
            theta = np.tensordot(theta, self.tensors[i + q], axes=(theta.ndim - 1, 0))
        l, r = theta.shape[0], theta.shape[-1]
        theta = np.tensordot(gate, theta.reshape(l, dim, r), axes=(1, 1)).transpose(1, 0, 2)
        return self._split_block(theta, i, dims, policy, center)

    def _split_block(self, theta, i, dims, policy, center) -> float:
        l, _, r = theta.shape
        span = len(dims)
        discarded = 0.0
        lab, ch = self.labels, self.charges

        def split(mat, rows, cols):
            if lab is None:
                return svd_truncate(mat, policy)
            return svd_truncate(mat, policy, rows(), cols())

        if center == "left":
            rest = theta.reshape(l * int(np.prod(dims)), r)
            right_dim = r
            right_lab = None if lab is None else lab[i + span]
            for q in range(span - 1, 0, -1):
                d = dims[q]
                res = split(
                    rest.reshape(-1, d * right_dim),
                    lambda: _fuse_left(lab[i], *ch[i : i + q]),
                    lambda: _fuse_right(right_lab, ch[i + q]),
                )
                if lab is not None:
                    lab[i + q] = right_lab = res.labels
                k = res.rank
                self.tensors[i + q] = res.right_isometry.reshape(k, d, right_dim)
                rest = res.left_isometry * res.singular_values
                right_dim = k
                discarded += res.discarded_weight
            self.tensors[i] = rest.reshape(l, dims[0], right_dim)
            self.center = i
        else:
            rest = theta.reshape(l, -1)
            left_dim = l
            left_lab = None if lab is None else lab[i]
            for q in range(span - 1):
                d = dims[q]
                res = split(
                    rest.reshape(left_dim * d, -1),
                    lambda: _fuse_left(left_lab, ch[i + q]),
                    lambda: _fuse_right(lab[i + span], *ch[i + q + 1 : i + span]),
                )
                if lab is not None:
                    lab[i + q + 1] = left_lab = res.labels
                k = res.rank
                self.tensors[i + q] = res.left_isometry.reshape(left_dim, d, k)
                rest = res.singular_values[:, None] * res.right_isometry
                left_dim = k
                discarded += res.discarded_weight
            self.tensors[i + span - 1] = rest.reshape(left_dim, dims[-1], r)
            self.center = i + span - 1
        self.cumulative_discarded += discarded
        return discarded

    def is_isolated(self, i: int) -> bool:
        """True when site ``i`` is an unentangled tensor factor of the state."""
        t = self.tensors[i]
        return t.shape[0] == 1 and t.shape[2] == 1

    def relocate_product_site(self, src: int, dst: int) -> None:
        """Move an isolated site from ``src`` to final position ``dst`` exactly.

        Equivalent to the chain of adjacent swaps between the two positions:
        the site is re-inserted as ``identity (x) vector`` on the local bond.
        """
        if not self.is_isolated(src):
            raise ContractViolation(f"site {src} is entangled with the rest of the chain")
        if not 0 <= dst < len(self):
            raise IndexError(f"destination {dst} outside chain of {len(self)}")
        if src == dst:
            return
        if self.center == src:
            self.move_center(src + 1 if src + 1 < len(self) else src - 1)
        vec = self.tensors[src].reshape(-1)
        kind = self.kinds[src]
        del self.tensors[src]
        del self.kinds[src]
        if self.center > src:
            self.center -= 1
        chi = self.tensors[dst - 1].shape[2] if dst > 0 else 1
        site = np.einsum("ab,s->asb", np.eye(chi, dtype=np.complex128), vec)
        self.tensors.insert(dst, site)
        self.kinds.insert(dst, kind)
        if self.center >= dst:
            self.center += 1
        if self.labels is not None:
            lab = self.labels
            q = int(lab[src + 1][0] - lab[src][0])
            self.charges.insert(dst, self.charges.pop(src))
            del lab[src + 1]
            if q:
                for b in range(src + 1, len(lab)):
                    lab[b] = lab[b] - q
            lab.insert(dst + 1, lab[dst] + q)
            if q:
                for b in range(dst + 2, len(lab)):
                    lab[b] = lab[b] + q

    def move_site(self, src: int, dst: int, policy: TruncationPolicy | None = None) -> None:
        """Carry the contents of ``src`` to position ``dst`` through adjacent swaps."""
        if src == dst:
            return
        if self.is_isolated(src):
            self.relocate_product_site(src, dst)
            return
        self._center_into(src, src)
        p = src
        while p < dst:
            self.swap_adjacent(p, policy, center="right")
            p += 1
        while p > dst:
            self.swap_adjacent(p - 1, policy, center="left")
            p -= 1

    def apply_gate_routed(
        self, gate: np.ndarray, targets: Sequence[int], policy: TruncationPolicy | None = None
    ) -> float:
        """Apply ``gate`` to arbitrary distinct sites, restoring their positions after.

        The gate's legs follow the order of ``targets``. Targets are brought
        next to the middle one with swaps, the gate acts on the contiguous
        block, and every moved site is swapped back. Returns the discarded
        weight accumulated by the whole operation.
        """
        targets = [int(t) for t in targets]
        k = len(targets)
        if len(set(targets)) != k:
            raise ContractViolation(f"gate targets must be distinct, got {targets}")
        for t in targets:
            if not 0 <= t < len(self):
                raise IndexError(f"target {t} outside chain of {len(self)}")
        before = self.cumulative_discarded
        dims = [self.tensors[t].shape[1] for t in targets]
        order = sorted(range(k), key=lambda q: targets[q])
        pos = [targets[q] for q in order]
        m = k // 2
        anchor = pos[m]
        moves = []
        for idx in range(m - 1, -1, -1):
            dst = anchor - (m - idx)
            if pos[idx] != dst:
                self.move_site(pos[idx], dst, policy)
                moves.append((dst, pos[idx]))
        for idx in range(m + 1, k):
            dst = anchor + (idx - m)
            if pos[idx] != dst:
                self.move_site(pos[idx], dst, policy)
                moves.append((dst, pos[idx]))

        g = np.asarray(gate).reshape(dims + dims)
        perm = list(order) + [k + q for q in order]
        g = g.transpose(perm).reshape(gate.shape)
        end = "right" if moves and moves[-1][1] > anchor else "left"
        self.apply_gate_adjacent(g, anchor - m, k, policy, center=end)
        for here, home in reversed(moves):
            self.move_site(here, home, policy)
        return self.cumulative_discarded - before

    # -- read-only measurements ----------------------------------------------

    def bond_spectrum(self, b: int) -> np.ndarray:
        """Normalized squared Schmidt coefficients across bond ``b`` (descending)."""
        if not 0 <= b < len(self) - 1:
            raise IndexError(f"bond {b} outside chain of {len(self)}")
        c = self.center
        if b >= c:
            env = np.eye(self.tensors[c].shape[0], dtype=np.complex128)
            for s in range(c, b + 1):
                env = _transfer_from_left(env, self.tensors[s])
        else:
            env = np.eye(self.tensors[c].shape[2], dtype=np.complex128)
            for s in range(c, b, -1):
                env = _transfer_from_right(env, self.tensors[s])
        w = np.clip(np.linalg.eigvalsh(0.5 * (env + env.conj().T)), 0.0, None)
        total = w.sum()
        return np.sort(w / total)[::-1] if total > 0 else w

    def bond_entropy(self, b: int) -> float:
        """Von Neumann entanglement entropy (bits) across bond ``b``."""
        return entropy_bits(self.bond_spectrum(b))

    def local_expectation(self, site: int, op: np.ndarray) -> complex:
        return self.local_expectations({site: [op]})[site][0]

    def local_expectations(self, ops: Mapping[int, Sequence[np.ndarray]]) -> Dict[int, List[complex]]:
        """Expectation values of single-site operators, all in one sweep from the center."""
        for site, group in ops.items():
            d = self.tensors[site].shape[1]
            for op in group:
                if np.shape(op) != (d, d):
                    raise DimensionError(f"operator of shape {np.shape(op)} on site {site} of dimension {d}")
        c = self.center
        norm = self.norm_sq()
        out: Dict[int, List[complex]] = {}
        if c in ops:
            out[c] = [_site_value(self.tensors[c], op, None, None) / norm for op in ops[c]]
        left_sites = [s for s in ops if s < c]
        if left_sites:
            env = np.eye(self.tensors[c].shape[2], dtype=np.complex128)
            lo = min(left_sites)
            for s in range(c, lo, -1):
                env = _transfer_from_right(env, self.tensors[s])
                if s - 1 in ops:
                    out[s - 1] = [_site_value(self.tensors[s - 1], op, None, env) / norm for op in ops[s - 1]]
        right_sites = [s for s in ops if s > c]
        if right_sites:
            env = np.eye(self.tensors[c].shape[0], dtype=np.complex128)
            hi = max(right_sites)
            for s in range(c, hi):
                env = _transfer_from_left(env, self.tensors[s])
                if s + 1 in ops:
                    out[s + 1] = [_site_value(self.tensors[s + 1], op, env, None) / norm for op in ops[s + 1]]
        return out

    def site_densities(self, sites: Iterable[int]) -> Dict[int, np.ndarray]:
        """Single-site reduced density matrices (unit trace) for many sites in one sweep."""
        sites = sorted(set(int(s) for s in sites))
        c = self.center
        norm = self.norm_sq()
        out: Dict[int, np.ndarray] = {}

        def finish(rho):
            return 0.5 * (rho + rho.conj().T) / norm

        if c in sites:
            a = self.tensors[c]
            out[c] = finish(np.tensordot(a, a.conj(), axes=([0, 2], [0, 2])))
        left = [s for s in sites if s < c]
        if left:
            env = np.eye(self.tensors[c].shape[2], dtype=np.complex128)
            wanted = set(left)
            for s in range(c, left[0], -1):
                env = _transfer_from_right(env, self.tensors[s])
                if s - 1 in wanted:
                    a = self.tensors[s - 1]
                    t = np.tensordot(a, env, axes=(2, 0))  # (a, s, b')
                    out[s - 1] = finish(np.tensordot(t, a.conj(), axes=([0, 2], [0, 2])))
        right = [s for s in sites if s > c]
        if right:
            env = np.eye(self.tensors[c].shape[0], dtype=np.complex128)
            wanted = set(right)
            for s in range(c, right[-1]):
                env = _transfer_from_left(env, self.tensors[s])
                if s + 1 in wanted:
                    a = self.tensors[s + 1]
                    t = np.tensordot(env, a, axes=(0, 0))  # (a', s, b)
                    out[s + 1] = finish(np.tensordot(t, a.conj(), axes=([0, 2], [0, 2])))
        return out

    def reduced_density_matrix(self, sites: Iterable[int]) -> np.ndarray:
        """Unit-trace density matrix of ``sites`` (chain order, first site most significant)."""
        sites = sorted(set(int(s) for s in sites))
        if not sites:
            raise ValueError("need at least one site")
        wanted = set(sites)
        c = self.center
        lo, hi = min(sites[0], c), max(sites[-1], c)
        chi = self.tensors[lo].shape[0]
        env = np.eye(chi, dtype=np.complex128).reshape(1, 1, chi, chi)
        for s in range(lo, hi + 1):
            a = self.tensors[s]
            t = np.tensordot(env, a, axes=(2, 0))  # (K, K', a', s, b)
            if s in wanted:
                t = np.tensordot(t, a.conj(), axes=(2, 0))  # (K, K', s, b, s', b')
                kk, kb, d, r = t.shape[0], t.shape[1], t.shape[2], t.shape[3]
                env = t.transpose(0, 2, 1, 4, 3, 5).reshape(kk * d, kb * d, r, r)
            else:
                env = np.tensordot(t, a.conj(), axes=([2, 3], [0, 1]))
        rho = np.einsum("ijbb->ij", env)
        rho = 0.5 * (rho + rho.conj().T)
        return rho / np.trace(rho).real

    def to_dense(self) -> np.ndarray:
        """Full state vector in chain order (first site most significant). Small chains only."""
        psi = self.tensors[0]
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=(psi.ndim - 1, 0))
        return psi.reshape(-1)


def entropy_bits(probabilities: np.ndarray) -> float:
    p = np.asarray(probabilities, dtype=float)
    p = p[p > 1e-300]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def product_state(
    local_vectors: Sequence[np.ndarray], kinds: Sequence[SiteKind], site_charges: Sequence[np.ndarray] | None = None
) -> MatrixProductState:
    """Bond-dimension-one MPS from normalized local vectors; center at site 0."""
    tensors = []
    for i, v in enumerate(local_vectors):
        v = np.asarray(v, dtype=np.complex128).reshape(-1)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise InputError(f"local vector {i} has norm {np.linalg.norm(v):.15f}, expected 1")
        tensors.append(v.reshape(1, -1, 1))
    return MatrixProductState(tensors, kinds, center=0, site_charges=site_charges)


def emitter_density_matrix(state: MatrixProductState) -> np.ndarray:
    """Reduced density matrix of all emitters, ordered 1..N (emitter 1 most significant).

    Photon bins are traced out by transfer contraction; the state is not
    modified. Emitter-pair sites padded beyond four levels are restricted to
    their two-qubit subspace.
    """
    positions = state.emitter_positions()
    pairs = len(positions)
    n = 2 * pairs
    chain = sorted(positions)
    rho = state.reduced_density_matrix(chain)
    dims = [state.tensors[p].shape[1] for p in chain]
    rho = rho.reshape(dims + dims)
    rho = rho[tuple([slice(0, 4)] * (2 * pairs))]
    rho = rho.reshape([2] * (4 * pairs))
    # axis 2*q holds emitter j, axis 2*q + 1 emitter N + 1 - j, for the q-th site in chain order
    axis_of = {}
    for q, p in enumerate(chain):
        j = state.kinds[p].index
        axis_of[j] = 2 * q
        axis_of[n + 1 - j] = 2 * q + 1
    ket = [axis_of[e] for e in range(1, n + 1)]
    perm = ket + [2 * pairs + a for a in ket]
    rho = rho.transpose(perm).reshape(2**n, 2**n)
    return rho / np.trace(rho).real


# -- checkpoint format ------------------------------------------------------------

_MAGIC = b"WGMPS"
_VERSION = 1


def save_checkpoint(state: MatrixProductState, path) -> None:
    """Binary dump: header, per-site metadata, then little-endian complex128 blocks."""
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIId", _VERSION, len(state), state.center, state.cumulative_discarded))
        for kind, d in zip(state.kinds, state.phys_dims):
            fh.write(struct.pack("<BqI", int(kind.role), kind.index, d))
        for t in state.tensors:
            fh.write(struct.pack("<III", *t.shape))
            fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())


def load_checkpoint(path) -> MatrixProductState:
    with open(Path(path), "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise InputError(f"{path} is not a checkpoint file")
        version, n_sites, center, discarded = struct.unpack("<IIId", fh.read(struct.calcsize("<IIId")))
        if version != _VERSION:
            raise InputError(f"unsupported checkpoint version {version}")
        kinds, dims = [], []
        for _ in range(n_sites):
            role, index, d = struct.unpack("<BqI", fh.read(struct.calcsize("<BqI")))
            kinds.append(SiteKind(SiteRole(role), index))
            dims.append(d)
        tensors = []
        for i in range(n_sites):
            shape = struct.unpack("<III", fh.read(12))
            if shape[1] != dims[i]:
                raise InputError(f"site {i}: tensor extent {shape[1]} disagrees with header {dims[i]}")
            count = int(np.prod(shape))
            data = np.frombuffer(fh.read(16 * count), dtype="<c16").astype(np.complex128)
            tensors.append(data.reshape(shape))
    return MatrixProductState(tensors, kinds, center, discarded)
