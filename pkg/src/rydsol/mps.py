"""Open-boundary matrix-product states in canonical (B-tensor + Schmidt) form.

Tensors ``B[i]`` have shape (chi_left, 2, chi_right) and are right-isometric;
``schmidt[k]`` holds the Schmidt values of bond k (k = 0..N, trivial at the
edges).  The orthogonality center sits at site 0, so left environments are
``diag(schmidt[i]**2)``.  Physical index 1 means "excited".
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import qr, svd


def _truncated_svd(mat, cutoff: float, chi_max: int):
    """SVD with relative-weight cutoff and hard rank cap.

    Returns (U, s_normalized, Vh, discarded_weight_fraction).
    """
    try:
        u, s, vh = svd(mat, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, s, vh = svd(mat, full_matrices=False, lapack_driver="gesvd")
    total = float(np.sum(s**2))
    if total == 0.0:
        raise FloatingPointError("zero matrix in SVD split")
    keep = s > cutoff * s[0]
    rank = min(int(np.count_nonzero(keep)), chi_max)
    rank = max(rank, 1)
    discarded = float(np.sum(s[rank:] ** 2)) / total
    s = s[:rank]
    s = s / np.linalg.norm(s)
    return u[:, :rank], s, vh[:rank], discarded


class MPS:
    def __init__(self, tensors, schmidt):
        self.tensors = tensors
        self.schmidt = schmidt

    # -- construction -------------------------------------------------------

    @classmethod
    def from_site_tensors(cls, raw, cutoff: float = 1e-12, chi_max: int = 100_000) -> "MPS":
        """Canonicalize an arbitrary list of (chi_l, 2, chi_r) site tensors.

        Left-canonicalizes with QR, then sweeps back with SVDs collecting the
        Schmidt spectrum of every bond; the result is normalized.
        """
        n = len(raw)
        A = [np.asarray(t, dtype=complex) for t in raw]
        if A[0].shape[0] != 1 or A[-1].shape[2] != 1:
            raise ValueError("edge tensors must have trivial outer bonds")
        for i in range(n - 1):
            chi_l, d, chi_r = A[i].shape
            q, r = qr(A[i].reshape(chi_l * d, chi_r), mode="economic")
            A[i] = q.reshape(chi_l, d, -1)
            A[i + 1] = np.tensordot(r, A[i + 1], axes=(1, 0))

        tensors = [None] * n
        schmidt = [np.array([1.0])] * (n + 1)
        M = A[n - 1]
        for i in range(n - 1, 0, -1):
            chi_l, d, chi_r = M.shape
            u, s, vh, _ = _truncated_svd(M.reshape(chi_l, d * chi_r), cutoff, chi_max)
            tensors[i] = vh.reshape(-1, d, chi_r)
            schmidt[i] = s
            M = np.tensordot(A[i - 1], u * s, axes=(2, 0))
        nrm = np.linalg.norm(M)
        tensors[0] = M / nrm
        return cls(tensors, schmidt)

    @classmethod
    def from_statevector(cls, vec, n_sites: int, cutoff: float = 1e-12) -> "MPS":
        tensor = np.asarray(vec, dtype=complex).reshape((1,) + (2,) * n_sites + (1,))
        raw = []
        work = tensor.reshape(1, -1)
        chi_l = 1
        for _ in range(n_sites - 1):
            work = work.reshape(chi_l * 2, -1)
            u, s, vh = svd(work, full_matrices=False)
            keep = s > cutoff * s[0] if s[0] > 0 else s > -1
            u, s, vh = u[:, keep], s[keep], vh[keep]
            raw.append(u.reshape(chi_l, 2, -1))
            work = (s[:, None] * vh)
            chi_l = len(s)
        raw.append(work.reshape(chi_l, 2, 1))
        return cls.from_site_tensors(raw, cutoff=cutoff)

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.tensors], [s.copy() for s in self.schmidt])

    # -- basic queries -------------------------------------------------------

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dimensions(self):
        return [len(s) for s in self.schmidt]

    def norm_squared(self) -> float:
        t = self.tensors[0]
        return float(np.sum(np.abs(t) ** 2))

    def to_statevector(self) -> np.ndarray:
        psi = self.tensors[0]
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=(psi.ndim - 1, 0))
        return psi.reshape(-1)

    def entanglement_entropy(self, cut: int) -> float:
        """Von Neumann entropy (natural log) across bond ``cut`` (1..N-1)."""
        if not 1 <= cut < self.n_sites:
            raise ValueError("cut must satisfy 1 <= cut < n_sites")
        p = self.schmidt[cut] ** 2
        p = p[p > 1e-30]
        return float(-(p * np.log(p)).sum())

    # -- expectation values --------------------------------------------------

    def _left_env(self, site: int) -> np.ndarray:
        return self.schmidt[site] ** 2

    def expect_local(self, op: np.ndarray, first_site: int) -> complex:
        """Expectation of an operator supported on k consecutive sites."""
        op = np.asarray(op, dtype=complex)
        k = op.ndim // 2 if op.ndim > 2 else int(np.log2(op.shape[0]))
        if op.ndim == 2:
            op = op.reshape((2,) * (2 * k))
        # theta tensor with Schmidt-weighted left bond: (a, s_1..s_k, b)
        th = np.diag(self.schmidt[first_site]).astype(complex)
        for j in range(first_site, first_site + k):
            th = np.tensordot(th, self.tensors[j], axes=(th.ndim - 1, 0))
        axes_ket = tuple(range(1, 1 + k))
        axes_op = tuple(range(k, 2 * k))
        oth = np.tensordot(op, th, axes=(axes_op, axes_ket))  # (s'_1..s'_k, a, b)
        oth = np.moveaxis(oth, k, 0)  # (a, s'_1..s'_k, b)
        return complex(
            np.tensordot(th.conj(), oth, axes=(tuple(range(th.ndim)), tuple(range(oth.ndim))))
        )

    def expect_product(self, ops_sites) -> complex:
        """Expectation of a product of non-overlapping local operators.

        ``ops_sites`` is a list of (op_tensor, first_site) with disjoint,
        ascending supports; each op given as (2,)*2k tensor or 2^k matrix.
        """
        items = []
        for op, site in sorted(ops_sites, key=lambda x: x[1]):
            op = np.asarray(op, dtype=complex)
            k = op.ndim // 2 if op.ndim > 2 else int(np.log2(op.shape[0]))
            if op.ndim == 2:
                op = op.reshape((2,) * (2 * k))
            items.append((op, site, k))
        for (op1, s1, k1), (_, s2, _) in zip(items, items[1:]):
            if s1 + k1 > s2:
                raise ValueError("operator supports overlap")
        j = items[0][1]
        env = np.diag(self._left_env(j)).astype(complex)  # (a, abar)
        for op, site, k in items:
            while j < site:  # identity sites
                B = self.tensors[j]
                env = np.einsum("ab,asc,bsd->cd", env, B, B.conj(), optimize=True)
                j += 1
            # contract the k ket tensors under the operator: (a, s'_1..s'_k, b)
            ket = self.tensors[site]
            for m in range(1, k):
                ket = np.tensordot(ket, self.tensors[site + m], axes=(ket.ndim - 1, 0))
            oket = np.tensordot(op, ket, axes=(tuple(range(k, 2 * k)), tuple(range(1, k + 1))))
            oket = np.moveaxis(oket, k, 0)
            env = np.einsum(
                oket, [0] + list(range(2, 2 + k)) + [2 + k],
                ket.conj(), [1] + list(range(2, 2 + k)) + [3 + k],
                env, [0, 1],
                [2 + k, 3 + k],
                optimize=True,
            )
            j = site + k
        return complex(np.trace(env))

    def expect_number(self) -> np.ndarray:
        """Per-site excitation density <n_i>."""
        n = self.n_sites
        out = np.empty(n)
        num = np.diag([0.0, 1.0])
        for i in range(n):
            B = self.tensors[i]
            w = self._left_env(i)
            out[i] = np.einsum("a,asb,st,atb->", w, B, num, B.conj(), optimize=True).real
        return out

    def overlap(self, other: "MPS") -> complex:
        """<other|self>."""
        if other.n_sites != self.n_sites:
            raise ValueError("size mismatch")
        env = np.ones((1, 1), dtype=complex)
        for a, b in zip(self.tensors, other.tensors):
            env = np.einsum("ab,asc,bsd->cd", env, a, b.conj(), optimize=True)
        return complex(env[0, 0])

    def subsystem_fidelity(self, target: "MPS", region) -> float:
        """Tr(rho_A(self) rho_A(target)) for a contiguous region A.

        ``region`` is (first_site, last_site), inclusive, 0-based.  Computed
        by a four-layer transfer contraction; reduced density matrices are
        never materialized.  Equals |<target|self>|^2 when A is everything.
        """
        a, b = region
        if not (0 <= a <= b < self.n_sites) or target.n_sites != self.n_sites:
            raise ValueError("invalid region")
        lp = self._left_env(a)
        lq = target._left_env(a)
        # M[(alpha, alphabar, gamma, gammabar)]: diagonal left environments
        M = np.einsum("ab,cd->abcd", np.diag(lp).astype(complex), np.diag(lq).astype(complex))
        for j in range(a, b + 1):
            P = self.tensors[j]
            Q = target.tensors[j]
            # s couples self-ket with target-bra; t couples self-bra with target-ket
            M = np.einsum(
                "abcd,ase,btf,ctg,dsh->efgh", M, P, P.conj(), Q, Q.conj(), optimize=True
            )
        return float(np.einsum("aacc->", M).real)

    # -- superposition -------------------------------------------------------

    @classmethod
    def superpose(cls, states, weights, cutoff: float = 1e-12, chi_max: int = 100_000) -> "MPS":
        """Weighted sum of MPS via bond direct sums, then recanonicalization.

        Weights apply to the states as given (they are not renormalized);
        the returned state is normalized.
        """
        n = states[0].n_sites
        raw = []
        for i in range(n):
            parts = [s.tensors[i] for s in states]
            if i == 0:
                parts = [w * p for w, p in zip(weights, parts)]
                raw.append(np.concatenate(parts, axis=2))
            elif i == n - 1:
                raw.append(np.concatenate(parts, axis=0))
            else:
                chi_l = sum(p.shape[0] for p in parts)
                chi_r = sum(p.shape[2] for p in parts)
                block = np.zeros((chi_l, 2, chi_r), dtype=complex)
                ol = orr = 0
                for p in parts:
                    block[ol : ol + p.shape[0], :, orr : orr + p.shape[2]] = p
                    ol += p.shape[0]
                    orr += p.shape[2]
                raw.append(block)
        return cls.from_site_tensors(raw, cutoff=cutoff, chi_max=chi_max)

    # -- gates ----------------------------------------------------------------

    def apply_gate(self, gate: np.ndarray, first_site: int, cutoff: float, chi_max: int) -> float:
        """Apply a 2- or 3-site gate; returns the discarded Schmidt weight."""
        k = int(round(np.log2(gate.shape[0])))
        if k == 3:
            return self._apply_gate3(gate, first_site, cutoff, chi_max)
        if k == 2:
            return self._apply_gate2(gate, first_site, cutoff, chi_max)
        raise ValueError("only 2- and 3-site gates are supported")

    def _apply_gate3(self, gate, i, cutoff, chi_max) -> float:
        B1, B2, B3 = self.tensors[i], self.tensors[i + 1], self.tensors[i + 2]
        lam = self.schmidt[i]
        thp = np.tensordot(B1, B2, axes=(2, 0))
        thp = np.tensordot(thp, B3, axes=(3, 0))  # (a,s1,s2,s3,d)
        g = gate.reshape(2, 2, 2, 2, 2, 2)
        thp = np.einsum("uvwstx,astxd->auvwd", g, thp, optimize=True)
        a, _, _, _, d = thp.shape
        th = lam[:, None, None, None, None] * thp

        u1, s1, v1, disc1 = _truncated_svd(th.reshape(a * 4, 2 * d), cutoff, chi_max)
        chi2 = len(s1)
        newB3 = v1.reshape(chi2, 2, d)
        x = (u1 * s1).reshape(a * 2, 2 * chi2)
        u2, s2, v2, disc2 = _truncated_svd(x, cutoff, chi_max)
        chi1 = len(s2)
        newB2 = v2.reshape(chi1, 2, chi2)

        # project the un-weighted theta onto the new right basis (avoids
        # dividing by small Schmidt values)
        t = np.tensordot(thp, newB3.conj(), axes=([3, 4], [1, 2]))  # (a,s1,s2,chi2)
        newB1 = np.tensordot(t, newB2.conj(), axes=([2, 3], [1, 2]))  # (a,s1,chi1)

        # renormalize against truncation loss
        w = lam**2
        nrm2 = np.einsum("a,asb,asb->", w, newB1, newB1.conj(), optimize=True).real
        newB1 = newB1 / np.sqrt(nrm2)

        self.tensors[i] = newB1
        self.tensors[i + 1] = newB2
        self.tensors[i + 2] = newB3
        self.schmidt[i + 1] = s2
        self.schmidt[i + 2] = s1
        return disc1 + disc2

    def _apply_gate2(self, gate, i, cutoff, chi_max) -> float:
        B1, B2 = self.tensors[i], self.tensors[i + 1]
        lam = self.schmidt[i]
        thp = np.tensordot(B1, B2, axes=(2, 0))  # (a,s1,s2,d)
        g = gate.reshape(2, 2, 2, 2)
        thp = np.einsum("uvst,astd->auvd", g, thp, optimize=True)
        a, _, _, d = thp.shape
        th = lam[:, None, None, None] * thp
        u1, s1, v1, disc = _truncated_svd(th.reshape(a * 2, 2 * d), cutoff, chi_max)
        chi1 = len(s1)
        newB2 = v1.reshape(chi1, 2, d)
        newB1 = np.tensordot(thp, newB2.conj(), axes=([2, 3], [1, 2]))
        w = lam**2
        nrm2 = np.einsum("a,asb,asb->", w, newB1, newB1.conj(), optimize=True).real
        newB1 = newB1 / np.sqrt(nrm2)
        self.tensors[i] = newB1
        self.tensors[i + 1] = newB2
        self.schmidt[i + 1] = s1
        return disc
