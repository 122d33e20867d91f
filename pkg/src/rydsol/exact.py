"""Sparse operators, Krylov propagation and full spectra on constrained bases."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .basis import CapacityError, ConstrainedBasis

DEFAULT_DENSE_LIMIT = 20_000


class KrylovError(RuntimeError):
    """Raised when the adaptive Krylov propagator fails to converge."""


def _flip_pairs(basis: ConstrainedBasis, site: int):
    """Index pairs (ground, excited) connected by the flip term at ``site``.

    The term acts only when every site within the blockade radius of
    ``site`` is in the ground state; missing neighbours of an open chain
    count as ground (boundary projectors are identity).
    """
    n = basis.n_sites
    rule = basis.rule
    neighbor_mask = 0
    for r in range(1, rule.radius + 1):
        for j in (site - r, site + r):
            if 0 <= j < n:
                neighbor_mask |= 1 << j
            elif rule.boundary == "periodic":
                neighbor_mask |= 1 << (j % n)
    bit = np.uint64(1 << site)
    nm = np.uint64(neighbor_mask)

    configs = basis.configs
    down = (configs & bit) == 0
    clear = (configs & nm) == 0
    src = np.nonzero(down & clear)[0]
    partners = configs[src] | bit
    dst = np.searchsorted(configs, partners)
    return src, dst.astype(np.int64)


def build_site_term(basis: ConstrainedBasis, site: int) -> sp.csr_matrix:
    """Sparse projected flip term at one site (the local energy density)."""
    src, dst = _flip_pairs(basis, site)
    dim = basis.dimension
    data = np.ones(len(src))
    h = sp.coo_matrix((data, (dst, src)), shape=(dim, dim))
    return (h + h.T).tocsr()


def build_hamiltonian(basis: ConstrainedBasis, max_dimension: int = 1 << 26) -> sp.csr_matrix:
    """Projected-flip Hamiltonian: sum of the per-site terms, all couplings 1."""
    if basis.dimension > max_dimension:
        raise CapacityError(f"dimension {basis.dimension} exceeds cap {max_dimension}")
    rows, cols = [], []
    for site in range(basis.n_sites):
        src, dst = _flip_pairs(basis, site)
        rows.append(dst)
        cols.append(src)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.ones(len(rows))
    dim = basis.dimension
    h = sp.coo_matrix((data, (rows, cols)), shape=(dim, dim))
    return (h + h.T).tocsr()


def build_chirality(basis: ConstrainedBasis) -> sp.csr_matrix:
    """Diagonal product of single-site Z with eigenvalue +1 on excited sites."""
    occ = basis.occupations().sum(axis=1)
    signs = np.where((basis.n_sites - occ) % 2 == 0, 1.0, -1.0)
    return sp.diags(signs).tocsr()


def _permutation(basis: ConstrainedBasis, mapped_masks: np.ndarray) -> sp.csr_matrix:
    dst = np.searchsorted(basis.configs, mapped_masks)
    if not np.array_equal(basis.configs[dst], mapped_masks):
        raise ValueError("mapped configurations leave the constrained space")
    dim = basis.dimension
    return sp.coo_matrix(
        (np.ones(dim), (dst, np.arange(dim))), shape=(dim, dim)
    ).tocsr()


def build_translation(basis: ConstrainedBasis) -> sp.csr_matrix:
    """Cyclic shift of every site by +1 (periodic chains only)."""
    if basis.rule.boundary != "periodic":
        raise ValueError("translation is only defined for periodic boundaries")
    n = np.uint64(basis.n_sites)
    full = np.uint64((1 << basis.n_sites) - 1)
    m = basis.configs
    shifted = ((m << np.uint64(1)) | (m >> (n - np.uint64(1)))) & full
    return _permutation(basis, shifted)


def build_inversion(basis: ConstrainedBasis) -> sp.csr_matrix:
    """Spatial inversion site i -> N-1-i (periodic chains only)."""
    if basis.rule.boundary != "periodic":
        raise ValueError("inversion is only defined for periodic boundaries")
    n = basis.n_sites
    reversed_masks = np.zeros_like(basis.configs)
    for i in range(n):
        bit = (basis.configs >> np.uint64(i)) & np.uint64(1)
        reversed_masks |= bit << np.uint64(n - 1 - i)
    return _permutation(basis, reversed_masks)


# ---------------------------------------------------------------------------
# Krylov propagation


def _lanczos_step(H, v0, tau, tol, m_cap):
    """One Lanczos approximation of exp(-i*tau*H) v0.

    Returns (result, converged, err_estimate).  The error estimate is the
    residual coupling of the subspace solution to the next Lanczos vector.
    Full reorthogonalization is used; dimensions in practice are modest.
    """
    dim = v0.shape[0]
    m_cap = min(m_cap, dim)
    V = np.empty((m_cap, dim), dtype=complex)
    alphas: list[float] = []
    betas: list[float] = []

    V[0] = v0
    w = H @ V[0]
    alphas.append(float(np.vdot(V[0], w).real))
    w = w - alphas[0] * V[0]

    while True:
        m = len(alphas)
        evals, evecs = eigh_tridiagonal(np.array(alphas), np.array(betas))
        coeff = evecs @ (np.exp(-1j * tau * evals) * evecs[0, :].conj())
        beta = float(np.linalg.norm(w))
        err = beta * abs(coeff[-1])
        if beta < 1e-13 or err <= tol:
            # happy breakdown or converged
            return coeff @ V[:m], True, err
        if m == m_cap:
            return coeff @ V[:m], False, err
        V[m] = w / beta
        overlaps = V[:m].conj() @ V[m]
        V[m] -= overlaps @ V[:m]
        V[m] /= np.linalg.norm(V[m])
        betas.append(beta)
        w = H @ V[m]
        alphas.append(float(np.vdot(V[m], w).real))
        w = w - alphas[m] * V[m] - beta * V[m - 1]


def krylov_evolve(
    H,
    state: np.ndarray,
    dt: float,
    tol: float = 1e-10,
    m_cap: int = 80,
    max_subdivisions: int = 20,
) -> np.ndarray:
    """Propagate ``state`` by exp(-i H dt) with adaptive Lanczos stepping.

    The subspace grows until the local error estimate drops below ``tol``;
    if the cap is hit the step is halved.  The result is renormalized, so
    norm drift stays at rounding level.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    v = np.asarray(state, dtype=complex)
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > 1e-12:
        raise ValueError(f"state must be normalized, |norm - 1| = {abs(nrm - 1.0):.2e}")
    if dt == 0:
        return v.copy()

    remaining = dt
    tau = dt
    subdivisions = 0
    while remaining > 1e-15 * dt:
        tau = min(tau, remaining)
        result, ok, err = _lanczos_step(H, v, tau, tol, m_cap)
        if not ok:
            subdivisions += 1
            if subdivisions > max_subdivisions:
                raise KrylovError(
                    f"no convergence at subspace cap {m_cap} after "
                    f"{max_subdivisions} step halvings (err={err:.2e})"
                )
            tau /= 2.0
            continue
        v = result / np.linalg.norm(result)
        remaining -= tau
    return v


# ---------------------------------------------------------------------------
# Spectra


@dataclass
class SpectrumResult:
    energies: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns, expressed in the constrained basis
    sector: Optional[dict] = None


def _momentum_blocks(basis: ConstrainedBasis):
    """Translation orbits of a periodic basis: (representative idx, orbit arrays)."""
    n = np.uint64(basis.n_sites)
    full = np.uint64((1 << basis.n_sites) - 1)
    configs = basis.configs
    seen = np.zeros(basis.dimension, dtype=bool)
    orbits = []
    for k0 in range(basis.dimension):
        if seen[k0]:
            continue
        members = [k0]
        m = configs[k0]
        while True:
            m = ((m << np.uint64(1)) | (m >> (n - np.uint64(1)))) & full
            idx = basis.index[int(m)]
            if idx == k0:
                break
            members.append(idx)
            seen[idx] = True
        seen[k0] = True
        orbits.append(np.array(members))
    return orbits


def momentum_sector_basis(basis: ConstrainedBasis, k: int) -> sp.csc_matrix:
    """Isometry whose columns span the momentum-k translation eigenspace."""
    N = basis.n_sites
    cols = []
    for orbit in _momentum_blocks(basis):
        period = len(orbit)
        # momentum k is compatible iff e^{-i 2 pi k period / N} = 1
        if (k * period) % N != 0:
            continue
        phases = np.exp(-2j * np.pi * k * np.arange(period) / N) / np.sqrt(period)
        col = sp.coo_matrix(
            (phases, (orbit, np.zeros(period, dtype=int))), shape=(basis.dimension, 1)
        )
        cols.append(col)
    if not cols:
        return sp.csc_matrix((basis.dimension, 0))
    return sp.hstack(cols).tocsc()


def full_spectrum(
    H,
    basis: Optional[ConstrainedBasis] = None,
    momentum: Optional[int] = None,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> SpectrumResult:
    """Dense eigendecomposition, optionally block-reduced to one momentum sector."""
    if momentum is not None:
        if basis is None:
            raise ValueError("momentum reduction requires the basis")
        U = momentum_sector_basis(basis, momentum)
        if U.shape[1] > dense_limit:
            raise CapacityError(f"sector dimension {U.shape[1]} exceeds {dense_limit}")
        Hk = (U.conj().T @ (H @ U)).toarray()
        energies, vecs = np.linalg.eigh(Hk)
        return SpectrumResult(energies, np.asarray(U @ vecs), sector={"momentum": momentum})
    if H.shape[0] > dense_limit:
        raise CapacityError(f"dimension {H.shape[0]} exceeds dense limit {dense_limit}")
    energies, vecs = np.linalg.eigh(H.toarray())
    return SpectrumResult(energies, vecs)


def overlap_scatter(spectrum: SpectrumResult, state: np.ndarray) -> np.ndarray:
    """(E_n, |<n|state>|^2) pairs as a (dim, 2) array."""
    overlaps = np.abs(spectrum.eigenvectors.conj().T @ state) ** 2
    return np.column_stack([spectrum.energies, overlaps])


# ---------------------------------------------------------------------------
# Entanglement of exact vectors


def _part_masks(basis: ConstrainedBasis, cut: int):
    """Legal left/right sub-masks occurring across the cut, with index maps."""
    left_mask = (1 << cut) - 1
    lefts = np.unique(basis.configs & np.uint64(left_mask))
    rights = np.unique(basis.configs >> np.uint64(cut))
    return lefts, rights


def eigenstate_entanglement(state: np.ndarray, cut: int, basis: ConstrainedBasis) -> float:
    """Von Neumann entropy (natural log) across ``cut`` for a constrained vector."""
    if not 1 <= cut < basis.n_sites:
        raise ValueError("cut must satisfy 1 <= cut < n_sites")
    lefts, rights = _part_masks(basis, cut)
    grid = np.zeros((len(lefts), len(rights)), dtype=complex)
    left_bits = np.uint64((1 << cut) - 1)
    lidx = np.searchsorted(lefts, basis.configs & left_bits)
    ridx = np.searchsorted(rights, basis.configs >> np.uint64(cut))
    grid[lidx, ridx] = state
    s = np.linalg.svd(grid, compute_uv=False)
    p = s**2
    p = p[p > 1e-15]
    p = p / p.sum()
    return float(-(p * np.log(p)).sum())


def reduced_density_matrix(
    basis: ConstrainedBasis, state: np.ndarray, first_site: int, width: int
) -> np.ndarray:
    """RDM of ``width`` contiguous sites, indexed by region-local bitmasks.

    Row/column index r means region site i is excited iff bit i of r is set
    (the same convention as CellState lookup tables).
    """
    if not 0 <= first_site <= basis.n_sites - width:
        raise ValueError("region outside the chain")
    region_bits = np.uint64(((1 << width) - 1) << first_site)
    region = (basis.configs & region_bits) >> np.uint64(first_site)
    env = basis.configs & ~region_bits
    env_keys = np.unique(env)
    rows = np.searchsorted(env_keys, env)
    grid = np.zeros((len(env_keys), 1 << width), dtype=complex)
    grid[rows, region.astype(np.int64)] = state
    return grid.conj().T @ grid


def best_product_cell(
    basis: ConstrainedBasis,
    state: np.ndarray,
    width: int,
    n_iter: int = 80,
    seed: int = 0,
):
    """Best product-of-cells approximation of a constrained vector.

    Alternating least squares over one normalized cell vector per block of
    ``width`` sites (blocks aligned to site 0); maximizes the overlap with
    ``state``.  Returns (cells, fidelity) where each cell is a 2^width
    lookup table (mask-indexed amplitudes) and fidelity is the squared
    overlap of the fitted product with the state.
    """
    if basis.n_sites % width:
        raise ValueError("chain length must be a multiple of the cell width")
    n_cells = basis.n_sites // width
    configs = basis.configs.astype(np.int64)
    subs = [(configs >> (width * j)) & ((1 << width) - 1) for j in range(n_cells)]
    rng = np.random.default_rng(seed)
    luts = []
    for _ in range(n_cells):
        v = rng.normal(size=1 << width) + 1j * rng.normal(size=1 << width)
        luts.append(v / np.linalg.norm(v))
    for _ in range(n_iter):
        for i in range(n_cells):
            rest = np.ones(basis.dimension, dtype=complex)
            for j in range(n_cells):
                if j != i:
                    rest *= luts[j][subs[j]]
            v = np.zeros(1 << width, dtype=complex)
            np.add.at(v, subs[i], np.conj(state) * rest)
            v = np.conj(v)
            nrm = np.linalg.norm(v)
            if nrm == 0:
                raise KrylovError("product fit collapsed to zero")
            luts[i] = v / nrm
    overlap = np.ones(basis.dimension, dtype=complex)
    for j in range(n_cells):
        overlap *= luts[j][subs[j]]
    fidelity = abs(np.vdot(state, overlap)) ** 2
    return luts, float(fidelity)


def expect_number_exact(basis: ConstrainedBasis, state: np.ndarray) -> np.ndarray:
    """Per-site excitation density of a constrained vector."""
    weights = np.abs(state) ** 2
    return basis.occupations().T @ weights


def expect_energy_density_exact(basis: ConstrainedBasis, state: np.ndarray) -> np.ndarray:
    """Per-site projected-flip expectation of a constrained vector."""
    out = np.empty(basis.n_sites)
    for site in range(basis.n_sites):
        src, dst = _flip_pairs(basis, site)
        out[site] = 2.0 * np.sum((state[dst].conj() * state[src]).real)
    return out
