"""Enumeration and indexing of blockade-constrained configuration spaces.

Conventions shared by every module: bit ``i`` of a configuration mask set
means site ``i`` is excited; site 0 is the leftmost site; configurations
are stored in ascending-mask order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIMENSION_CAP = 1 << 26


class CapacityError(RuntimeError):
    """Raised when a requested space exceeds the configured dimension cap."""


@dataclass(frozen=True)
class BlockadeRule:
    """Blockade of radius 1 (3-site flip terms) or radius 2 (5-site terms)."""

    radius: int = 1
    boundary: str = "open"  # "open" | "periodic"

    def __post_init__(self):
        if self.radius not in (1, 2):
            raise ValueError(f"blockade radius must be 1 or 2, got {self.radius}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")

    def is_legal(self, mask: int, n_sites: int) -> bool:
        """True iff no two excited sites are within the blockade radius."""
        for r in range(1, self.radius + 1):
            if mask & (mask >> r):
                return False
            if self.boundary == "periodic":
                # wrap-around pairs (i, i + r mod n)
                rotated = ((mask >> (n_sites - r)) | (mask << r)) & ((1 << n_sites) - 1)
                if mask & rotated:
                    return False
        return True


@dataclass
class ConstrainedBasis:
    """All legal configurations of an ``n_sites`` chain, ascending, indexed."""

    n_sites: int
    rule: BlockadeRule
    configs: np.ndarray  # uint64 masks, strictly ascending
    index: dict = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.configs)

    def index_of(self, mask: int) -> int:
        return self.index[int(mask)]

    def __contains__(self, mask: int) -> bool:
        return int(mask) in self.index

    def occupations(self) -> np.ndarray:
        """(dimension, n_sites) 0/1 array; column i is site i's occupation."""
        sites = np.arange(self.n_sites, dtype=np.uint64)
        return ((self.configs[:, None] >> sites[None, :]) & 1).astype(np.int8)


def enumerate_basis(
    n_sites: int,
    rule: BlockadeRule = BlockadeRule(),
    max_dimension: int = DEFAULT_DIMENSION_CAP,
) -> ConstrainedBasis:
    """Enumerate all blockade-legal configurations in ascending mask order.

    Uses a depth-first construction (site by site, tracking the positions of
    the last ``radius`` excitations), so the cost scales with the output
    dimension rather than 2^n_sites.  Periodic legality of the wrap-around
    pairs is checked at completion of each candidate.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    if rule.boundary == "periodic" and n_sites <= rule.radius:
        raise ValueError("periodic chains must be longer than the blockade radius")

    r = rule.radius
    configs: list[int] = []

    # stack of (site, mask, last_excited) where last_excited is the most
    # recent excited site (or a sentinel far in the past)
    stack = [(0, 0, -r - 1)]
    while stack:
        site, mask, last = stack.pop()
        if site == n_sites:
            if rule.boundary == "open" or rule.is_legal(mask, n_sites):
                configs.append(mask)
                if len(configs) > max_dimension:
                    raise CapacityError(
                        f"constrained space exceeds the configured cap of {max_dimension}"
                    )
            continue
        if site - last > r:
            stack.append((site + 1, mask | (1 << site), site))
        stack.append((site + 1, mask, last))

    arr = np.sort(np.array(configs, dtype=np.uint64))
    index = {int(m): k for k, m in enumerate(arr)}
    return ConstrainedBasis(n_sites=n_sites, rule=rule, configs=arr, index=index)


def expand_statevector(basis: ConstrainedBasis, vector: np.ndarray) -> np.ndarray:
    """Constrained vector -> dense 2^n vector in tensor order.

    Tensor order means site 0 varies slowest (the index of the dense vector
    is the site-0..site-(n-1) bit string read as a binary number), matching
    the reshape convention of the MPS module.  Note this is the bit-reversal
    of the mask order used for basis storage.
    """
    vector = np.asarray(vector)
    if vector.shape != (basis.dimension,):
        raise ValueError("vector length must equal the basis dimension")
    n = basis.n_sites
    masks = basis.configs.astype(np.int64)
    idx = np.zeros_like(masks)
    for i in range(n):
        idx |= ((masks >> i) & 1) << (n - 1 - i)
    full = np.zeros(1 << n, dtype=complex)
    full[idx] = vector
    return full


def embed_full_vector(basis: ConstrainedBasis, amplitudes: np.ndarray):
    """Restrict a dense 2^n vector (tensor order, see expand_statevector)
    to the constrained basis.

    Returns ``(constrained_vector, discarded_weight)`` where the discarded
    weight is the squared norm carried by blockade-violating configurations.
    """
    amplitudes = np.asarray(amplitudes)
    if amplitudes.shape != (1 << basis.n_sites,):
        raise ValueError(
            f"expected a vector of length 2^{basis.n_sites}, got shape {amplitudes.shape}"
        )
    n = basis.n_sites
    masks = basis.configs.astype(np.int64)
    idx = np.zeros_like(masks)
    for i in range(n):
        idx |= ((masks >> i) & 1) << (n - 1 - i)
    constrained = amplitudes[idx].astype(complex)
    total = float(np.vdot(amplitudes, amplitudes).real)
    kept = float(np.vdot(constrained, constrained).real)
    return constrained, total - kept
