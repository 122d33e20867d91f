"""Initial states: scarred-background cells, soliton cells, layouts, fixtures.

Cells are short blocks of sites (3 for the radius-1 model, 5 for radius-2)
whose leading ``radius`` site(s) carry no excitation amplitude, so tensor
products of cells never violate the blockade.  A layout assigns a cell to
every block of a chain and may superpose several assignments (Bell pairs).

Bit/ordering conventions match :mod:`rydsol.basis`: bit i of a cell-local
mask is cell site i, site 0 leftmost, masks ascending.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .basis import ConstrainedBasis
from .mps import MPS

BETA = 0.65
BETA_TILDE = math.sqrt(1.0 + BETA**2)
PERIOD_REF = 3.52
V_SOL_REF = 3.0 / PERIOD_REF


def _ket(pattern: str) -> int:
    """Mask for a d/u string, leftmost character = site 0."""
    return sum(1 << i for i, ch in enumerate(pattern) if ch == "u")


@dataclass(frozen=True)
class CellState:
    """A normalized state on ``width`` sites, stored as sparse amplitudes.

    ``move`` records the transport character used by layout shifting:
    +1 for right-movers, -1 for left-movers, 0 for background cells.
    """

    width: int
    amps: tuple  # ((mask, amplitude), ...) with ascending masks
    label: str
    move: int = 0

    @staticmethod
    def from_dict(width, amps, label, move=0, normalize=True) -> "CellState":
        items = sorted((int(m), complex(a)) for m, a in amps.items() if a != 0)
        vec = np.array([a for _, a in items])
        nrm = np.linalg.norm(vec)
        if normalize:
            items = [(m, a / nrm) for m, a in items]
        elif abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"cell {label!r} is not normalized")
        return CellState(width=width, amps=tuple(items), label=label, move=move)

    def lookup_table(self) -> np.ndarray:
        """Dense complex array of length 2^width: mask -> amplitude."""
        table = np.zeros(1 << self.width, dtype=complex)
        for m, a in self.amps:
            table[m] = a
        return table

    def statevector(self) -> np.ndarray:
        """Dense vector in site-tensor-product order (site 0 slowest)."""
        vec = np.zeros((2,) * self.width, dtype=complex)
        for m, a in self.amps:
            idx = tuple((m >> i) & 1 for i in range(self.width))
            vec[idx] = a
        return vec.reshape(-1)

    def inner(self, other: "CellState") -> complex:
        """<self|other>."""
        lut = dict(self.amps)
        return sum(np.conj(lut.get(m, 0.0)) * a for m, a in other.amps)

    def chirality_image(self, label: str = None, move: int = None) -> "CellState":
        """Apply site-wise Z (sign (-1)^(#down sites))."""
        amps = {
            m: a * (-1) ** (self.width - bin(m).count("1")) for m, a in self.amps
        }
        return CellState.from_dict(
            self.width, amps,
            label if label is not None else f"C[{self.label}]",
            move=self.move if move is None else move,
            normalize=False,
        )

    def site_tensors(self):
        """Exact MPS site tensors (bond 1 at both cell edges)."""
        m = MPS.from_statevector(self.statevector(), self.width)
        # B-form tensors contract directly to the state (left Schmidt = 1)
        return [t.copy() for t in m.tensors]


# --- the 3-site cell zoo ----------------------------------------------------


def cell_S() -> CellState:
    return CellState.from_dict(
        3, {_ket("dud"): BETA / BETA_TILDE, _ket("ddu"): 1.0 / BETA_TILDE},
        "S", normalize=False,
    )


def cell_Sbar() -> CellState:
    return CellState.from_dict(
        3, {_ket("dud"): 1.0 / BETA_TILDE, _ket("ddu"): BETA / BETA_TILDE},
        "Sb", normalize=False,
    )


def cell_LR():
    """The orthonormal left/right-mover cells.

    The overall sign of the |ddd> component is fixed by requiring that the
    site-wise Z map (our chirality convention) sends R exactly to L.
    """
    c = 1.0 / (math.sqrt(2.0) * BETA_TILDE)
    L = CellState.from_dict(
        3,
        {_ket("ddd"): -BETA_TILDE * c, _ket("dud"): 1j * c, _ket("ddu"): -1j * BETA * c},
        "L", move=-1, normalize=False,
    )
    R = CellState.from_dict(
        3,
        {_ket("ddd"): +BETA_TILDE * c, _ket("dud"): 1j * c, _ket("ddu"): -1j * BETA * c},
        "R", move=+1, normalize=False,
    )
    return L, R


def cell_energy(alpha: float, side: str) -> CellState:
    """Energy-carrying soliton cell: cos(a)*mover + sin(a)*S."""
    if not -math.pi / 2 <= alpha < math.pi / 2:
        raise ValueError("alpha must lie in [-pi/2, pi/2)")
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    L, R = cell_LR()
    mover = R if side == "right" else L
    s = cell_S()
    table = {m: math.cos(alpha) * a for m, a in mover.amps}
    for m, a in s.amps:
        table[m] = table.get(m, 0.0) + math.sin(alpha) * a
    label = f"{'R' if side == 'right' else 'L'}a({alpha:g})"
    return CellState.from_dict(3, table, label, move=mover.move, normalize=False)


def cell_energy_eps(alpha: float) -> float:
    """Total energy carried by a right-mover cell at angle alpha."""
    return math.sin(2.0 * alpha) * (1.0 + BETA) / math.sqrt(2.0 * (1.0 + BETA**2))


def cell_down(width: int = 3) -> CellState:
    """Fully polarized (all sites down) cell."""
    return CellState.from_dict(width, {0: 1.0}, "V", normalize=False)


# --- 5-site cells for the radius-2 model ------------------------------------


def cells_ppxpp():
    """Background and mover cells of the radius-2 blockade model."""
    c = 1.0 / math.sqrt(BETA**2 + 2.0)
    S5 = CellState.from_dict(
        5,
        {_ket("ddudd"): BETA * c, _ket("dddud"): c, _ket("ddddu"): c},
        "S5", normalize=False,
    )
    # printed 3-digit coefficients, normalized after entry; the |ddddd> sign
    # is fixed the same way as for the 3-site movers (Z image of R5 is L5)
    raw = {_ket("ddddd"): 1.133, _ket("ddudd"): 0.84j,
           _ket("dddud"): 0.10j, _ket("ddddu"): -0.646j}
    R5 = CellState.from_dict(5, raw, "R5", move=+1)
    L5 = CellState.from_dict(
        5, {m: (-a if m == 0 else a) for m, a in raw.items()}, "L5", move=-1
    )
    return S5, L5, R5


def cell_energy_ppxpp(alpha: float, side: str) -> CellState:
    """cos(a)*mover + sin(a)*S5 for the radius-2 model."""
    S5, L5, R5 = cells_ppxpp()
    mover = R5 if side == "right" else L5
    table = {m: math.cos(alpha) * a for m, a in mover.amps}
    for m, a in S5.amps:
        table[m] = table.get(m, 0.0) + math.sin(alpha) * a
    label = f"{'R5' if side == 'right' else 'L5'}a({alpha:g})"
    return CellState.from_dict(5, table, label, move=mover.move)


# --- 6-site defect cells (quarter-period fixtures) ---------------------------


def cell_D1() -> CellState:
    amps = {
        _ket("d" + "duddd"): 0.410,
        _ket("d" + "duddu"): -0.342j,
        _ket("d" + "dudud"): 0.176j,
        _ket("d" + "udddd"): 1.0,
        _ket("d" + "udddu"): -0.834j,
        _ket("d" + "uddud"): 0.247j,
        _ket("d" + "ududd"): 0.387j,
        _ket("d" + "ududu"): 0.323,
    }
    return CellState.from_dict(6, amps, "D1")


def cell_D2() -> CellState:
    amps = {
        _ket("d" + "ddddd"): 0.136,
        _ket("d" + "ddddu"): 0.084j,
        _ket("d" + "dddud"): 0.139j,
        _ket("d" + "ddudd"): 1.0j,
        _ket("d" + "ddudu"): -0.614,
        _ket("d" + "duddd"): 0.113j,
        _ket("d" + "duddu"): -0.069,
        _ket("d" + "dudud"): 0.132,
        _ket("d" + "uddud"): 0.071,
        _ket("d" + "ududd"): 0.389,
        _ket("d" + "ududu"): 0.239j,
    }
    return CellState.from_dict(6, amps, "D2")


# --- layouts ------------------------------------------------------------------


@dataclass(frozen=True)
class SolitonLayout:
    """Weighted superposition of per-cell assignments on one chain.

    ``terms`` is a tuple of (weight, cells) with each ``cells`` a tuple of
    CellState covering the chain left to right; weights have unit total
    squared magnitude.  Most layouts have a single term with weight 1.
    """

    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise ValueError("layout needs at least one term")
        n = self.n_sites
        for w, cells in self.terms:
            if sum(c.width for c in cells) != n:
                raise ValueError("all superposition terms must cover the same sites")
        total = sum(abs(w) ** 2 for w, _ in self.terms)
        if abs(total - 1.0) > 1e-10:
            raise ValueError("superposition weights must have unit total square")

    @staticmethod
    def of(cells, weight=1.0) -> "SolitonLayout":
        return SolitonLayout(terms=((complex(weight), tuple(cells)),))

    @property
    def n_sites(self) -> int:
        return sum(c.width for c in self.terms[0][1])

    @property
    def n_cells(self) -> int:
        return len(self.terms[0][1])

    def shifted(self, m: int) -> "SolitonLayout":
        """Translate movers by m cells: right-movers +m, left-movers -m.

        Vacated positions are refilled with the term's background cell.  A
        shift is ill-defined (raises ValueError) when two movers would land
        on the same cell, when a right- and a left-mover set would merge,
        or when a mover would leave the chain.
        """
        new_terms = []
        for w, cells in self.terms:
            widths = {c.width for c in cells}
            if len(widths) != 1:
                raise ValueError("shifting requires uniform cell width")
            background = next((c for c in cells if c.move == 0), None)
            if background is None:
                raise ValueError("no background cell to fill vacated positions")
            n = len(cells)
            new = [background] * n
            taken = {}
            for pos, c in enumerate(cells):
                if c.move == 0:
                    continue
                dest = pos + m * c.move
                if not 0 <= dest < n:
                    raise ValueError(
                        f"shift by {m} pushes mover at cell {pos} off the chain"
                    )
                if dest in taken:
                    raise ValueError(
                        f"shift by {m} collides movers at cell {dest}; the shifted "
                        "target is ill-defined when mover sets merge"
                    )
                taken[dest] = c
                new[dest] = c
            new_terms.append((w, tuple(new)))
        return SolitonLayout(terms=tuple(new_terms))


def bell_pair_layout(n_cells_background: int, width: int = 3) -> SolitonLayout:
    """(|L+ R+> + |L- R->)/sqrt(2) centered in a scarred background."""
    side = n_cells_background
    s = cell_S()
    lp = cell_energy(-math.pi / 4, "left")
    rp = cell_energy(+math.pi / 4, "right")
    lm = cell_energy(+math.pi / 4, "left")
    rm = cell_energy(-math.pi / 4, "right")
    w = 1.0 / math.sqrt(2.0)
    t1 = (s,) * side + (lp, rp) + (s,) * side
    t2 = (s,) * side + (lm, rm) + (s,) * side
    return SolitonLayout(terms=((w, t1), (w, t2)))


# --- layout-string grammar -----------------------------------------------------

_TOKEN_MAP = {
    "S": cell_S,
    "Sb": cell_Sbar,
    "L": lambda: cell_LR()[0],
    "R": lambda: cell_LR()[1],
    "R+": lambda: cell_energy(+math.pi / 4, "right"),
    "R-": lambda: cell_energy(-math.pi / 4, "right"),
    # energy-carrying left movers: L+ is the positive-energy one (the
    # chirality map flips energy, so it pairs with the negative angle)
    "L+": lambda: cell_energy(-math.pi / 4, "left"),
    "L-": lambda: cell_energy(+math.pi / 4, "left"),
    "V": cell_down,
    "S5": lambda: cells_ppxpp()[0],
    "L5": lambda: cells_ppxpp()[1],
    "R5": lambda: cells_ppxpp()[2],
    "R5+": lambda: cell_energy_ppxpp(+math.pi / 4, "right"),
    "R5-": lambda: cell_energy_ppxpp(-math.pi / 4, "right"),
    "D1": cell_D1,
    "D2": cell_D2,
}

_ANGLE_RE = re.compile(r"^(Ra|La)\(([-+0-9.eE]+)\)$")


class LayoutError(ValueError):
    """Raised for malformed layout strings."""


def _parse_cell_token(tok: str) -> CellState:
    if tok in _TOKEN_MAP:
        return _TOKEN_MAP[tok]()
    m = _ANGLE_RE.match(tok)
    if m:
        side = "right" if m.group(1) == "Ra" else "left"
        return cell_energy(float(m.group(2)), side)
    raise LayoutError(f"unknown layout token {tok!r}")


def parse_layout(text: str) -> SolitonLayout:
    """Parse a layout string such as "S*22 R+ R+ R- S S R+ S*22".

    Tokens name cells (optionally repeated with ``*k``); at most one token
    may carry a ``bell:`` prefix of the form ``bell:A,B|C,D[|...]`` which
    expands to an equal-weight superposition of the listed multi-cell
    alternatives at that position.
    """
    slots = []  # list of either CellState or list-of-alternatives
    bell_seen = False
    for raw_tok in text.split():
        tok, _, rep = raw_tok.partition("*")
        count = 1
        if rep:
            try:
                count = int(rep)
            except ValueError as exc:
                raise LayoutError(f"bad repeat count in token {raw_tok!r}") from exc
            if count < 1:
                raise LayoutError(f"repeat count must be >= 1 in {raw_tok!r}")
        if tok.startswith("bell:"):
            if bell_seen or count != 1:
                raise LayoutError("at most one unrepeated bell: token is allowed")
            bell_seen = True
            alternatives = []
            for branch in tok[len("bell:"):].split("|"):
                cells = [_parse_cell_token(t) for t in branch.split(",") if t]
                if not cells:
                    raise LayoutError(f"empty bell branch in {tok!r}")
                alternatives.append(tuple(cells))
            widths = {sum(c.width for c in alt) for alt in alternatives}
            if len(widths) != 1:
                raise LayoutError("bell branches must cover the same number of sites")
            slots.append(alternatives)
        else:
            cell = _parse_cell_token(tok)
            slots.extend([cell] * count)
    if not slots:
        raise LayoutError("empty layout")

    bell_slots = [s for s in slots if isinstance(s, list)]
    if not bell_slots:
        return SolitonLayout.of([s for s in slots])
    alternatives = bell_slots[0]
    w = 1.0 / math.sqrt(len(alternatives))
    terms = []
    for alt in alternatives:
        cells = []
        for s in slots:
            if isinstance(s, list):
                cells.extend(alt)
            else:
                cells.append(s)
        terms.append((complex(w), tuple(cells)))
    return SolitonLayout(terms=tuple(terms))


# --- state builders -------------------------------------------------------------


def build_exact(layout: SolitonLayout, basis: ConstrainedBasis) -> np.ndarray:
    """Layout -> exact vector in the constrained basis.

    Because every cell keeps its leading ``radius`` site(s) down, the tensor
    product never violates the blockade and no weight is discarded.
    """
    if layout.n_sites != basis.n_sites:
        raise ValueError(
            f"layout covers {layout.n_sites} sites but basis has {basis.n_sites}"
        )
    configs = basis.configs.astype(np.int64)
    vec = np.zeros(basis.dimension, dtype=complex)
    for w, cells in layout.terms:
        part = np.full(basis.dimension, w, dtype=complex)
        start = 0
        for cell in cells:
            sub = (configs >> start) & ((1 << cell.width) - 1)
            part *= cell.lookup_table()[sub]
            start += cell.width
        vec += part
    nrm = np.linalg.norm(vec)
    if abs(nrm - 1.0) > 1e-9:
        raise AssertionError(
            f"layout state lost weight in the constrained basis (norm {nrm:.3e})"
        )
    return vec / nrm


def build_mps(layout: SolitonLayout, cutoff: float = 1e-14) -> MPS:
    """Layout -> exact MPS (bond dimension <= max cell Schmidt rank)."""
    term_states = []
    weights = []
    for w, cells in layout.terms:
        raw = []
        for cell in cells:
            raw.extend(cell.site_tensors())
        term_states.append(MPS.from_site_tensors(raw, cutoff=cutoff))
        weights.append(w)
    if len(term_states) == 1:
        return term_states[0]
    return MPS.superpose(term_states, weights, cutoff=cutoff)


def build_mps_from_angles(thetas, phis=None, cutoff: float = 1e-14) -> MPS:
    """Bond-dimension-2 variational MPS from per-site angles.

    Site matrices: A(down) = [[cos t, 0], [1, 0]], A(up) = [[0, e^{i p} sin t],
    [0, 0]]; closed with boundary vectors (1, 0) on the left and (1, 1) on
    the right; the result is normalized.
    """
    thetas = np.asarray(thetas, dtype=float)
    n = len(thetas)
    phis = np.full(n, math.pi / 2) if phis is None else np.asarray(phis, dtype=float)
    if len(phis) != n:
        raise ValueError("theta and phi chains must have equal length")
    raw = []
    for j in range(n):
        A = np.zeros((2, 2, 2), dtype=complex)  # (left, phys, right)
        A[0, 0, 0] = math.cos(thetas[j])
        A[1, 0, 0] = 1.0
        A[0, 1, 1] = np.exp(1j * phis[j]) * math.sin(thetas[j])
        raw.append(A)
    raw[0] = raw[0][:1]  # V_L = (1, 0)
    raw[-1] = raw[-1].sum(axis=2, keepdims=True)  # V_R = (1, 1)
    return MPS.from_site_tensors(raw, cutoff=cutoff)


# --- N=15 periodic phenomenology fixtures ----------------------------------------


def fixture_states(which: str, basis: ConstrainedBasis, translation) -> np.ndarray:
    """Quarter-period Ansatz fixtures on the 15-site periodic chain.

    ``which`` is one of bg0, bgT4, bgT2, bg3T4 (pure background) or
    sol0, solT4, solT2, sol3T4 (single right-mover).  ``translation`` is the
    one-site translation operator on ``basis`` (see exact.build_translation).
    """
    if basis.n_sites != 15:
        raise ValueError("fixtures are defined on 15 sites")
    S, Sb = cell_S(), cell_Sbar()
    L, R = cell_LR()
    recipes = {
        "bg0": (0, [S] * 5),
        "bgT4": (1, [R] * 5),
        "bgT2": (2, [Sb] * 5),
        "bg3T4": (1, [L] * 5),
        "sol0": (0, [R, S, S, S, S]),
        "solT4": (1, [Sb, R, R, R, R]),
        # negative shifts (mod 15) align the defect cell with where the
        # right-mover launched from cell 0 actually sits at that time
        "solT2": (14, [cell_D1(), Sb, Sb, Sb]),
        "sol3T4": (10, [L, L, cell_D2(), L]),
    }
    if which not in recipes:
        raise ValueError(f"unknown fixture {which!r}; choose from {sorted(recipes)}")
    shifts, cells = recipes[which]
    vec = build_exact(SolitonLayout.of(cells), basis)
    for _ in range(shifts):
        vec = translation @ vec
    return vec
