"""Search for soliton angles of the classical flow by differential evolution.

The loss integrates the reduced flow from a 15-site chain holding one
candidate defect cell in a candidate scarred background (cells of 3 angles
each), and scores (a) how well the trajectory returns to its initial angles
after the defect traverses the whole chain and (b) how well it reproduces
the one-cell-shifted configuration after a single revival period, plus
smooth penalties that exclude degenerate solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import differential_evolution

from .tdvp import FlowConfig, SingularityError, integrate

SENTINEL_LOSS = 1e6

# published optimized angles, kept as the regression baseline
THETA_S_OPT = (1.05977133, 1.46820419, 0.0000131027276)
THETA_R_OPT = (0.990853599, 0.454003269, 3.10125177)
THETA_L_OPT = (4.13244625, 3.59559592, 6.24284442)
# variational angles of the quantum cells (background / right / left movers)
THETA_S_CELL = (0.0, 0.57637521, math.pi / 2)
THETA_R_CELL = (0.0, 2.5069758, 2.64260532)
THETA_L_CELL = (0.0, 2.50697563, 0.49898734)


@dataclass
class LossConfig:
    n_cells: int = 5
    closed_window: tuple = (15.0, 20.0)
    shift_window: tuple = (3.0, 4.0)
    closed_cutoff: float = 0.4
    shift_cutoff: float = 0.7
    shift_penalty_weight: float = 3.0
    t_final: float = 20.0
    sample_dt: float = 0.01
    flow: FlowConfig = field(default_factory=lambda: FlowConfig(t_final=20.0))

    def __post_init__(self):
        if self.closed_cutoff <= 0 or self.shift_cutoff <= 0:
            raise ValueError("penalty cutoffs must be positive")
        for lo, hi in (self.closed_window, self.shift_window):
            if not 0 <= lo < hi <= self.t_final:
                raise ValueError("score windows must lie within the horizon")


@dataclass
class OptimizerConfig:
    population: int = 60
    mutation: tuple = (0.5, 1.0)
    recombination: float = 0.7
    generations: int = 300
    seed: int = 0
    bounds: tuple = tuple([(0.0, 2.0 * math.pi)] * 6)

    def __post_init__(self):
        if self.population < 5:
            raise ValueError("population must be at least 5")


def distance(theta_t, reference) -> float:
    """Sum over sites of |cos^2 - cos^2| + |sin^2 - sin^2|."""
    theta_t = np.asarray(theta_t, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if theta_t.shape != reference.shape:
        raise ValueError("angle sequences must have equal length")
    return float(
        np.sum(np.abs(np.cos(theta_t) ** 2 - np.cos(reference) ** 2))
        + np.sum(np.abs(np.sin(theta_t) ** 2 - np.sin(reference) ** 2))
    )


def _closed_penalty(theta_s, cutoff) -> float:
    """Smooth penalty against all-equal background angles.

    d sums, over the three angle pairs, the |cos| and |sin| magnitude
    differences; the penalty fades to zero continuously at the cutoff.
    """
    d = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            d += abs(abs(math.cos(theta_s[i])) - abs(math.cos(theta_s[j])))
            d += abs(abs(math.sin(theta_s[i])) - abs(math.sin(theta_s[j])))
    if d >= cutoff:
        return 0.0
    return math.cos(0.5 * math.pi * d / cutoff) ** 2


def _shift_penalty(theta_s, theta_r, cutoff, weight) -> float:
    """Smooth penalty against defect angles identical to the background."""
    D = 0.0
    for a in range(3):
        D += abs(math.cos(theta_s[a]) ** 2 - math.cos(theta_r[a]) ** 2)
        D += abs(math.sin(theta_s[a]) ** 2 - math.sin(theta_r[a]) ** 2)
    if D > cutoff:
        return 0.0
    return weight * math.cos(0.5 * math.pi * D / cutoff) ** 2


def loss_total(theta_s, theta_r, config: LossConfig | None = None) -> float:
    """Two-part trajectory loss; singular flows return the sentinel value."""
    config = config or LossConfig()
    theta_s = tuple(float(v) for v in theta_s)
    theta_r = tuple(float(v) for v in theta_r)
    k = config.n_cells
    defect_cell = 1  # second cell holds the defect initially
    theta_init = np.array(
        theta_s * defect_cell + theta_r + theta_s * (k - defect_cell - 1)
    )
    theta_shift = np.array(
        theta_s * (defect_cell + 1) + theta_r + theta_s * (k - defect_cell - 2)
    )
    flow = FlowConfig(
        rtol=config.flow.rtol,
        atol=config.flow.atol,
        max_step=config.flow.max_step,
        eps_sing=config.flow.eps_sing,
        t_final=config.t_final,
    )
    try:
        traj = integrate(theta_init, None, flow, sample_dt=config.sample_dt)
    except (SingularityError, RuntimeError):
        return SENTINEL_LOSS

    def window_min(window, reference):
        lo, hi = window
        mask = (traj.times >= lo - 1e-12) & (traj.times <= hi + 1e-12)
        rows = traj.theta[mask]
        return min(distance(row, reference) for row in rows)

    l_closed = window_min(config.closed_window, theta_init) + _closed_penalty(
        theta_s, config.closed_cutoff
    )
    l_shift = window_min(config.shift_window, theta_shift) + _shift_penalty(
        theta_s, theta_r, config.shift_cutoff, config.shift_penalty_weight
    )
    return l_closed + l_shift


@dataclass
class OptimizeResult:
    theta_s: np.ndarray
    theta_r: np.ndarray
    loss: float
    history: np.ndarray  # best loss per generation
    seed: int


def optimize(
    loss_config: LossConfig | None = None,
    optimizer_config: OptimizerConfig | None = None,
    seed_members: np.ndarray | None = None,
) -> OptimizeResult:
    """Differential evolution (rand/1/bin) over the six cell angles.

    ``seed_members`` optionally injects known-good candidates (rows of six
    angles) into the initial population; with elitist selection the result
    can never be worse than the best injected member.
    """
    loss_config = loss_config or LossConfig()
    cfg = optimizer_config or OptimizerConfig()

    def objective(x):
        return loss_total(x[:3], x[3:], loss_config)

    rng = np.random.default_rng(cfg.seed)
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])
    init = lo + (hi - lo) * rng.random((cfg.population, len(cfg.bounds)))
    if seed_members is not None:
        seed_members = np.atleast_2d(np.asarray(seed_members, dtype=float))
        init[: len(seed_members)] = seed_members

    history = []

    def callback(xk, convergence=None):
        history.append(objective(xk))

    result = differential_evolution(
        objective,
        bounds=list(cfg.bounds),
        strategy="rand1bin",
        maxiter=cfg.generations,
        init=init,
        mutation=cfg.mutation,
        recombination=cfg.recombination,
        seed=cfg.seed,
        polish=False,
        tol=0.0,
        callback=callback,
    )
    return OptimizeResult(
        theta_s=result.x[:3],
        theta_r=result.x[3:],
        loss=float(result.fun),
        history=np.array(history),
        seed=cfg.seed,
    )
