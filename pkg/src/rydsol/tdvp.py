"""Classical flow from TDVP over the bond-dimension-2 variational manifold.

One periodic unit cell of n sites represents an infinitely repeated chain;
each site carries angles (theta_i, phi_i).  The plane phi = pi/2 is flow
invariant, and on it the theta flow closes on itself (the "reduced" flow).

The right-hand sides are evaluated in a restructured form in which the
number expectations <n_i> = sin^2(theta_i) * nu_i / D are split into the
cyclic alternating sums nu_i and the common denominator D, so that ratios
like <n_{i-1}>/<n_i> never divide by a vanishing density: all genuinely
singular denominators (nu_i, D, cos/sin factors) are guarded explicitly.

The index pairing of the cross-site terms (which neighbor feeds which term)
is fixed by a term-by-term match against an independently published
alternative form of the same flow, implemented here as `eom_alternative`
and used as a cross-validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp


class SingularityError(ArithmeticError):
    """Raised when a guarded denominator falls below the configured bound."""


@dataclass
class FlowConfig:
    rtol: float = 1e-9
    atol: float = 1e-9
    max_step: float = np.inf
    eps_sing: float = 1e-9
    t_final: float = 25.0

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")


def _guard(values, eps, what):
    values = np.atleast_1d(values)
    bad = np.abs(values) < eps
    if np.any(bad):
        site = int(np.argmax(bad))
        raise SingularityError(
            f"denominator {what} within {eps:g} of zero at site {site} "
            f"(value {values[site]:.3e})"
        )


def _nu_and_d(s: np.ndarray):
    """Cyclic alternating sums nu_i = sum_l prod_{j=1..l}(-s_{i-j}) and
    the shared denominator D = 1 - prod_j(-s_j)."""
    n = len(s)
    nu = np.ones(n)
    prod = np.ones(n)
    for l in range(1, n):
        prod = prod * (-np.roll(s, l))
        nu = nu + prod
    d = 1.0 - np.prod(-s)
    return nu, d


def n_expectation(theta, eps_sing: float = 1e-9) -> np.ndarray:
    """<n_i> per site of the repeating unit cell."""
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta) ** 2
    nu, d = _nu_and_d(s)
    _guard(d, eps_sing, "1 - prod(-sin^2 theta)")
    return s * nu / d


def eom_reduced(theta, eps_sing: float = 1e-9) -> np.ndarray:
    """theta-dot on the invariant phi = pi/2 plane.

    theta_dot_i = -cos(theta_{i+1})
                  - sin(theta_i) sin(theta_{i-1}) cos(theta_{i-1}) nu_{i-1}/nu_i
    """
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta) ** 2
    nu, _ = _nu_and_d(s)
    _guard(nu, eps_sing, "nu")
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)
    nu_prev = np.roll(nu, 1)
    return -np.roll(cos_t, -1) - sin_t * np.roll(sin_t * cos_t, 1) * nu_prev / nu


def eom_full(theta, phi, eps_sing: float = 1e-9):
    """(theta-dot, phi-dot) of the full flow; reduces to eom_reduced at
    phi = pi/2 (every phi-dot term carries a cos(phi) factor)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    s = np.sin(theta) ** 2
    nu, _ = _nu_and_d(s)
    _guard(nu, eps_sing, "nu")
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    sin_p, cos_p = np.sin(phi), np.cos(phi)
    sin_2t = np.sin(2.0 * theta)
    cos_2t = np.cos(2.0 * theta)
    _guard(cos_t, eps_sing, "cos theta")
    _guard(sin_2t, eps_sing, "sin 2theta")

    nu_prev, nu_next = np.roll(nu, 1), np.roll(nu, -1)
    theta_dot = (
        -np.roll(cos_t, -1) * sin_p
        - sin_t * np.roll(sin_t * cos_t * sin_p, 1) * nu_prev / nu
    )
    bracket = (
        np.roll(sin_t, -1) ** 2 * sin_t * cos_t * nu / (np.roll(cos_t, -1) * nu_next)
        - 2.0 * np.roll(cos_t, -1) * cos_2t / sin_2t
    )
    phi_dot = (
        bracket * cos_p
        + np.roll(cos_t, -2) * np.roll(sin_t / cos_t, -1) * np.roll(cos_p, -1)
        + np.roll(sin_t * cos_t, 1) * nu_prev / (cos_t * nu) * np.roll(cos_p, 1)
    )
    return theta_dot, phi_dot


def eom_alternative(theta, phi, eps_sing: float = 1e-9):
    """Cross-validation oracle: an independently published form of the same
    flow, written for half-angle/opposite-phase conventions.

    The published equations use theta' = 2 theta and phi' = -phi relative to
    our Ansatz, and densities <n_i> = sin^2(theta'_i / 2) * eta_i with
    eta_i = nu_i / D.  They are evaluated verbatim here (including their
    tan(phi) factors), then mapped back to our convention.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    th = 2.0 * theta  # their theta
    ph = -phi  # their phi
    s = np.sin(th / 2.0) ** 2
    nu, d = _nu_and_d(s)
    _guard(d, eps_sing, "1 - prod(-sin^2)")
    eta = nu / d
    sin_th, half_cos = np.sin(th), np.cos(th / 2.0)
    half_sin, half_tan = np.sin(th / 2.0), np.tan(th / 2.0)
    cos_ph = np.cos(ph)
    _guard(cos_ph, eps_sing, "cos phi")
    tan_ph = np.tan(ph)
    _guard(sin_th, eps_sing, "sin theta")
    _guard(eta, eps_sing, "eta")
    _guard(half_sin, eps_sing, "sin(theta/2)")

    h_x = sin_th * cos_ph * np.roll(half_cos, -1)
    r_th = (
        0.25 * np.roll(eta, 1) * half_sin * np.roll(sin_th * cos_ph, 1)
        + 0.5 * eta * cos_ph * np.roll(half_cos, -1)
    )
    th_dot = (
        2.0 * tan_ph / sin_th * h_x
        + np.roll(eta * tan_ph * h_x, 1) * half_tan / eta
    )
    ph_dot = (
        h_x / half_sin**2
        - 2.0 * np.roll(half_tan / eta * r_th, -1)
        - 4.0 / (eta * sin_th) * r_th
    )
    # back to our convention
    return th_dot / 2.0, -ph_dot


@dataclass
class FlowTrajectory:
    times: np.ndarray
    theta: np.ndarray  # (n_times, n_sites)
    phi: np.ndarray | None
    density: np.ndarray  # (n_times, n_sites)


def integrate(
    theta0,
    phi0=None,
    config: FlowConfig | None = None,
    sample_dt: float = 0.01,
) -> FlowTrajectory:
    """Adaptive 5(4) Runge-Kutta integration of the flow.

    ``phi0=None`` integrates the reduced (phi = pi/2) flow in the theta
    variables only.  Aborts with a SingularityError (annotated with the
    time reached) when a guard trips.
    """
    config = config or FlowConfig()
    theta0 = np.asarray(theta0, dtype=float)
    n = len(theta0)
    reduced = phi0 is None
    if reduced:
        y0 = theta0
    else:
        phi0 = np.asarray(phi0, dtype=float)
        if len(phi0) != n:
            raise ValueError("theta and phi chains must have equal length")
        y0 = np.concatenate([theta0, phi0])

    last_t = [0.0]

    def rhs(t, y):
        last_t[0] = t
        if reduced:
            return eom_reduced(y, config.eps_sing)
        td, pd = eom_full(y[:n], y[n:], config.eps_sing)
        return np.concatenate([td, pd])

    t_eval = np.arange(0.0, config.t_final + sample_dt / 2, sample_dt)
    try:
        sol = solve_ivp(
            rhs,
            (0.0, config.t_final),
            y0,
            method="RK45",
            t_eval=t_eval,
            rtol=config.rtol,
            atol=config.atol,
            max_step=config.max_step,
        )
    except SingularityError as exc:
        raise SingularityError(f"flow aborted at t = {last_t[0]:.4f}: {exc}") from exc
    if not sol.success:
        raise RuntimeError(f"integration failed at t = {last_t[0]:.4f}: {sol.message}")

    theta_t = sol.y[:n].T
    phi_t = None if reduced else sol.y[n:].T
    density = np.array([n_expectation(row, config.eps_sing) for row in theta_t])
    return FlowTrajectory(times=sol.t, theta=theta_t, phi=phi_t, density=density)
