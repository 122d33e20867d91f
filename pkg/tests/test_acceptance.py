"""Acceptance gate: one test per headline claim, one pass/fail line each.

Heavy tensor-network runs use the reduced desk-scale parameters (N = 60,
dt = 0.08, chi = 64); shared evolutions are session fixtures so each chain
is evolved only once.  Every test prints a single `[PASS]`/`[FAIL]` line
with the measured numbers next to the threshold it is held to.
"""

import math
import sys

import numpy as np
import pytest

from rydsol.basis import BlockadeRule, embed_full_vector, enumerate_basis, expand_statevector
from rydsol.exact import (
    best_product_cell,
    build_chirality,
    build_hamiltonian,
    build_translation,
    eigenstate_entanglement,
    expect_number_exact,
    full_spectrum,
    krylov_evolve,
    reduced_density_matrix,
)
from rydsol.mps import MPS
from rydsol.states import (
    SolitonLayout,
    build_exact,
    build_mps,
    cell_LR,
    cell_S,
    cell_energy,
    cell_energy_eps,
    fixture_states,
    parse_layout,
)
from rydsol.tebd import (
    TebdConfig,
    connected_correlator,
    expect_number,
    tebd_evolve,
    translation_fidelity_observer,
)

T_PERIOD = 3.52
V_SOL = 3.0 / T_PERIOD
DESK = dict(dt=0.08, chi_max=64, svd_cutoff=1e-8)


_CAPTURE = None


@pytest.fixture(autouse=True)
def _uncaptured_reporting(pytestconfig):
    global _CAPTURE
    _CAPTURE = pytestconfig.pluginmanager.getplugin("capturemanager")


def report(name, ok, detail):
    """Emit the criterion verdict on the real terminal, even under capture."""
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    if _CAPTURE is not None:
        with _CAPTURE.global_and_fixture_disabled():
            sys.stdout.write("\n" + line + "\n")
            sys.stdout.flush()
    else:
        print(line)
    assert ok, line


def local_max_time(times, values, center, halfwidth):
    """(t*, v*) of the maximum of `values` within `center +- halfwidth`."""
    mask = (times >= center - halfwidth) & (times <= center + halfwidth)
    idx = np.flatnonzero(mask)[np.argmax(values[np.flatnonzero(mask)])]
    return times[idx], values[idx]


def fit_velocity(times, grid, t_min=1.0):
    """Linear drift (sites per unit time) of the |grid| row-wise argmax."""
    mask = times >= t_min
    peaks = np.argmax(np.abs(grid[mask]), axis=1)
    slope = np.polyfit(times[mask], peaks, 1)[0]
    return slope


# --- shared evolutions -----------------------------------------------------------


@pytest.fixture(scope="session")
def ring15():
    basis = enumerate_basis(15, BlockadeRule(1, "periodic"))
    return {
        "basis": basis,
        "H": build_hamiltonian(basis),
        "T": build_translation(basis),
    }


@pytest.fixture(scope="session")
def ring15_background_evolution(ring15):
    """Background revival on the 15-site ring, fine time grid to 4.4."""
    basis, H = ring15["basis"], ring15["H"]
    psi0 = build_exact(parse_layout("S*5"), basis)
    dt = 0.02
    times = [0.0]
    states = [psi0]
    psi = psi0
    for k in range(int(round(4.4 / dt))):
        psi = krylov_evolve(H, psi, dt)
        states.append(psi)
        times.append((k + 1) * dt)
    return {"times": np.array(times), "states": states, "psi0": psi0}


@pytest.fixture(scope="session")
def ring15_soliton_evolution(ring15):
    """Single right-mover on the 15-site ring, fine grid to 4.0."""
    basis, H = ring15["basis"], ring15["H"]
    psi0 = build_exact(parse_layout("R S*4"), basis)
    dt = 0.02
    times = [0.0]
    states = [psi0]
    psi = psi0
    for k in range(int(round(4.0 / dt))):
        psi = krylov_evolve(H, psi, dt)
        states.append(psi)
        times.append((k + 1) * dt)
    return {"times": np.array(times), "states": states}


def desk_run(layout_text, t_final, observers=None, observe_every=0.2, **overrides):
    config = TebdConfig(**{**DESK, **overrides})
    state = build_mps(parse_layout(layout_text))
    return tebd_evolve(state, config, t_final, observers, observe_every=observe_every)


@pytest.fixture(scope="session")
def transport_grids():
    """N=60 density grids of a single right-mover and the pure background."""
    run = desk_run("S*6 R S*13", 14.08, {"n": lambda s, t: expect_number(s)})
    ref = desk_run("S*20", 14.08, {"n": lambda s, t: expect_number(s)})
    return {
        "times": run.times,
        "delta": run.records["n"] - ref.records["n"],
    }


def fidelity_run(layout_text, t_final, shifts):
    layout = parse_layout(layout_text)
    observer = translation_fidelity_observer(
        layout, shifts, (0, layout.n_sites - 1)
    )
    run = desk_run(layout_text, t_final, {"F": observer})
    return run.times, run.records["F"]


@pytest.fixture(scope="session")
def multisoliton_runs():
    layouts = {
        ("isolated", 1): "S*8 R S*11",
        ("isolated", 2): "S*5 R S*4 R S*9",
        ("isolated", 3): "S*3 R S*4 R S*4 R S*6",
        ("adjacent", 2): "S*8 R R S*10",
        ("adjacent", 3): "S*8 R R R S*9",
        ("adjacent", 4): "S*8 R R R R S*8",
    }
    out = {}
    for key, text in layouts.items():
        times, F = fidelity_run(text, 4.4, [1])
        out[key] = (times, F[:, 0])
    times, F = fidelity_run("S*20", 4.4, [0])
    out["background"] = (times, F[:, 0])
    return out


# --- criteria --------------------------------------------------------------------


def test_zero_energy_backgrounds():
    basis = enumerate_basis(18, BlockadeRule(1, "open"))
    H = build_hamiltonian(basis)
    rng = np.random.default_rng(7)
    L, R = cell_LR()
    cells = (cell_S(), L, R)
    worst = 0.0
    for _ in range(10):
        layout = SolitonLayout.of([cells[i] for i in rng.integers(3, size=6)])
        psi = build_exact(layout, basis)
        worst = max(worst, abs(np.vdot(psi, H @ psi)))
    report(
        "zero-energy backgrounds",
        worst < 1e-10,
        f"max |<H>| over 10 random S/L/R layouts = {worst:.2e} (< 1e-10)",
    )


def test_revival_period(ring15_background_evolution):
    data = ring15_background_evolution
    F = np.array([abs(np.vdot(data["psi0"], s)) ** 2 for s in data["states"]])
    t_star, F_star = local_max_time(data["times"], F, T_PERIOD, 1.0)
    report(
        "revival period",
        abs(t_star - T_PERIOD) <= 0.10,
        f"first revival at t = {t_star:.2f} (target 3.52 +- 0.10), F = {F_star:.3f}",
    )


def test_phenomenology_fixtures(ring15, ring15_soliton_evolution):
    basis, T = ring15["basis"], ring15["T"]
    data = ring15_soliton_evolution
    times = data["times"]
    targets = {
        1: fixture_states("solT4", basis, T),
        2: fixture_states("solT2", basis, T),
        3: fixture_states("sol3T4", basis, T),
    }
    # after one full period the soliton has moved one cell to the right
    shifted = build_exact(parse_layout("R S*4").shifted(1), basis)
    targets[4] = shifted
    details = []
    ok = True
    for m, target in targets.items():
        overlap = np.array([abs(np.vdot(target, s)) ** 2 for s in data["states"]])
        t_star, F_star = local_max_time(times, overlap, m * T_PERIOD / 4.0, 0.5)
        details.append(f"m={m}: t={t_star:.2f} F={F_star:.2f}")
        ok = ok and abs(t_star - m * T_PERIOD / 4.0) <= 0.15
    report(
        "quarter-period fixtures",
        ok,
        "; ".join(details) + " (each within +-0.15 of m*T/4)",
    )


def test_single_cell_overlap(ring15, ring15_background_evolution):
    basis, T = ring15["basis"], ring15["T"]
    data = ring15_background_evolution
    _, R = cell_LR()
    r_lut = R.lookup_table()
    best = (0.0, 0.0, 0.0)  # (product-fit cell overlap, t, strict RDM fidelity)
    for t_probe in (0.74, 0.78, 0.82, 0.86, 0.88):
        idx = int(round(t_probe / 0.02))
        psi = data["states"][idx]
        # try the three cell alignments; the defect-free background is
        # translation covariant so one alignment matches the cell grid
        for shift in range(3):
            vec = psi
            for _ in range(shift):
                vec = T.conj().T @ vec
            luts, _ = best_product_cell(basis, vec, 3, n_iter=40)
            mid = luts[2]  # a bulk cell
            cell_overlap = abs(np.vdot(r_lut, mid)) ** 2
            if cell_overlap > best[0]:
                rho = reduced_density_matrix(basis, vec, 6, 3)
                strict = float(np.real(r_lut.conj() @ rho @ r_lut))
                best = (cell_overlap, t_probe, strict)
    report(
        "single-cell overlap",
        best[0] >= 0.95,
        f"best-fit product-cell overlap |<R|c>|^2 = {best[0]:.3f} at t = {best[1]:.2f} "
        f"(>= 0.95); strict RDM fidelity <R|rho|R> = {best[2]:.3f} for reference",
    )


def test_directional_transport(transport_grids):
    times, delta = transport_grids["times"], transport_grids["delta"]
    velocity = fit_velocity(times, delta)  # sites per time; one cell per period
    absd = np.abs(delta[times >= 1.0])
    right = absd[:, 21:].sum()
    left = absd[:, :18].sum()
    asymmetry = right / left
    ok = abs(velocity - V_SOL) <= 0.15 and asymmetry >= 3.0
    report(
        "directional transport",
        ok,
        f"fitted velocity = {velocity:.3f} sites/time (target 0.85 +- 0.15), "
        f"right/left |dn| asymmetry = {asymmetry:.1f} (>= 3)",
    )


def test_translation_fidelity_magnitude():
    # periodic 30-site chain, evolved exactly: coarse steps to just before the
    # fourth-period window, then fine steps to resolve the F_4 peak
    basis = enumerate_basis(30, BlockadeRule(1, "periodic"))
    H = build_hamiltonian(basis)
    layout = parse_layout("S*3 R S*6")
    psi = build_exact(layout, basis)
    target = build_exact(layout.shifted(4), basis)
    t = 0.0
    for _ in range(32):
        psi = krylov_evolve(H, psi, 0.4)
        t += 0.4
    times, fids = [], []
    for _ in range(24):
        psi = krylov_evolve(H, psi, 0.1)
        t += 0.1
        times.append(t)
        fids.append(abs(np.vdot(target, psi)) ** 2)
    t_star, F_star = local_max_time(np.array(times), np.array(fids), 14.0, 1.1)
    ok = 0.20 <= F_star <= 0.45
    report(
        "translation fidelity magnitude",
        ok,
        f"F_4 peak = {F_star:.3f} at t = {t_star:.1f} (within [0.20, 0.45] near t = 14)",
    )


def test_multisoliton_decay_law(multisoliton_runs):
    # the defect-free background revival itself decays; the soliton decay
    # rate is the suppression of the first fidelity peak relative to it
    _, F_bg = local_max_time(*multisoliton_runs["background"], T_PERIOD, 0.8)

    def rate(key):
        times, F = multisoliton_runs[key]
        _, peak = local_max_time(times, F, T_PERIOD, 0.8)
        return -math.log(peak / F_bg)

    iso = [rate(("isolated", k)) for k in (1, 2, 3)]
    adj = [rate(("adjacent", k)) for k in (2, 3, 4)]
    monotone = iso[0] < iso[1] < iso[2]
    linear = all(abs(iso[k - 1] - k * iso[0]) <= 0.25 * k * iso[0] for k in (2, 3))
    block_spread = max(adj) / min(adj)
    ok = monotone and linear and block_spread <= 1.25
    report(
        "multi-soliton decay law",
        ok,
        f"background peak = {F_bg:.3f}; isolated excess rates = "
        f"{np.round(iso, 3).tolist()} (monotone: {monotone}, linear within "
        f"25%: {linear}); adjacent-block (RR, RRR, RRRR) rates = "
        f"{np.round(adj, 3).tolist()} (max/min = {block_spread:.2f} <= 1.25)",
    )


def test_collision_signature():
    # normalize each peak by the defect-free revival at the same time so the
    # drop isolates what the movers lose, not the background scrambling
    bg_times, F_bg = fidelity_run("S*20", 7.6, [0])
    _, bg_first = local_max_time(bg_times, F_bg[:, 0], T_PERIOD, 0.8)
    _, bg_second = local_max_time(bg_times, F_bg[:, 0], 2 * T_PERIOD, 0.8)

    def peak_drop(layout_text):
        times, F = fidelity_run(layout_text, 7.6, [1, 2])
        _, first = local_max_time(times, F[:, 0], T_PERIOD, 0.8)
        _, second = local_max_time(times, F[:, 1], 2 * T_PERIOD, 0.8)
        return first / bg_first - second / bg_second

    colliding = peak_drop("S*8 R S S L S*8")
    passing = peak_drop("S*8 L S S R S*8")
    ok = colliding >= 2.0 * passing
    report(
        "collision signature",
        ok,
        f"background-normalized peak-to-peak fidelity drop: colliding R..L = "
        f"{colliding:.3f}, diverging L..R = {passing:.3f} "
        f"(ratio {colliding / passing:.1f} >= 2)",
    )


def test_energy_soliton_closed_forms():
    from rydsol.states import BETA

    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    eye = np.eye(2)
    site_ops = [
        np.kron(X, np.kron(eye, eye)),
        np.kron(eye, np.kron(X, eye)),
        np.kron(eye, np.kron(eye, X)),
    ]
    worst = 0.0
    for alpha in np.linspace(-math.pi / 2 + 0.01, math.pi / 2 - 0.01, 20):
        cell = cell_energy(alpha, "right")
        vec = cell.statevector().reshape(-1)
        got = [np.vdot(vec, op @ vec).real for op in site_ops]
        s2a = math.sin(2.0 * alpha)
        expected = [
            0.0,
            s2a * math.sqrt(1.0 / (2.0 + 2.0 / BETA**2)),
            s2a * math.sqrt(1.0 / (2.0 + 2.0 * BETA**2)),
        ]
        worst = max(worst, max(abs(g - e) for g, e in zip(got, expected)))
        worst = max(worst, abs(sum(got) - cell_energy_eps(alpha)))
    grid = np.linspace(-math.pi / 2, math.pi / 2, 20001)
    extremum = max(cell_energy_eps(a) / 3.0 for a in grid)
    ok = worst < 1e-12 and abs(extremum - 0.326) <= 0.001
    report(
        "energy soliton closed forms",
        ok,
        f"max closed-form deviation = {worst:.2e} (< 1e-12); per-site energy "
        f"extremum = {extremum:.4f} (target 0.326 +- 0.001)",
    )


def test_bell_pair():
    state = build_mps(parse_layout("S*9 bell:L+,R+|L-,R- S*9"))
    entropy0 = state.entanglement_entropy(30)
    offsets = range(1, 9)

    def correlators(s, t):
        return np.array(
            [connected_correlator(s, 29 - k, 30 + k) for k in offsets]
        )

    run = tebd_evolve(
        state, TebdConfig(**DESK), 4.4, {"C": correlators}, observe_every=0.2
    )
    corr = np.abs(run.records["C"])
    argmax_k = np.array([list(offsets)[i] for i in np.argmax(corr, axis=1)])
    details = [f"S(0) = {entropy0:.6f} (ln 2 +- 1e-6)"]
    ok = abs(entropy0 - math.log(2.0)) <= 1e-6
    # the movers launch one cell either side of the centre, so the spatial
    # argmax sits at offset 1 + k when each has travelled k further sites
    for k in (1, 2, 3):
        hit_times = run.times[argmax_k == 1 + k]
        expected_t = k / V_SOL
        nearest = hit_times[np.argmin(np.abs(hit_times - expected_t))] if len(hit_times) else math.inf
        details.append(
            f"k={k}: offset {1 + k} is the spatial argmax at t={nearest:.2f} "
            f"(target {expected_t:.2f} +- 0.5)"
        )
        ok = ok and abs(nearest - expected_t) <= 0.5
    report("entangled pair", ok, "; ".join(details))


def test_engine_cross_validation():
    layout_text = "R S*5"
    basis = enumerate_basis(18, BlockadeRule(1, "open"))
    H = build_hamiltonian(basis)
    psi = build_exact(parse_layout(layout_text), basis)
    for _ in range(100):
        psi = krylov_evolve(H, psi, 0.1)

    runs = {}
    for chi in (256, 128):
        state = build_mps(parse_layout(layout_text))
        result = tebd_evolve(state, TebdConfig(dt=0.02, chi_max=chi, svd_cutoff=1e-12), 10.0)
        runs[chi] = result.final_state
    back, _ = embed_full_vector(basis, runs[256].to_statevector())
    fidelity = abs(np.vdot(psi, back)) ** 2
    chi_gap = np.abs(runs[256].expect_number() - runs[128].expect_number()).max()
    ok = fidelity >= 1.0 - 1e-6 and chi_gap <= 0.01
    report(
        "engine cross-validation",
        ok,
        f"TEBD-vs-Krylov fidelity at t=10 = {1.0 - fidelity:.2e} below 1 "
        f"(<= 1e-6); chi 256-vs-128 density gap = {chi_gap:.2e} (<= 0.01)",
    )


def test_classical_flow_structure():
    from rydsol.states import build_mps_from_angles
    from rydsol.tdvp import FlowConfig, eom_alternative, eom_full, integrate, n_expectation

    rng = np.random.default_rng(11)
    theta0 = np.array([0.9, 1.3, 0.4] * 4)
    phi0 = np.full(12, math.pi / 2)
    traj = integrate(
        theta0, phi0, FlowConfig(t_final=25.0, rtol=1e-12, atol=1e-12), sample_dt=0.1
    )
    phi_drift = np.abs(traj.phi - math.pi / 2).max()

    eom_gap = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 10))
        th = rng.uniform(0.3, math.pi / 2 - 0.3, size=n)
        ph = rng.uniform(0.3, math.pi / 2 - 0.3, size=n)
        td1, pd1 = eom_full(th, ph)
        td2, pd2 = eom_alternative(th, ph)
        eom_gap = max(eom_gap, np.abs(td1 - td2).max(), np.abs(pd1 - pd2).max())

    uniform_gap = 0.0
    for n, theta in ((5, 0.7), (8, 1.1), (9, 0.4)):
        s = math.sin(theta) ** 2
        closed = s * sum((-s) ** l for l in range(n)) / (1.0 - (-s) ** n)
        uniform_gap = max(uniform_gap, np.abs(n_expectation([theta] * n) - closed).max())

    chain = [0.8, 1.2, 0.5]
    mps = build_mps_from_angles(chain * 60)
    mid = 90
    mps_gap = np.abs(mps.expect_number()[mid : mid + 3] - n_expectation(chain)).max()

    ok = phi_drift < 1e-9 and eom_gap < 1e-10 and uniform_gap < 1e-12 and mps_gap < 1e-8
    report(
        "classical flow structure",
        ok,
        f"phi-plane drift = {phi_drift:.1e} (< 1e-9); two-form EOM gap = "
        f"{eom_gap:.1e} (< 1e-10); uniform-angle closed form gap = "
        f"{uniform_gap:.1e} (< 1e-12); MPS density gap = {mps_gap:.1e} (< 1e-8)",
    )


def test_classical_soliton_velocity():
    from rydsol.optimize import THETA_R_OPT, THETA_S_OPT
    from rydsol.tdvp import FlowConfig, integrate

    background = np.array(list(THETA_S_OPT) * 14)
    theta0 = background.copy()
    theta0[9:12] = THETA_R_OPT
    traj = integrate(theta0, None, FlowConfig(t_final=25.0), sample_dt=0.05)
    ref = integrate(background, None, FlowConfig(t_final=25.0), sample_dt=0.05)
    delta = traj.density - ref.density
    # unwrap the cyclic drift of the defect peak before fitting
    peaks = np.argmax(np.abs(delta), axis=1).astype(float)
    jumps = np.diff(peaks)
    jumps[jumps < -21] += 42
    jumps[jumps > 21] -= 42
    unwrapped = np.concatenate([[peaks[0]], peaks[0] + np.cumsum(jumps)])
    velocity = np.polyfit(traj.times, unwrapped, 1)[0]
    ok = abs(velocity - V_SOL) <= 0.25
    report(
        "classical soliton velocity",
        ok,
        f"defect drift = {velocity:.3f} sites/time (target 0.85 +- 0.25)",
    )


def test_optimizer_regression():
    from rydsol.optimize import (
        THETA_R_OPT,
        THETA_S_OPT,
        LossConfig,
        OptimizerConfig,
        _closed_penalty,
        _shift_penalty,
        loss_total,
        optimize,
    )

    loss_config = LossConfig(t_final=20.0, sample_dt=0.05)
    baseline = loss_total(THETA_S_OPT, THETA_R_OPT, loss_config)
    result = optimize(
        loss_config,
        OptimizerConfig(population=6, generations=1, seed=3),
        seed_members=np.array([list(THETA_S_OPT) + list(THETA_R_OPT)]),
    )
    # both penalties are cos^2(pi d / (2 cutoff)) pieces, which vanish exactly
    # at d = cutoff, so the piecewise switch to zero is continuous; verify by
    # bisecting the angle family to the cutoff and sampling both sides
    cutoff = 0.4

    def pairwise_distance(eps):
        t = (0.7, 0.7 + eps, 0.7)
        d = 0.0
        for i in range(3):
            for j in range(i + 1, 3):
                d += abs(abs(math.cos(t[i])) - abs(math.cos(t[j])))
                d += abs(abs(math.sin(t[i])) - abs(math.sin(t[j])))
        return d

    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if pairwise_distance(mid) < cutoff else (lo, mid)
    inside = _closed_penalty((0.7, 0.7 + lo, 0.7), cutoff)
    outside = _closed_penalty((0.7, 0.7 + hi, 0.7), cutoff)
    continuous = inside < 1e-10 and outside == 0.0

    ok = (
        math.isfinite(baseline)
        and baseline < 1e6
        and result.loss <= baseline + 1e-9
        and continuous
    )
    report(
        "optimizer regression",
        ok,
        f"baseline loss = {baseline:.4f} (finite); seeded optimum = "
        f"{result.loss:.4f} (<= baseline); penalty just inside cutoff = "
        f"{inside:.1e}, outside = {outside} (continuous: {continuous})",
    )


def test_spectral_structure():
    basis = enumerate_basis(18, BlockadeRule(1, "periodic"))
    H = build_hamiltonian(basis)
    spectrum = full_spectrum(H)
    energies = spectrum.energies
    pairing = np.abs(energies + energies[::-1]).max()

    background = build_exact(parse_layout("S*6"), basis)
    overlaps = np.abs(spectrum.eigenvectors.conj().T @ background) ** 2
    # the revival tower: one top-overlap state per level m * (2 pi / T)
    target = 2.0 * math.pi / T_PERIOD
    band = []
    for m in range(-6, 7):
        window = np.flatnonzero(np.abs(energies - m * target) < target / 2)
        band.append(window[np.argmax(overlaps[window])])
    spacings = np.diff(energies[band])
    q = len(spacings) // 4
    central = spacings[q : len(spacings) - q]
    spacing_err = np.abs(central - target).max() / target

    rng = np.random.default_rng(0)
    below = True
    for idx in band:
        window = np.flatnonzero(np.abs(energies - energies[idx]) < 1.0)
        window = window[window != idx]
        if len(window) < 10:
            continue  # too few comparison states at the spectrum's edge
        sample = rng.choice(window, size=min(40, len(window)), replace=False)
        entropies = [
            eigenstate_entanglement(spectrum.eigenvectors[:, j], 9, basis)
            for j in sample
        ]
        own = eigenstate_entanglement(spectrum.eigenvectors[:, idx], 9, basis)
        below = below and own < np.median(entropies)

    ok = pairing < 1e-9 and spacing_err <= 0.10 and below
    report(
        "spectral structure",
        ok,
        f"chirality pairing = {pairing:.1e} (< 1e-9); central band spacings "
        f"within {spacing_err:.1%} of 2 pi / T (<= 10%); band entropies below "
        f"window medians: {below}",
    )


def test_wider_blockade_model():
    rule_errors = 0
    for n in range(13, 17):
        for boundary in ("open", "periodic"):
            rule = BlockadeRule(2, boundary)
            basis = enumerate_basis(n, rule)
            brute = [m for m in range(1 << n) if rule.is_legal(m, n)]
            if basis.configs.tolist() != brute:
                rule_errors += 1

    def exact_run(n_sites, rule, layout_text, t_final, dt, densities=True):
        basis = enumerate_basis(n_sites, rule)
        H = build_hamiltonian(basis)
        layout = parse_layout(layout_text)
        psi = build_exact(layout, basis)
        target = build_exact(layout.shifted(1), basis)
        times, fids = [0.0], [abs(np.vdot(target, psi)) ** 2]
        grids = [expect_number_exact(basis, psi)] if densities else []
        for k in range(int(round(t_final / dt))):
            psi = krylov_evolve(H, psi, dt)
            times.append((k + 1) * dt)
            fids.append(abs(np.vdot(target, psi)) ** 2)
            if densities:
                grids.append(expect_number_exact(basis, psi))
        return np.array(times), np.array(fids), np.array(grids), basis

    rule5 = BlockadeRule(2, "periodic")
    times5, fid5, grid5, basis5 = exact_run(30, rule5, "S5*3 R5 S5*2", 6.0, 0.1)
    ref5 = build_exact(parse_layout("S5*6"), basis5)
    # background is stationary in density only approximately; evolve it too
    psi_ref, ref_grids = ref5, [expect_number_exact(basis5, ref5)]
    H5 = build_hamiltonian(basis5)
    for _ in range(int(round(6.0 / 0.1))):
        psi_ref = krylov_evolve(H5, psi_ref, 0.1)
        ref_grids.append(expect_number_exact(basis5, psi_ref))
    delta5 = grid5 - np.array(ref_grids)
    window = (times5 >= 1.0) & (times5 <= 4.0)
    absd = np.abs(delta5[window])
    # defect occupies sites 15..19
    asym = absd[:, 20:].sum() / absd[:, :15].sum()

    rule3 = BlockadeRule(1, "periodic")
    times3, fid3, _, _ = exact_run(30, rule3, "S*3 R S*6", 4.8, 0.1, densities=False)
    peak3 = local_max_time(times3, fid3, T_PERIOD, 1.2)[1]
    peak5 = local_max_time(times5, fid5, T_PERIOD, 1.2)[1]

    ok = rule_errors == 0 and asym >= 2.0 and peak5 < peak3
    report(
        "wider blockade model",
        ok,
        f"radius-2 dimensions match brute force for N <= 16 "
        f"({rule_errors} mismatches); right/left asymmetry = {asym:.1f} (>= 2); "
        f"first-period peak fidelity {peak5:.3f} < radius-1 value {peak3:.3f}",
    )
