"""Configuration-driven batch runner for the figure-level experiments.

Experiments are YAML files selecting an engine (tebd, krylov, ed_spectrum,
tdvp, optimize), a geometry, an initial layout, and observables; each
bundled config carries a reduced ``desk`` profile (the default) alongside
the full-scale parameters.  Runs write CSV time series plus a JSON manifest
with per-file checksums into their own output directory.
"""

from __future__ import annotations

import copy
import importlib.resources
import os
import sys
from pathlib import Path

import click
import yaml

ENGINES = ("tebd", "krylov", "ed_spectrum", "tdvp", "optimize")

_OBSERVABLES = {
    "tebd": {"number", "delta_number", "energy_density", "entropy", "fidelity", "correlator"},
    "krylov": {"number", "delta_number", "energy_density", "fidelity"},
    "ed_spectrum": {"spectrum"},
    "tdvp": {"trajectory"},
    "optimize": {"history"},
}


def _apply_thread_override():
    """Honor RYDSOL_THREADS for the BLAS/OpenMP pools."""
    value = os.environ.get("RYDSOL_THREADS")
    if not value:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, value)
    try:  # limit pools that loaded before the env vars took effect
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=int(value))
    except ImportError:
        pass


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path, profile: str = "desk") -> dict:
    """Read a YAML experiment config and apply the requested profile."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise click.ClickException(f"{path}: config must be a mapping")
    profiles = raw.pop("profiles", {}) or {}
    cfg = raw
    if profile != "full":
        if profile not in profiles:
            raise click.ClickException(
                f"{path}: profile {profile!r} not defined (has: full, "
                + ", ".join(sorted(profiles)) + ")"
            )
        cfg = _deep_merge(raw, profiles[profile])
    cfg["profile"] = profile
    return cfg


def validate_config(cfg: dict) -> list:
    """Schema check without execution; returns `field: message` strings."""
    from .states import LayoutError, parse_layout

    errors = []
    engine = cfg.get("engine")
    if engine not in ENGINES:
        errors.append(f"engine: must be one of {ENGINES}, got {engine!r}")
        return errors

    n_sites = None
    if engine in ("tebd", "krylov", "ed_spectrum"):
        geom = cfg.get("geometry")
        if not isinstance(geom, dict):
            errors.append("geometry: required mapping with n_sites/boundary/radius")
        else:
            n_sites = geom.get("n_sites")
            if not isinstance(n_sites, int) or n_sites < 2:
                errors.append(f"geometry.n_sites: must be an integer >= 2, got {n_sites!r}")
            if geom.get("boundary", "open") not in ("open", "periodic"):
                errors.append(f"geometry.boundary: must be open|periodic, got {geom.get('boundary')!r}")
            if geom.get("radius", 1) not in (1, 2):
                errors.append(f"geometry.radius: must be 1 or 2, got {geom.get('radius')!r}")
        if engine == "tebd" and geom and geom.get("boundary", "open") == "periodic":
            errors.append("geometry.boundary: the tebd engine supports open chains only")
        if engine == "tebd" and geom and geom.get("radius", 1) != 1:
            errors.append("geometry.radius: the tebd engine supports radius 1 only")

    for key in ("layout", "reference_layout"):
        if engine in ("tebd", "krylov") and (key == "layout" or key in cfg):
            text = cfg.get(key)
            if not isinstance(text, str):
                errors.append(f"{key}: required layout string")
                continue
            try:
                layout = parse_layout(text)
            except LayoutError as exc:
                errors.append(f"{key}: {exc}")
                continue
            if n_sites is not None and layout.n_sites != n_sites:
                errors.append(
                    f"{key}: covers {layout.n_sites} sites but geometry.n_sites = {n_sites}"
                )

    observables = cfg.get("observables", [])
    allowed = _OBSERVABLES[engine]
    for name in observables:
        if name not in allowed:
            errors.append(f"observables: {name!r} not valid for engine {engine!r}")
    if "delta_number" in observables and "reference_layout" not in cfg:
        errors.append("observables: delta_number requires a reference_layout")

    if "fidelity" in observables:
        fid = cfg.get("fidelity")
        if not isinstance(fid, dict) or "shifts" not in fid:
            errors.append("fidelity: required mapping with a `shifts` list")
        else:
            region = fid.get("region")
            if engine == "tebd" and region is None:
                errors.append("fidelity.region: required for the tebd engine")
            if region is not None and n_sites is not None:
                a, b = region
                if not (0 <= a <= b < n_sites):
                    errors.append(
                        f"fidelity.region: [{a}, {b}] outside the chain 0..{n_sites - 1}"
                    )
            if "layout" in cfg and not any(e.startswith("layout") for e in errors):
                layout = parse_layout(cfg["layout"])
                for m in fid["shifts"]:
                    try:
                        layout.shifted(m)
                    except ValueError as exc:
                        errors.append(f"fidelity.shifts: shift {m}: {exc}")

    if "correlator" in observables:
        corr = cfg.get("correlator")
        if not isinstance(corr, dict) or "center" not in corr:
            errors.append("correlator: required mapping with `center` (and `max_offset`)")
        elif n_sites is not None:
            c, k = corr["center"], corr.get("max_offset", 1)
            if not (c - 2 - k >= 0 and c + k + 1 <= n_sites - 1):
                errors.append("correlator: mirrored pairs leave the chain")

    if engine in ("tebd", "krylov"):
        if not isinstance(cfg.get("t_final"), (int, float)) or cfg.get("t_final", 0) <= 0:
            errors.append("t_final: required positive number")

    if engine == "tdvp":
        tdvp = cfg.get("tdvp")
        if not isinstance(tdvp, dict):
            errors.append("tdvp: required mapping (n_sites, background, ...)")
        else:
            n = tdvp.get("n_sites")
            if not isinstance(n, int) or n < 3 or n % 3:
                errors.append(f"tdvp.n_sites: must be a positive multiple of 3, got {n!r}")
            for key in ("background", "defect"):
                angles = tdvp.get(key)
                if key == "defect" and angles is None:
                    continue
                if not (isinstance(angles, (list, tuple)) and len(angles) == 3):
                    errors.append(f"tdvp.{key}: must be a list of 3 angles")
            cell = tdvp.get("defect_cell", 0)
            if isinstance(n, int) and n % 3 == 0 and not 0 <= cell < n // 3:
                errors.append(f"tdvp.defect_cell: {cell} outside 0..{n // 3 - 1}")

    if engine == "optimize":
        opt = cfg.get("optimize", {})
        if opt.get("population", 60) < 5:
            errors.append("optimize.population: must be at least 5")
    return errors


# --- engine runners --------------------------------------------------------------


def _geometry(cfg):
    from .basis import BlockadeRule

    geom = cfg["geometry"]
    rule = BlockadeRule(radius=geom.get("radius", 1), boundary=geom.get("boundary", "open"))
    return geom["n_sites"], rule


def _run_tebd(cfg, out_dir, manifest):
    import numpy as np

    from .io import write_csv, write_grid_csv
    from .states import parse_layout, build_mps
    from .tebd import (
        TebdConfig,
        connected_correlator,
        expect_energy_density,
        expect_number,
        tebd_evolve,
        translation_fidelity_observer,
    )

    observables = cfg.get("observables", ["number"])
    layout = parse_layout(cfg["layout"])
    tebd_cfg = TebdConfig(**cfg.get("tebd", {}))
    observers = {}
    if "number" in observables or "delta_number" in observables:
        observers["number"] = lambda s, t: expect_number(s)
    if "energy_density" in observables:
        observers["energy_density"] = lambda s, t: expect_energy_density(s)
    if "entropy" in observables:
        observers["entropy"] = lambda s, t: np.array(
            [s.entanglement_entropy(cut) for cut in range(1, s.n_sites)]
        )
    if "fidelity" in observables:
        fid = cfg["fidelity"]
        observers["fidelity"] = translation_fidelity_observer(
            layout, fid["shifts"], tuple(fid["region"])
        )
    if "correlator" in observables:
        corr = cfg["correlator"]
        center, max_offset = corr["center"], corr.get("max_offset", 1)

        def correlators(s, t):
            return np.array(
                [
                    connected_correlator(s, center - 1 - k, center + k)
                    for k in range(1, max_offset + 1)
                ]
            )

        observers["correlator"] = correlators

    state = build_mps(layout)
    result = tebd_evolve(
        state,
        tebd_cfg,
        float(cfg["t_final"]),
        observers,
        observe_every=cfg.get("observe_every", 0.1),
    )
    manifest.add_result("max_step_discarded", result.max_step_discarded)

    outputs = []
    if "number" in observables:
        write_grid_csv(out_dir / "number.csv", result.times, result.records["number"])
        outputs.append("number.csv")
    if "energy_density" in observables:
        write_grid_csv(
            out_dir / "energy_density.csv", result.times, result.records["energy_density"]
        )
        outputs.append("energy_density.csv")
    if "entropy" in observables:
        rows = []
        for t, row in zip(result.times, result.records["entropy"]):
            rows.extend((t, cut + 1, v) for cut, v in enumerate(row))
        write_csv(out_dir / "entropy.csv", ["t", "cut", "S"], rows)
        outputs.append("entropy.csv")
    if "fidelity" in observables:
        rows = []
        for t, row in zip(result.times, result.records["fidelity"]):
            rows.extend((t, m, v) for m, v in zip(cfg["fidelity"]["shifts"], row))
        write_csv(out_dir / "fidelity.csv", ["t", "m", "F"], rows)
        outputs.append("fidelity.csv")
    if "correlator" in observables:
        rows = []
        for t, row in zip(result.times, result.records["correlator"]):
            rows.extend((t, k + 1, v) for k, v in enumerate(row))
        write_csv(out_dir / "correlator.csv", ["t", "offset", "C"], rows)
        outputs.append("correlator.csv")

    if "delta_number" in observables:
        ref_layout = parse_layout(cfg["reference_layout"])
        ref = tebd_evolve(
            build_mps(ref_layout),
            tebd_cfg,
            float(cfg["t_final"]),
            {"number": lambda s, t: expect_number(s)},
            observe_every=cfg.get("observe_every", 0.1),
        )
        delta = result.records["number"] - ref.records["number"]
        write_grid_csv(out_dir / "delta_number.csv", result.times, delta)
        outputs.append("delta_number.csv")
    return outputs


def _run_krylov(cfg, out_dir, manifest):
    import numpy as np

    from .basis import enumerate_basis
    from .exact import (
        build_hamiltonian,
        expect_energy_density_exact,
        expect_number_exact,
        krylov_evolve,
    )
    from .io import write_csv, write_grid_csv
    from .states import build_exact, parse_layout

    n_sites, rule = _geometry(cfg)
    basis = enumerate_basis(n_sites, rule)
    H = build_hamiltonian(basis)
    observables = cfg.get("observables", ["number"])
    tol = cfg.get("krylov", {}).get("tol", 1e-10)
    dt = cfg.get("observe_every", 0.1)
    t_final = float(cfg["t_final"])
    n_steps = int(round(t_final / dt))

    def evolve_with_numbers(layout_text):
        psi = build_exact(parse_layout(layout_text), basis)
        states = [psi]
        for _ in range(n_steps):
            psi = krylov_evolve(H, psi, dt, tol=tol)
            states.append(psi)
        return states

    run_states = evolve_with_numbers(cfg["layout"])
    times = np.arange(n_steps + 1) * dt

    outputs = []
    if "number" in observables or "delta_number" in observables:
        grid = np.array([expect_number_exact(basis, s) for s in run_states])
        if "number" in observables:
            write_grid_csv(out_dir / "number.csv", times, grid)
            outputs.append("number.csv")
        if "delta_number" in observables:
            ref_states = evolve_with_numbers(cfg["reference_layout"])
            ref_grid = np.array([expect_number_exact(basis, s) for s in ref_states])
            write_grid_csv(out_dir / "delta_number.csv", times, grid - ref_grid)
            outputs.append("delta_number.csv")
    if "energy_density" in observables:
        grid = np.array([expect_energy_density_exact(basis, s) for s in run_states])
        write_grid_csv(out_dir / "energy_density.csv", times, grid)
        outputs.append("energy_density.csv")
    if "fidelity" in observables:
        layout = parse_layout(cfg["layout"])
        shifts = cfg["fidelity"]["shifts"]
        targets = [build_exact(layout.shifted(m), basis) for m in shifts]
        rows = []
        for t, s in zip(times, run_states):
            for m, tgt in zip(shifts, targets):
                rows.append((t, m, abs(np.vdot(tgt, s)) ** 2))
        write_csv(out_dir / "fidelity.csv", ["t", "m", "F"], rows)
        outputs.append("fidelity.csv")
    return outputs


def _run_spectrum(cfg, out_dir, manifest):
    import numpy as np

    from .basis import enumerate_basis
    from .exact import (
        build_hamiltonian,
        eigenstate_entanglement,
        full_spectrum,
        overlap_scatter,
    )
    from .io import write_csv
    from .states import build_exact, parse_layout

    n_sites, rule = _geometry(cfg)
    basis = enumerate_basis(n_sites, rule)
    H = build_hamiltonian(basis)
    spec_cfg = cfg.get("spectrum", {})
    spectrum = full_spectrum(H, basis, momentum=spec_cfg.get("momentum"))

    overlaps = None
    if "overlap_layout" in spec_cfg:
        ref = build_exact(parse_layout(spec_cfg["overlap_layout"]), basis)
        overlaps = overlap_scatter(spectrum, ref)[:, 1]
    cut = spec_cfg.get("entropy_cut", n_sites // 2)

    rows = []
    for idx, energy in enumerate(spectrum.energies):
        vec = spectrum.eigenvectors[:, idx]
        entropy = eigenstate_entanglement(vec, cut, basis)
        rows.append((idx, energy, 0.0 if overlaps is None else overlaps[idx], entropy))
    write_csv(out_dir / "spectrum.csv", ["index", "energy", "overlap", "entropy"], rows)
    return ["spectrum.csv"]


def _run_tdvp(cfg, out_dir, manifest):
    import numpy as np

    from .io import write_grid_csv
    from .tdvp import FlowConfig, integrate

    tdvp = cfg["tdvp"]
    n = tdvp["n_sites"]
    n_cells = n // 3
    background = [float(v) for v in tdvp["background"]]
    theta0 = np.array(background * n_cells)
    defect = tdvp.get("defect")
    if defect is not None:
        cell = tdvp.get("defect_cell", 0)
        theta0[3 * cell : 3 * cell + 3] = [float(v) for v in defect]
    phi0 = tdvp.get("phi")
    flow = FlowConfig(t_final=float(tdvp.get("t_final", 25.0)))
    sample_dt = float(tdvp.get("sample_dt", 0.01))

    traj = integrate(theta0, phi0, flow, sample_dt=sample_dt)
    write_grid_csv(out_dir / "theta.csv", traj.times, traj.theta)
    write_grid_csv(out_dir / "density.csv", traj.times, traj.density)
    outputs = ["theta.csv", "density.csv"]
    if traj.phi is not None:
        write_grid_csv(out_dir / "phi.csv", traj.times, traj.phi)
        outputs.append("phi.csv")
    if defect is not None and tdvp.get("reference", True):
        ref = integrate(np.array(background * n_cells), phi0, flow, sample_dt=sample_dt)
        write_grid_csv(out_dir / "delta_density.csv", traj.times, traj.density - ref.density)
        outputs.append("delta_density.csv")
    return outputs


def _run_optimize(cfg, out_dir, manifest):
    import numpy as np

    from .io import write_csv
    from .optimize import (
        THETA_R_OPT,
        THETA_S_OPT,
        LossConfig,
        OptimizerConfig,
        optimize,
    )

    opt = cfg.get("optimize", {})
    loss_keys = (
        "n_cells",
        "closed_window",
        "shift_window",
        "closed_cutoff",
        "shift_cutoff",
        "shift_penalty_weight",
        "t_final",
        "sample_dt",
    )
    loss_kwargs = {k: opt[k] for k in loss_keys if k in opt}
    for key in ("closed_window", "shift_window"):
        if key in loss_kwargs:
            loss_kwargs[key] = tuple(loss_kwargs[key])
    opt_kwargs = {
        k: opt[k]
        for k in ("population", "mutation", "recombination", "generations")
        if k in opt
    }
    if "mutation" in opt_kwargs:
        opt_kwargs["mutation"] = tuple(opt_kwargs["mutation"])
    opt_kwargs["seed"] = int(cfg.get("seed", 0))

    seed_members = opt.get("seed_members")
    if seed_members == "published":
        seed_members = np.array([list(THETA_S_OPT) + list(THETA_R_OPT)])
    elif seed_members is not None:
        seed_members = np.asarray(seed_members, dtype=float)

    result = optimize(LossConfig(**loss_kwargs), OptimizerConfig(**opt_kwargs), seed_members)
    write_csv(
        out_dir / "history.csv",
        ["generation", "best_loss"],
        list(enumerate(result.history)),
    )
    manifest.add_result("theta_s", [float(v) for v in result.theta_s])
    manifest.add_result("theta_r", [float(v) for v in result.theta_r])
    manifest.add_result("loss", result.loss)
    return ["history.csv"]


_RUNNERS = {
    "tebd": _run_tebd,
    "krylov": _run_krylov,
    "ed_spectrum": _run_spectrum,
    "tdvp": _run_tdvp,
    "optimize": _run_optimize,
}


# --- commands --------------------------------------------------------------------


def bundled_configs():
    """(name, path) pairs of the configs shipped inside the package."""
    root = importlib.resources.files("rydsol") / "configs"
    return sorted((p.name[: -len(".yaml")], p) for p in root.iterdir() if p.name.endswith(".yaml"))


def _resolve_config_path(name_or_path: str) -> Path:
    path = Path(name_or_path)
    if path.exists():
        return path
    for name, bundled in bundled_configs():
        if name == name_or_path:
            return Path(str(bundled))
    raise click.ClickException(
        f"config {name_or_path!r} is neither a file nor a bundled experiment "
        "(see `rydsol list`)"
    )


@click.group()
def main():
    """Batch experiments for blockaded-chain soliton dynamics."""
    _apply_thread_override()


@main.command()
@click.argument("config")
@click.option("--profile", type=click.Choice(["desk", "full"]), default="desk", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Override the config's RNG seed.")
def run(config, profile, out_dir, seed):
    """Execute an experiment CONFIG (a path or a bundled name)."""
    from . import __version__
    from .io import RunManifest

    path = _resolve_config_path(config)
    cfg = load_config(path, profile)
    if seed is not None:
        cfg["seed"] = seed
    errors = validate_config(cfg)
    if errors:
        for err in errors:
            click.echo(f"error: {err}", err=True)
        sys.exit(1)

    name = cfg.get("name", path.stem)
    out_path = Path(out_dir) if out_dir else Path("runs") / f"{name}-{profile}"
    out_path.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg, out_path, __version__)
    try:
        outputs = _RUNNERS[cfg["engine"]](cfg, out_path, manifest)
    except Exception as exc:
        raise click.ClickException(f"{name} ({cfg['engine']} engine): {exc}") from exc
    for fname in outputs:
        manifest.add_output(out_path / fname)
    target = manifest.finish()
    click.echo(f"wrote {len(outputs)} output file(s) + {target.name} to {out_path}")


@main.command()
@click.argument("config")
@click.option("--profile", type=click.Choice(["desk", "full"]), default="desk", show_default=True)
def validate(config, profile):
    """Schema-check a CONFIG without running it."""
    path = _resolve_config_path(config)
    cfg = load_config(path, profile)
    errors = validate_config(cfg)
    if errors:
        for err in errors:
            click.echo(f"error: {err}", err=True)
        sys.exit(1)
    click.echo("ok")


@main.command(name="list")
def list_experiments():
    """Catalog of the bundled experiment configs."""
    for name, path in bundled_configs():
        with open(str(path)) as fh:
            cfg = yaml.safe_load(fh)
        desc = cfg.get("description", "")
        click.echo(f"{name:32s} [{cfg.get('engine', '?'):11s}] {desc}")


if __name__ == "__main__":
    main()
