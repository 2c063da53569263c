"""Batch runner: ``anderson-lab <subcommand> [--config FILE] [--seed N] [--out DIR] [key=value ...]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 partial results.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .boltzmann import (BoltzmannError, diffusion_from_msd, fit_decay_rate,
                        integrate_autocorrelation, simulate_jump_process, velocity_autocorrelation)
from .compare import ComparisonConfig, run_comparison
from .config import SUBCOMMANDS, ConfigError, RunConfig, parse_config
from .diagrams.combinatorics import (CombinatoricsError, degree_distribution, min_nontrivial_degree,
                                     write_coefficient_csv, connected_graph_coefficient)
from .diagrams.duhamel import DuhamelError
from .diagrams.ladder import ExperimentScale, LadderError, MomentumProfile, ladder_value, write_ladder_csv
from .lattice import ComplexField, LatticeGrid, RepresentationError, write_field_csv
from .rng import stream
from .schrodinger import (EvolutionConfig, EvolutionError, MarginError, band_state, evolve,
                          gaussian_packet, point_state, run_ensemble, sample_potential)
from .spectral import (SpectralError, SpectralTables, ShellSample, build_phi, diffusion_matrix,
                       diffusion_scalar_surface, integral_probe_log, ladder_integral_probe,
                       shell_sample, shell_sample_exact)
from .wigner import WignerError, wigner_transform, write_snapshot_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4
NUMERIC_ERRORS = (SpectralError, BoltzmannError, EvolutionError, WignerError, LadderError,
                  DuhamelError, CombinatoricsError, RepresentationError, FloatingPointError,
                  np.linalg.LinAlgError)


class PartialResult(RuntimeError):
    pass


class Run:
    """Output bookkeeping for one dispatch: files, summary lines, manifest."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.summary: list[str] = []

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def add(self, *paths) -> None:
        for p in paths:
            p = Path(p)
            if p not in self.files:
                self.files.append(p)

    def json(self, name: str, obj) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return p

    def note(self, line: str) -> None:
        self.summary.append(line)

    def finish(self, status: str) -> Path:
        summ = self.out / "summary.txt"
        summ.write_text("\n".join([f"{self.cfg.subcommand}: {status}", *self.summary]) + "\n")
        outputs = {p.name: _sha256(p) for p in [*self.files, summ] if p.exists()}
        manifest = {"config": self.cfg.echo(), "version": __version__, "seed": self.cfg.seed,
                    "status": status, "outputs": outputs}
        mp = self.out / "manifest.json"
        mp.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return mp


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _sha256(p: Path) -> str:
    return hashlib.sha256(p.read_bytes()).hexdigest()


@contextmanager
def _pool(workers: int):
    if workers <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=workers) as ex:
        yield ex


def _tables(p: dict, seed: int) -> SpectralTables:
    if p.get("tables"):
        return SpectralTables.load(p["tables"])
    return build_phi(p["n_phi"], p["de"], seed, timestamp="pinned")


# -- subcommands -------------------------------------------------------------


def cmd_spectral(run: Run) -> None:
    p = run.cfg.params
    tables = build_phi(p["n_phi"], p["de"], run.cfg.seed, timestamp=p["timestamp"])
    csv_path, side = tables.save(run.path("phi.csv"))
    run.add(side)
    integral = float(np.sum(tables.phi) * tables.de)
    run.note(f"int Phi de = {integral:.6f} (expected 1; histogram estimator, tolerance ~ 1/sqrt(N))")
    run.note(f"cusp fit: {tables.cusp_fit}")


def cmd_shell(run: Run) -> None:
    p, seed = run.cfg.params, run.cfg.seed
    tables = _tables(p, seed)
    if p["width"] > 0:
        shell = shell_sample(p["a"], p["width"], p["n"], seed)
    else:
        pts = shell_sample_exact(p["a"], p["n"], stream(seed, "shell_exact"))
        shell = ShellSample(pts, p["a"], 0.0, float("nan"))
    D = diffusion_matrix(p["a"], shell, tables)
    scalars = {}
    for i, e in enumerate(p["test_energies"]):
        val, err = diffusion_scalar_surface(float(e), 200_000, seed)
        scalars[repr(float(e))] = {"D": val, "stderr": err}
    off = D.matrix - np.diag(np.diag(D.matrix))
    z = np.max(np.abs(off) / D.stderr) if D.stderr.size else 0.0
    run.json("shell.json", {"a": p["a"], "n": p["n"], "matrix": D.matrix, "stderr": D.stderr,
                            "scalar": D.scalar, "scalar_stderr": D.scalar_stderr,
                            "max_offdiag_z": float(z), "surface_scalars": scalars})
    run.note(f"D({p['a']}) = {D.scalar:.5f} +- {D.scalar_stderr:.5f}; max off-diagonal |z| = {z:.2f}")


def cmd_boltzmann(run: Run) -> None:
    p, seed = run.cfg.params, run.cfg.seed
    tables = _tables(p, seed)
    rate = 2 * np.pi * float(tables.phi_at(p["a"]))
    T = p["free_times"] / rate
    traj = simulate_jump_process(p["a"], p["n"], T, seed, tables)
    traj.write_summary_csv(run.path("trajectories.csv"))
    lags = np.linspace(0, min(T, 12 / rate), p["lags"])
    ac = velocity_autocorrelation(traj, lags)
    ac.write_csv(run.path("autocorrelation.csv"))
    r, r_err = fit_decay_rate(ac)
    integral = integrate_autocorrelation(ac, r)
    D_msd, D_msd_err = diffusion_from_msd(traj)
    run.json("boltzmann.json", {"a": p["a"], "rate": rate, "T": T, "fitted_decay_rate": [r, r_err],
                                "autocorrelation_integral": integral, "D_msd": [D_msd, D_msd_err],
                                "energy_drift": traj.energy_drift(),
                                "mean_jumps": float(traj.njumps.mean())})
    run.note(f"D from MSD slope {D_msd:.5f} +- {D_msd_err:.5f}; "
             f"autocorrelation trace/3 {np.trace(integral) / 3:.5f}")


def _initial_state(p: dict, grid: LatticeGrid):
    if p["state"] == "band":
        return band_state(grid, p["band_lo"], p["band_hi"], width=p["width"], ramp=p["ramp"])
    if p["state"] == "gaussian":
        return gaussian_packet(grid, p["width"], p0=(0.25, 0.25, 0.25))
    return point_state(grid)


def cmd_evolve(run: Run) -> None:
    p, seed = run.cfg.params, run.cfg.seed
    grid = LatticeGrid(p["L"])
    psi0 = _initial_state(p, grid)
    cfg = EvolutionConfig(p["lam"], p["t"], p["dt"], p["L"], p["scheme"], p["enforce_margin"])
    checkpoints = p["checkpoints"] or (p["t"],)
    with _pool(p["workers"]) as pool:
        rec = run_ensemble(psi0, cfg, p["R"], list(p["observables"]), seed, p["distribution"],
                           checkpoints=checkpoints, pool=pool)
    rec.write(run.path("ensemble.json"))
    V = sample_potential(grid, p["distribution"], seed, index=0)
    final = evolve(psi0, V, cfg)
    write_field_csv(final, run.path("field.csv"))
    run.note(f"norm^2 of realization 0 at t = {p['t']}: {final.norm2():.12f}")


def cmd_wigner(run: Run) -> None:
    p, seed = run.cfg.params, run.cfg.seed
    grid = LatticeGrid(p["L"])
    errs_v, errs_x = [], []
    first = None
    for i in range(p["n_states"]):
        rng = stream(seed, "wigner_state", i)
        vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        psi = ComplexField(grid, vals / np.linalg.norm(vals))
        W = wigner_transform(psi)
        errs_v.append(float(np.max(np.abs(W.v_marginal() - _v_density(psi.values)))))
        errs_x.append(float(np.max(np.abs(W.x_marginal() - _x_density(psi.values)))))
        if first is None:
            first = W
    L = p["L"]
    x_edges = np.linspace(-L / 2 * p["eps"], L / 2 * p["eps"], p["x_bins"] + 1)
    e_edges = np.linspace(0, 6, p["e_bins"] + 1)
    write_snapshot_csv(first.snapshot(p["eps"], x_edges, e_edges), run.path("wigner_snapshot.csv"))
    run.json("wigner.json", {"n_states": p["n_states"], "L": L, "max_v_marginal_error": max(errs_v),
                             "max_x_marginal_error": max(errs_x)})
    run.note(f"marginal errors: v {max(errs_v):.2e}, x {max(errs_x):.2e}")


def _v_density(values) -> np.ndarray:
    """``2^3 |psi(x)|^2`` on integer points of the half-lattice, zero on the rest."""
    L = values.shape[0]
    out = np.zeros((2 * L,) * 3)
    out[::2, ::2, ::2] = 8 * np.abs(np.fft.fftshift(values)) ** 2
    return out


def _x_density(values) -> np.ndarray:
    """``|psi_hat(v)|^2`` on the ``(2L)^3`` momentum grid by zero-padded FFT."""
    L = values.shape[0]
    pad = np.zeros((2 * L,) * 3, dtype=complex)
    pad[:L, :L, :L] = np.fft.fftshift(values)
    return np.abs(np.fft.fftn(pad)) ** 2


def cmd_ladder(run: Run) -> None:
    p, seed = run.cfg.params, run.cfg.seed
    tables = _tables(p, seed)
    sc = ExperimentScale(p["lam"], p["T"], p["kappa"], p["delta"])
    prof = MomentumProfile(p["band_lo"], p["band_hi"], p["ramp"])
    kmax = sc.K if p["k_max"] < 0 else p["k_max"]
    terms = [ladder_value(k, sc, prof, tables, p["n_mc"], seed) for k in range(max(kmax, 1))]
    write_ladder_csv(terms, sc, run.path("ladder.csv"))
    total = sum(t.value for t in terms)
    info = {"scale": sc.as_dict(), "sum": total,
            "sum_stderr": float(np.sqrt(sum(t.stderr**2 for t in terms))),
            "flagged_terms": [k for k, t in enumerate(terms) if t.flagged]}
    if p["probes"]:
        logp = integral_probe_log(3.0, sc.lam, sc.eta, tables, seed=seed)
        lad = ladder_integral_probe(3.0, 3.0, (0.0, 0.0, 0.0), sc.lam, sc.eta, tables, seed=seed)
        info["probes"] = {"log_integral": [logp.value, logp.stderr],
                          "ladder_integral": [lad.value, lad.stderr]}
    run.json("ladder.json", info)
    run.note(f"sum_k V(k) over k < {len(terms)} = {total:.4f}")
    bad = info["flagged_terms"]
    if bad:
        run.note(f"terms with relative stderr above 50%: {bad}")
        raise PartialResult(f"ladder terms {bad} have relative stderr above 50%")


def cmd_coeffs(run: Run) -> None:
    p = run.cfg.params
    write_coefficient_csv(run.path("coefficients.csv"), p["n_max"])
    dist = {k: degree_distribution(k) for k in range(1, p["degree_k_max"] + 1)}
    mins = {k: min_nontrivial_degree(k) for k in range(2, p["degree_k_max"] + 1)}
    run.json("degrees.json", {"distribution": dist, "min_nontrivial_degree": mins})
    cs = [connected_graph_coefficient(n) for n in range(1, p["n_max"] + 1)]
    run.note(f"c(n), n = 1..{p['n_max']}: {cs}")


def cmd_compare(run: Run) -> None:
    p, seed = run.cfg.params, run.cfg.seed
    tables = _tables(p, seed)
    fields = ComparisonConfig.__dataclass_fields__
    cc = ComparisonConfig(**{k: v for k, v in p.items() if k in fields}, seed=seed)
    with _pool(p["workers"]) as pool:
        report = run_comparison(cc, tables, pool)
    run.add(*report.write(run.out))
    for k, v in report.flags.items():
        run.note(f"{k}: {v}")
    if report.partial:
        raise PartialResult("; ".join(f["step"] + ": " + f["error"] for f in report.failures))


COMMANDS = {"spectral": cmd_spectral, "shell": cmd_shell, "boltzmann": cmd_boltzmann,
            "evolve": cmd_evolve, "wigner": cmd_wigner, "ladder": cmd_ladder,
            "coeffs": cmd_coeffs, "compare": cmd_compare}


def dispatch(cfg: RunConfig) -> int:
    run = Run(cfg)
    try:
        with np.errstate(over="raise", invalid="raise", divide="ignore", under="ignore"):
            COMMANDS[cfg.subcommand](run)
    except PartialResult as exc:
        run.note(f"partial: {exc}")
        run.finish("partial")
        print(f"partial results: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (MarginError, ConfigError, ValueError) as exc:
        run.finish("config error")
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        run.finish("numerical failure")
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    run.finish("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anderson-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value file or a previous manifest.json")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config file)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("overrides", nargs="*", metavar="key=value")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.subcommand, args.config, args.overrides, args.seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
