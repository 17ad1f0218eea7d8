"""Command line driver: band scans, defect modes, truncation solves, M-sweeps.

Subcommands share one JSON config layout (see README); the subcommand
selects what gets computed.  Artifacts are JSON and CSV files whose floats
are serialized with a fixed 17-significant-digit scientific format, so a
rerun with the same config is byte-identical.  Every artifact embeds the
sha256 hash of the canonicalized config it came from.

Exit codes: 0 success, 2 malformed config, 3 non-convergence or
integrator failure, 4 violated mathematical precondition.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import defect as defect_mod
from . import resonance as res_mod
from .errors import ConfigError, NonConvergenceError, PreconditionError, StepSizeUnderflow
from .floquet import band_gap_scan
from .potential import Potential

_MODES = ("bands", "defect", "resonance", "bound", "edge", "sweep")

_DEFAULT_TOL = {
    "ode": 1e-13,
    "scan_ode": 1e-10,
    "root": 1e-10,
    "residual": 1e-11,
    "max_iter": 200,
}


@dataclass
class RunConfig:
    """Validated run configuration plus the hash of its canonical form."""

    potential: Potential
    mode: str
    window: tuple | None
    M: float | None
    M_list: list | None
    n_scan: int
    n_samples: int
    mode_index: int
    tolerances: dict
    config_hash: str
    raw: dict = field(repr=False, default_factory=dict)


def _canonical_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def load_config(path: str, mode: str) -> RunConfig:
    """Read and validate a JSON config for the given subcommand."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "potential" not in raw:
        raise ConfigError("config must be a JSON object with a 'potential' block")

    cfg_mode = raw.get("mode")
    if cfg_mode is not None and cfg_mode != mode:
        raise ConfigError(f"config requests mode {cfg_mode!r} but subcommand is {mode!r}")

    potential = Potential.from_config(raw["potential"])

    window = raw.get("window")
    if window is not None:
        if (not isinstance(window, (list, tuple))) or len(window) != 2:
            raise ConfigError("window must be a [z_min, z_max] pair")
        window = (float(window[0]), float(window[1]))
        if not window[1] > window[0]:
            raise ConfigError("window requires z_max > z_min")

    M = raw.get("M")
    if M is not None:
        M = float(M)
        if M <= potential.support_radius():
            raise ConfigError(
                f"M={M} must exceed the defect support radius {potential.support_radius()}"
            )

    M_list = raw.get("M_list")
    if M_list is not None:
        M_list = [float(m) for m in M_list]
        if len(M_list) < 2 or any(b <= a for a, b in zip(M_list, M_list[1:])):
            raise ConfigError("M_list must be strictly increasing with at least 2 entries")
        if M_list[0] <= potential.support_radius():
            raise ConfigError(
                f"every M in M_list must exceed the defect support radius "
                f"{potential.support_radius()}"
            )

    if mode in ("bands", "defect", "resonance", "bound", "edge", "sweep") and window is None:
        raise ConfigError(f"mode {mode!r} needs a spectral window [z_min, z_max]")
    if mode in ("resonance", "bound", "edge") and M is None:
        raise ConfigError(f"mode {mode!r} needs a truncation radius M")
    if mode == "sweep" and M_list is None:
        raise ConfigError("mode 'sweep' needs an M_list of truncation radii")
    if mode == "edge" and not potential.half_line:
        raise ConfigError("mode 'edge' needs a half_line potential")
    if mode in ("resonance", "bound") and potential.half_line:
        raise ConfigError(f"mode {mode!r} is for whole-line potentials; use 'edge'")

    tolerances = dict(_DEFAULT_TOL)
    tolerances.update(raw.get("tolerances", {}))

    return RunConfig(
        potential=potential,
        mode=mode,
        window=window,
        M=M,
        M_list=M_list,
        n_scan=int(raw.get("n_scan", 400)),
        n_samples=int(raw.get("n_samples", 600)),
        mode_index=int(raw.get("mode_index", 0)),
        tolerances=tolerances,
        config_hash=_canonical_hash(raw),
        raw=raw,
    )


# -- deterministic serialization ------------------------------------------


def _fmt(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return f"{x:.16e}"


def _json_ser(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {_json_ser(v, indent + 1)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_json_ser(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(_json_ser(obj) + "\n")


def _write_csv(path: Path, comments: list, header: list, rows: list) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append("1" if v else "0")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(_fmt(float(v)))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _pair(z: complex) -> list:
    zc = complex(z)
    return [zc.real, zc.imag]


# -- rate fitting -----------------------------------------------------------


def fit_rate(points):
    """Least-squares exponential rate from (M, value) pairs, value > 0.

    Fits log(value) against M and returns (slope, stderr).  Non-positive
    or non-finite values are dropped; at least 3 usable points required.
    """
    pts = list(points)
    x = np.asarray([p[0] for p in pts], dtype=float)
    v = np.asarray([p[1] for p in pts], dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(v, where=v > 0.0, out=np.full_like(v, np.nan))
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if len(x) < 3:
        raise ConfigError("rate fit needs at least 3 finite points")
    n = len(x)
    xbar = x.mean()
    sxx = float(((x - xbar) ** 2).sum())
    slope = float(((x - xbar) * (y - y.mean())).sum() / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (slope * x + intercept)
    s2 = float((resid**2).sum() / max(n - 2, 1))
    stderr = math.sqrt(s2 / sxx)
    return slope, stderr


# -- mode discovery shared by solver subcommands ----------------------------


def _discover_modes(cfg: RunConfig):
    p = cfg.potential
    scan_tol = cfg.tolerances["scan_ode"]
    report = band_gap_scan(p.periodic, cfg.window[0], cfg.window[1],
                           n_samples=cfg.n_samples, tol=scan_tol)
    modes = []
    for gap in report.gaps():
        modes.extend(
            defect_mod.find_defect_modes(
                p, gap, tol=cfg.tolerances["root"], n_grid=cfg.n_scan,
                ode_tol=max(scan_tol * 1e-2, 1e-13), with_profiles=False,
            )
        )
    modes.sort(key=lambda m: m.E)
    return report, modes


def _solve_for_mode(cfg: RunConfig, mode: defect_mod.DefectMode, M: float):
    p = cfg.potential
    tol = cfg.tolerances["ode"]
    res_tol = cfg.tolerances["residual"]
    max_iter = int(cfg.tolerances["max_iter"])
    if p.half_line:
        return res_mod.solve_edge(p, mode.E, M=M, tol=tol, res_tol=res_tol, max_iter=max_iter)
    if mode.E < 0.0:
        if mode.parity in ("even", "odd"):
            return res_mod.solve_bound_negative(
                p, mode.E, parity=mode.parity, M=M, tol=tol, res_tol=res_tol, max_iter=max_iter
            )
        return res_mod.solve_bound_negative(
            p, mode.E, parity=None, w0=mode.w0, M=M, tol=tol, res_tol=res_tol, max_iter=max_iter
        )
    if mode.parity in ("even", "odd"):
        return res_mod.solve_parity(
            p, mode.E, parity=mode.parity, M=M, tol=tol, res_tol=res_tol, max_iter=max_iter
        )
    return res_mod.solve_general(
        p, mode.E, mode.w0, M=M, convention=mode.normalization,
        tol=tol, res_tol=res_tol, max_iter=max_iter,
    )


def _solve_record(mode: defect_mod.DefectMode, r: res_mod.ResonanceResult) -> dict:
    return {
        "E": r.E,
        "M": r.M,
        "k": r.k,
        "parity": mode.parity,
        "z_star": _pair(r.z_star),
        "w_star": None if r.w_star is None else _pair(r.w_star),
        "asymptotic_z1": _pair(r.asymptotic_z1),
        "residual": r.residual,
        "iterations": r.iterations,
        "converged": r.converged,
        "lifetime": r.lifetime,
        "in_omega": r.in_omega,
        "margin": r.margin,
        "solver": r.mode,
        "newton_used": r.newton_used,
    }


# -- subcommand implementations ---------------------------------------------


def _run_bands(cfg: RunConfig, out_dir: Path, threads: int, verbose: bool) -> list:
    report = band_gap_scan(
        cfg.potential.periodic, cfg.window[0], cfg.window[1],
        n_samples=cfg.n_samples, tol=cfg.tolerances["scan_ode"],
    )
    doc = {
        "config_hash": cfg.config_hash,
        "window": list(cfg.window),
        "n_samples": report.n_samples,
        "edges": list(report.edges),
        "intervals": [
            {"lo": iv.lo, "hi": iv.hi, "kind": iv.kind} for iv in report.intervals
        ],
    }
    jpath = out_dir / "bands.json"
    _write_json(jpath, doc)
    cpath = out_dir / "bands.csv"
    rows = [
        (z, d.real, d.imag, 1 if abs(d) > 2.0 else 0)
        for z, d in zip(report.samples_z, report.samples_disc)
    ]
    _write_csv(
        cpath,
        [f"config_hash: {cfg.config_hash}",
         "discriminant samples; in_gap = 1 where |disc| > 2"],
        ["z", "disc_re", "disc_im", "in_gap"],
        rows,
    )
    return [jpath, cpath]


def _run_defect(cfg: RunConfig, out_dir: Path, threads: int, verbose: bool) -> list:
    p = cfg.potential
    report = band_gap_scan(p.periodic, cfg.window[0], cfg.window[1],
                           n_samples=cfg.n_samples, tol=cfg.tolerances["scan_ode"])
    artifacts = []
    mode_docs = []
    idx = 0
    for gap in report.gaps():
        for m in defect_mod.find_defect_modes(p, gap, tol=cfg.tolerances["root"],
                                              n_grid=cfg.n_scan):
            cpath = out_dir / f"defect_mode_{idx}.csv"
            _write_csv(
                cpath,
                [f"config_hash: {cfg.config_hash}",
                 f"eigenfunction of mode {idx} at E = {_fmt(m.E)}"],
                ["x", "phi", "dphi"],
                list(zip(m.profile.xs, m.profile.phi, m.profile.dphi)),
            )
            artifacts.append(cpath)
            mode_docs.append({
                "index": idx,
                "E": m.E,
                "parity": m.parity,
                "w0": m.w0,
                "k": m.k,
                "k_fit": m.k_fit,
                "residual": m.residual,
                "gap": list(m.gap),
                "normalization": m.normalization,
                "profile_csv": cpath.name,
            })
            idx += 1
    jpath = out_dir / "defect.json"
    _write_json(jpath, {
        "config_hash": cfg.config_hash,
        "window": list(cfg.window),
        "gaps": [list(g) for g in report.gaps()],
        "modes": mode_docs,
    })
    return [jpath] + artifacts


def _run_solver(cfg: RunConfig, out_dir: Path, threads: int, verbose: bool) -> list:
    _, modes = _discover_modes(cfg)
    if cfg.mode == "resonance":
        modes = [m for m in modes if m.E > 0.0]
    else:
        modes = [m for m in modes if m.E < 0.0]
    if not modes:
        raise PreconditionError(
            f"no defect mode with the required energy sign found in window {cfg.window}"
        )
    records = []
    for m in modes:
        if verbose:
            print(f"solving mode at E={m.E:.12g} (parity {m.parity})", file=sys.stderr)
        r = _solve_for_mode(cfg, m, cfg.M)
        records.append(_solve_record(m, r))
    jpath = out_dir / f"{cfg.mode}.json"
    _write_json(jpath, {"config_hash": cfg.config_hash, "M": cfg.M, "solves": records})
    return [jpath]


_NOISE_FACTOR = 100.0


@dataclass
class SweepSummary:
    """Rates fitted across an M sweep for one defect mode.

    fits maps column name to slope/stderr/target records; rows hold the
    per-M solve data; entries dropped below the noise floor are listed per
    column inside the corresponding fit record.
    """

    E: float
    k: float
    solver: str
    M_list: list
    noise_floor: float
    m_min_in_omega: float | None
    fits: dict
    rows: list


def sweep_summary(cfg: RunConfig, results: list, E: float) -> SweepSummary:
    """Assemble per-M rows, apply the noise floor, and fit the four rates.

    Fit targets: |z*-E| -> -2k, |z*-z1| -> -4k, |Theta(E;M)| -> -k and
    |dTheta(E;M)| -> +k, with k the gap decay rate at E.
    """
    k = results[0].k
    floor = _NOISE_FACTOR * np.finfo(float).eps * max(1.0, abs(E))
    rows = []
    for r in results:
        rows.append({
            "M": r.M,
            "z_star": complex(r.z_star),
            "err_vs_E": abs(r.z_star - E),
            "err_vs_asymptotic": abs(r.z_star - r.asymptotic_z1),
            "abs_theta_at_E": r.abs_theta_at_E,
            "abs_d_theta_at_E": r.abs_d_theta_at_E,
            "residual": r.residual,
            "iterations": r.iterations,
            "in_omega": r.in_omega,
        })

    fits = {}
    for key, target_rate in (
        ("err_vs_E", -2.0 * k),
        ("err_vs_asymptotic", -4.0 * k),
        ("abs_theta_at_E", -k),
        ("abs_d_theta_at_E", k),
    ):
        pts, dropped = [], []
        for row in rows:
            v = row[key]
            if key.startswith("err") and v < floor:
                dropped.append(row["M"])
                continue
            if v <= 0.0 or not np.isfinite(v):
                dropped.append(row["M"])
                continue
            pts.append((row["M"], v))
        entry = {"target": target_rate, "n_used": len(pts), "excluded_M": dropped}
        if len(pts) >= 3:
            slope, stderr = fit_rate(pts)
            entry["slope"] = slope
            entry["stderr"] = stderr
            entry["rel_dev"] = abs(slope - target_rate) / abs(target_rate) if target_rate else None
        else:
            entry["slope"] = None
            entry["stderr"] = None
            entry["rel_dev"] = None
        fits[key] = entry

    return SweepSummary(
        E=E,
        k=k,
        solver=results[0].mode,
        M_list=[r.M for r in results],
        noise_floor=floor,
        m_min_in_omega=next((row["M"] for row in rows if row["in_omega"]), None),
        fits=fits,
        rows=rows,
    )


def _run_sweep(cfg: RunConfig, out_dir: Path, threads: int, verbose: bool) -> list:
    _, modes = _discover_modes(cfg)
    if not modes:
        raise PreconditionError(f"no defect mode found in window {cfg.window}")
    if not (0 <= cfg.mode_index < len(modes)):
        raise ConfigError(f"mode_index {cfg.mode_index} out of range; found {len(modes)} modes")
    target = modes[cfg.mode_index]

    def solve_one(M: float):
        return _solve_for_mode(cfg, target, M)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(solve_one, cfg.M_list))
    else:
        results = [solve_one(M) for M in cfg.M_list]

    summary = sweep_summary(cfg, results, target.E)

    cpath = out_dir / "sweep.csv"
    _write_csv(
        cpath,
        [f"config_hash: {cfg.config_hash}",
         f"mode at E = {_fmt(summary.E)}, decay rate k = {_fmt(summary.k)}",
         "columns: truncation radius, root, |z*-E|, |z*-z1|, |Theta(E)|, "
         "|dTheta(E)| (pair solves: max |Theta+-| and sqrt |N|), residual, "
         "iterations, in_omega"],
        ["M", "re_z", "im_z", "abs_err_vs_E", "abs_err_vs_asymptotic",
         "abs_theta_at_E", "abs_d_theta_at_E", "residual", "iterations", "in_omega"],
        [
            (row["M"], row["z_star"].real, row["z_star"].imag, row["err_vs_E"],
             row["err_vs_asymptotic"], row["abs_theta_at_E"], row["abs_d_theta_at_E"],
             row["residual"], row["iterations"], row["in_omega"])
            for row in summary.rows
        ],
    )
    jpath = out_dir / "sweep.json"
    _write_json(jpath, {
        "config_hash": cfg.config_hash,
        "E": summary.E,
        "k": summary.k,
        "solver": summary.solver,
        "M_list": list(summary.M_list),
        "noise_floor": summary.noise_floor,
        "m_min_in_omega": summary.m_min_in_omega,
        "fits": summary.fits,
        "rows": [
            {
                "M": row["M"],
                "z_star": _pair(row["z_star"]),
                "err_vs_E": row["err_vs_E"],
                "err_vs_asymptotic": row["err_vs_asymptotic"],
                "abs_theta_at_E": row["abs_theta_at_E"],
                "abs_d_theta_at_E": row["abs_d_theta_at_E"],
                "residual": row["residual"],
                "iterations": row["iterations"],
                "in_omega": row["in_omega"],
            }
            for row in summary.rows
        ],
    })
    return [jpath, cpath]


_RUNNERS = {
    "bands": _run_bands,
    "defect": _run_defect,
    "resonance": _run_solver,
    "bound": _run_solver,
    "edge": _run_solver,
    "sweep": _run_sweep,
}


def run(cfg: RunConfig, out_dir: str = ".", threads: int = 1, verbose: bool = False) -> list:
    """Execute one subcommand; returns the list of written artifact paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[cfg.mode](cfg, out, threads, verbose)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="defectres",
        description="Defect modes and truncation resonances of periodic-plus-defect "
                    "Schrodinger operators on the line",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("bands", "scan a spectral window into bands and gaps"),
        ("defect", "find bound states in gaps and write their profiles"),
        ("resonance", "solve the truncated outgoing condition near each positive mode"),
        ("bound", "solve the truncated problem near each negative mode"),
        ("edge", "solve the truncated half-line problem near each edge mode"),
        ("sweep", "solve across an M_list and fit exponential rates"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="path to JSON run config")
        sp.add_argument("--out-dir", default=".", help="artifact output directory")
        sp.add_argument("--threads", type=int, default=1, help="parallel solves in sweeps")
        sp.add_argument("--verbose", action="store_true", help="progress to stderr")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.command)
        paths = run(cfg, out_dir=args.out_dir, threads=args.threads, verbose=args.verbose)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergenceError, StepSizeUnderflow) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return 4
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
