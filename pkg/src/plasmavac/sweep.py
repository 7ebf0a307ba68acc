"""Batch driver: stability diagram over a grid of basic states.

Usage::

    python3 -m plasmavac --config sweep.json --out results/ --jobs 4

The config is JSON::

    {
      "base_state": {"rho": 1, "sound_speed": 2, "v": 1.5, "H": 1, "Hc": 0.7, "eps": 0.01},
      "grid": {"H": {"min": 0.5, "max": 2.5, "count": 5}, "v": {"values": [1.2, 1.5]}},
      "tasks": ["hypotheses", "roots", "energy"],
      "hemisphere_n": 16,
      "tol": 1e-9
    }

Rows are emitted in lexicographic order of the grid indices, axes taken in
config order, whatever the completion order of the worker pool.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .grids import hemisphere_grid, hemisphere_grid_array
from .state import STATE_KEYS, BasicState, HypothesisError, check_hypotheses, root_existence_class, stability_class

__all__ = ["SweepConfig", "ConfigError", "hemisphere_grid", "load_config", "run_sweep", "main"]

TASKS = ("hypotheses", "roots", "symmetrizers", "energy", "lifting")
EXIT_OK, EXIT_INCONSISTENT, EXIT_CONFIG = 0, 1, 2
POLE_CLEARANCE = 1e-3
DEFAULT_GAMMAS = (1e-2, 1e-3, 1e-4, 1e-5)
SLOPE_TOL = 0.1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    base_state: dict
    grid: dict  # axis -> tuple of values, in config order
    tasks: tuple
    hemisphere_n: int = 16
    tol: float = 1e-9
    out: str | None = None
    jobs: int = 1
    gammas: tuple = DEFAULT_GAMMAS
    g_hat: tuple = (1.0, 0.5, 0.25)
    lifting: dict = field(default_factory=dict)

    def states(self):
        """(indices, parameter dict) in lexicographic index order."""
        axes = list(self.grid)
        for idx in itertools.product(*(range(len(self.grid[a])) for a in axes)):
            params = dict(self.base_state)
            params.update({a: self.grid[a][i] for a, i in zip(axes, idx)})
            yield idx, params

    def echo(self) -> dict:
        d = asdict(self)
        d["grid"] = {k: list(v) for k, v in self.grid.items()}
        d.pop("out")
        d.pop("jobs")
        return d


def _axis_values(name: str, spec) -> tuple:
    if isinstance(spec, list):
        spec = {"values": spec}
    if not isinstance(spec, dict):
        raise ConfigError(f"grid axis {name!r} must be a list or a mapping")
    if "values" in spec:
        vals = spec["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"grid axis {name!r} needs a nonempty list of values")
    else:
        try:
            lo, hi, n = float(spec["min"]), float(spec["max"]), spec["count"]
        except KeyError as exc:
            raise ConfigError(f"grid axis {name!r} is missing {exc}") from None
        if not isinstance(n, int) or n <= 0:
            raise ConfigError(f"grid axis {name!r} needs a positive integer count")
        vals = np.linspace(lo, hi, n).tolist()
    try:
        out = tuple(float(v) for v in vals)
    except (TypeError, ValueError):
        raise ConfigError(f"grid axis {name!r} has non-numeric values") from None
    if not all(math.isfinite(v) for v in out):
        raise ConfigError(f"grid axis {name!r} has non-finite values")
    return out


def parse_config(data: dict, **overrides) -> SweepConfig:
    """Validate a config mapping; keyword overrides (from CLI flags) win when not None."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    known = {"base_state", "grid", "tasks", "hemisphere_n", "tol", "out", "jobs", "gammas", "g_hat", "lifting"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    base = data.get("base_state")
    if not isinstance(base, dict):
        raise ConfigError("base_state must be a mapping")
    missing = [k for k in STATE_KEYS if k not in base]
    extra = sorted(set(base) - set(STATE_KEYS))
    if missing or extra:
        raise ConfigError(f"base_state missing {missing} / unknown {extra}")
    try:
        base = {k: float(base[k]) for k in STATE_KEYS}
    except (TypeError, ValueError):
        raise ConfigError("base_state values must be numbers") from None

    grid = data.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid must be a mapping")
    bad = sorted(set(grid) - set(STATE_KEYS))
    if bad:
        raise ConfigError(f"unknown grid axes: {', '.join(bad)}")
    grid = {k: _axis_values(k, v) for k, v in grid.items()}

    tasks = data.get("tasks")
    if isinstance(tasks, str):
        tasks = [t.strip() for t in tasks.split(",") if t.strip()]
    if not tasks:
        raise ConfigError("tasks must be nonempty")
    bad = [t for t in tasks if t not in TASKS]
    if bad:
        raise ConfigError(f"unknown tasks: {', '.join(bad)}")
    tasks = tuple(t for t in TASKS if t in tasks)

    n = data.get("hemisphere_n", 16)
    if not isinstance(n, int) or n < 8:
        raise ConfigError("hemisphere_n must be an integer >= 8")
    tol = data.get("tol", 1e-9)
    if not isinstance(tol, (int, float)) or not tol > 0:
        raise ConfigError("tol must be a positive number")
    jobs = data.get("jobs", 1)
    if not isinstance(jobs, int) or jobs < 1:
        raise ConfigError("jobs must be a positive integer")
    gammas = data.get("gammas", DEFAULT_GAMMAS)
    if not gammas or any(not (isinstance(g, (int, float)) and 0 < g < 1) for g in gammas):
        raise ConfigError("gammas must be a nonempty list in (0, 1)")
    g_hat = data.get("g_hat", (1.0, 0.5, 0.25))
    if len(g_hat) != 3:
        raise ConfigError("g_hat must have three entries")
    lifting = data.get("lifting", {})
    if not isinstance(lifting, dict):
        raise ConfigError("lifting must be a mapping")
    return SweepConfig(
        base, grid, tasks, n, float(tol), data.get("out"), jobs,
        tuple(float(g) for g in gammas), tuple(float(g) for g in g_hat), lifting,
    )


def load_config(path, **overrides) -> SweepConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return parse_config(data, **overrides)


# ---------------------------------------------------------------------------
# per-state work


DIAGRAM_FIELDS = (
    "index", *STATE_KEYS, "status", "hypotheses_pass", "failed_conditions", "stability_class",
    "existence_class", "root_count", "min_det_boundary", "min_det_interior", "covering_bundles",
    "covering_certified", "covering_complete", "root_slope", "lop_ok_slope", "consistent", "message",
)
ROOT_FIELDS = ("index", "root", "gamma", "delta", "eta", "V", "residual", "det_abs")
ENERGY_FIELDS = ("index", "kind", "label", "gamma", "delta", "eta", "amplification", "interior_norm", "front_abs", "slope")


def _boundary_min_det(state, ring, roots) -> float:
    from .lopatinskii import interior_min_det
    from .symbol import PointTag, critical_points

    cps = critical_points(state)
    avoid = [cps[t] for t in (PointTag.POLE_P1, PointTag.POLE_P2, PointTag.POLE_P3)]
    avoid.append(np.array([r.point.as_array() for r in roots]).reshape(-1, 3))
    avoid = np.concatenate(avoid)
    pts = np.concatenate([ring, -ring])
    if len(avoid):
        pts = pts[np.min(np.linalg.norm(pts[:, None] - avoid[None], axis=-1), axis=1) > POLE_CLEARANCE]
    return interior_min_det(state, pts)[0]


def _lop_ok_point(state, ring, roots):
    """The boundary grid point farthest from every root and critical point."""
    from .symbol import FrequencyPoint, critical_points

    avoid = [p for pts in critical_points(state).values() for p in pts]
    avoid += [r.point.as_array() for r in roots]
    avoid = np.array(avoid).reshape(-1, 3)
    avoid = np.concatenate([avoid, -avoid])
    d = np.min(np.linalg.norm(ring[:, None] - avoid[None], axis=-1), axis=1)
    return FrequencyPoint(*map(float, ring[int(np.argmax(d))]))


def process_state(task: tuple) -> dict:
    """Run the configured tasks on one grid point. Never raises."""
    idx, params, cfg = task
    row = {k: "" for k in DIAGRAM_FIELDS}
    row.update({"index": "-".join(map(str, idx)), **params})
    out = {"row": row, "roots": [], "energy": [], "certification": None}
    try:
        state = BasicState(**params)
    except ValueError as exc:
        row.update(status="invalid", consistent=True, message=str(exc))
        return out
    try:
        _run_tasks(state, cfg, out)
    except Exception as exc:  # per-row failures are recorded, not fatal
        row.update(status="error", consistent=False, message=f"{type(exc).__name__}: {exc}")
    return out


def _run_tasks(state: BasicState, cfg: SweepConfig, out: dict) -> None:
    row = out["row"]
    report = check_hypotheses(state, cfg.tol)
    row["hypotheses_pass"] = report.all_pass
    row["failed_conditions"] = ";".join(report.failed())
    if not report.all_pass:
        row.update(status="rejected", consistent=True)
        return
    try:
        row["stability_class"] = stability_class(state, cfg.tol).value
    except HypothesisError as exc:
        row.update(status="rejected", consistent=True, message=str(exc))
        return
    row["existence_class"] = root_existence_class(state).value
    row["status"] = "ok"
    consistent = True
    messages = []

    roots = ()
    needs_roots = {"roots", "symmetrizers", "energy"} & set(cfg.tasks)
    if needs_roots:
        from .lopatinskii import interior_min_det, scan_boundary_roots

        rep = scan_boundary_roots(state)
        roots = rep.boundary_roots
        if "roots" in cfg.tasks:
            row["root_count"] = rep.observed_count
            grid = hemisphere_grid_array(cfg.hemisphere_n)
            ring = grid[grid[:, 0] == 0.0]
            row["min_det_boundary"] = _boundary_min_det(state, ring, roots)
            row["min_det_interior"] = interior_min_det(state, grid[grid[:, 0] >= 0.01])[0]
            for j, r in enumerate(roots):
                p = r.point
                out["roots"].append(
                    {"index": row["index"], "root": j, "gamma": p.gamma, "delta": p.delta, "eta": p.eta,
                     "V": r.V, "residual": r.residual, "det_abs": r.det_abs}
                )
            if not rep.consistency:
                consistent = False
                messages.append(
                    f"root scan: predicted {rep.predicted_count}, observed {rep.observed_count}"
                    + (f", {len(rep.failures)} refinement failures" if rep.failures else "")
                )
            if not row["min_det_interior"] > 0:
                consistent = False
                messages.append("interior zero of the Lopatinskii determinant")

    if "symmetrizers" in cfg.tasks:
        from .symmetrizer import cover_hemisphere

        cov = cover_hemisphere(state, hemisphere_grid_array(cfg.hemisphere_n), roots)
        certified = cov.certified_bundles()
        row.update(covering_bundles=len(cov.bundles), covering_certified=len(certified), covering_complete=cov.complete)
        out["certification"] = {
            "index": row["index"],
            "complete": cov.complete,
            "uncovered": int((~cov.covered).sum()),
            "failed_centers": [c.as_array().tolist() for c in cov.failures],
            "bundles": [b.to_json() for b in cov.bundles],
        }
        if not cov.complete:
            consistent = False
            messages.append(f"covering leaves {int((~cov.covered).sum())} grid points uncovered")

    if "energy" in cfg.tasks:
        from .energy import gamma_sweep

        grid = hemisphere_grid_array(cfg.hemisphere_n)
        ring = grid[grid[:, 0] == 0.0]
        probes = [("root", f"root{j}", r.point) for j, r in enumerate(roots)]
        probes.append(("lop_ok", "lop_ok", _lop_ok_point(state, ring, roots)))
        root_slopes = []
        for kind, label, pt in probes:
            sw = gamma_sweep(state, pt, cfg.gammas, np.array(cfg.g_hat, dtype=complex))
            for r in sw.results:
                p = r.point
                out["energy"].append(
                    {"index": row["index"], "kind": kind, "label": label, "gamma": p.gamma, "delta": p.delta,
                     "eta": p.eta, "amplification": r.amplification, "interior_norm": r.interior_norm,
                     "front_abs": r.front_abs, "slope": sw.slope}
                )
            if kind == "root":
                root_slopes.append(sw.slope)
            else:
                row["lop_ok_slope"] = sw.slope
        if root_slopes:
            row["root_slope"] = max(root_slopes, key=lambda s: abs(s + 1))
            if abs(row["root_slope"] + 1) > SLOPE_TOL:
                consistent = False
                messages.append(f"root amplification slope {row['root_slope']:.4f}")
        if abs(row["lop_ok_slope"]) > SLOPE_TOL:
            consistent = False
            messages.append(f"Lop-OK amplification slope {row['lop_ok_slope']:.4f}")

    row["consistent"] = consistent
    if not consistent:
        row["status"] = "inconsistent"
    row["message"] = "; ".join(messages)


def lifting_summary(cfg: SweepConfig) -> dict:
    """State-independent check of the front lifting on a seeded band-limited front."""
    from .lifting import FrontSample, diffeo_check, h2_norm, linf_decay_check, make_cutoff

    opts = {"N": 512, "L": 80.0, "modes": 20, "seed": 0, "M": [4, 16, 64, 256], **cfg.lifting}
    N, L = int(opts["N"]), float(opts["L"])
    rng = np.random.default_rng(int(opts["seed"]))
    F = np.zeros(N, complex)
    k = np.arange(1, int(opts["modes"]) + 1)
    F[k] = (rng.standard_normal(len(k)) + 1j * rng.standard_normal(len(k))) / k**3
    F[-k] = np.conj(F[k])
    front = FrontSample(np.fft.ifft(F).real, L)
    front = FrontSample(front.values / h2_norm(front), L)
    decay = linf_decay_check(front, opts["M"])
    diffeo = [diffeo_check(front, make_cutoff(m)) for m in opts["M"]]
    return {
        "N": N, "L": L, "M": decay.M, "sup_dx1": decay.sup_dx1, "ratios": decay.ratios,
        "constant": decay.constant, "exponent": decay.exponent, "bounded": decay.bounded,
        "monotone": decay.monotone, "diffeo_min_jacobian": [d.min_jacobian for d in diffeo],
        "diffeo_ok": all(d.ok for d in diffeo),
    }


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _csv_text(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f, "")) for f in fields])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=False) + "\n"


def _sanitize(obj):
    """Replace non-finite floats with None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return None
    return obj


@dataclass
class SweepResult:
    rows: list
    roots: list
    energy: list
    certifications: list
    lifting: dict | None
    exit_code: int
    files: dict


def run_sweep(cfg: SweepConfig, out_dir=None) -> SweepResult:
    """Process every grid point and write the report files; returns the rows and the exit code."""
    jobs = [(idx, params, cfg) for idx, params in cfg.states()]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(process_state, jobs))
    else:
        results = [process_state(j) for j in jobs]

    rows = [r["row"] for r in results]
    roots = [x for r in results for x in r["roots"]]
    energy = [x for r in results for x in r["energy"]]
    certs = [r["certification"] for r in results if r["certification"] is not None]
    lifting = lifting_summary(cfg) if "lifting" in cfg.tasks else None

    consistent = all(r["consistent"] for r in rows) and (lifting is None or (lifting["bounded"] and lifting["diffeo_ok"]))
    code = EXIT_OK if consistent else EXIT_INCONSISTENT
    status_counts = {}
    for r in rows:
        status_counts[r["status"]] = status_counts.get(r["status"], 0) + 1
    summary = {
        "config": cfg.echo(),
        "versions": {
            "plasmavac": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "rows": len(rows),
        "status_counts": status_counts,
        "inconsistent_rows": [r["index"] for r in rows if not r["consistent"]],
        "lifting": lifting,
        "exit_code": code,
    }
    files = {
        "diagram.csv": _csv_text(DIAGRAM_FIELDS, rows),
        "roots.csv": _csv_text(ROOT_FIELDS, roots),
        "energy.csv": _csv_text(ENERGY_FIELDS, energy),
        "certifications.json": _json_text(_sanitize(certs)),
        "summary.json": _json_text(_sanitize(summary)),
    }
    target = out_dir if out_dir is not None else cfg.out
    if target is not None:
        path = Path(target)
        path.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (path / name).write_text(text, encoding="utf-8")
    return SweepResult(rows, roots, energy, certs, lifting, code, files)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plasmavac-sweep", description="Stability diagram over a grid of basic states.")
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--tasks", help=f"comma-separated subset of {','.join(TASKS)}")
    p.add_argument("--hemisphere-n", type=int, dest="hemisphere_n", help="hemisphere grid resolution (>= 8)")
    p.add_argument("--tol", type=float, help="hypothesis margin tolerance")
    p.add_argument("--jobs", type=int, help="worker processes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config, out=args.out, tasks=args.tasks, hemisphere_n=args.hemisphere_n, tol=args.tol, jobs=args.jobs
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.out is None:
        print("config error: no output directory (use --out)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_sweep(cfg)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    bad = [r["index"] for r in result.rows if not r["consistent"]]
    print(f"{len(result.rows)} rows written to {cfg.out}; {len(bad)} inconsistent")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
