"""Command-line entry point.

Every subcommand reads a JSON config (a path or the name of a shipped
recipe), writes CSV/JSON files into an output directory together with a
``manifest.json``, and exits with 0 on success, 1 when a verification case
fails, 2 on usage or configuration errors and 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .channel_model import ChannelConfig, InitialData, config_from_dict, validate
from .errors import ConfigError, LevelOutOfRange, NumericalError, PlateflowError

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
OUT_ENV = "PLATEFLOW_OUT"


def recipe_names() -> list[str]:
    return sorted(p.name[:-5] for p in (resources.files("plateflow") / "recipes").iterdir() if p.name.endswith(".json"))


def load_doc(source: str) -> dict:
    """JSON from a file path, or from a shipped recipe of that name."""
    path = Path(source)
    if not path.exists():
        candidate = resources.files("plateflow") / "recipes" / f"{source}.json"
        if not candidate.is_file():
            raise ConfigError(f"no config file or recipe named {source!r} (recipes: {', '.join(recipe_names())})")
        text = candidate.read_text(encoding="utf-8")
    else:
        text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _write_csv(path: Path, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    return path


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _fmt(v: float) -> str:
    return f"{v:.16e}"


class Run:
    """Output directory bookkeeping and the manifest."""

    def __init__(self, args, command: str):
        base = args.out or os.environ.get(OUT_ENV) or os.path.join("plateflow_out", command)
        self.dir = Path(base)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.start = time.perf_counter()
        self.files: list[Path] = []
        self.params: dict = {}
        self.config_hash = None

    def add(self, *paths: Path) -> None:
        self.files.extend(paths)

    def finish(self, **extra) -> Path:
        doc = {
            "command": self.command,
            "config_hash": self.config_hash,
            "parameters": self.params,
            "version": __version__,
            "wall_time": time.perf_counter() - self.start,
            "outputs": sorted(p.name for p in self.files),
            **extra,
        }
        return _write_json(self.dir / "manifest.json", doc)


def _channel(doc):
    cfg, data = config_from_dict(doc)
    return cfg, data, doc.get("run", {})


def _opt(args, name, run, default):
    v = getattr(args, name, None)
    if v is not None:
        return v
    return run.get(name, default)


def _workers(args) -> int:
    return args.threads or os.cpu_count() or 1


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    from .propagator import SimGrid, export_fields, simulate

    cfg, data, run = _channel(load_doc(args.config))
    if args.zero_data:
        data = InitialData(cfg.n)
    grid = SimGrid(float(_opt(args, "L", run, 40.0)), int(_opt(args, "N", run, 1024)))
    times = [float(t) for t in _opt(args, "times", run, [0.0, 1.0, 2.0, 3.0])]
    r = Run(args, "simulate")
    r.config_hash = cfg.digest()
    r.params = {"grid": grid.to_dict(), "times": times, "initial": data.metadata()}
    fields = simulate(cfg, data, times, grid)
    r.add(*export_fields(fields, r.dir, cfg, grid, data))
    for f in fields:
        print(f"t={f.t:g} max|eta|={f.max_amplitude:.6e}")
    r.finish()
    return EXIT_OK


def cmd_stability(args) -> int:
    from .stability import classify, default_kgrid

    cfg, _, run = _channel(load_doc(args.config))
    kmax = float(_opt(args, "kmax", run, 50.0))
    ks = default_kgrid(cfg, kmax)
    rep = classify(cfg, ks)
    r = Run(args, "stability")
    r.config_hash = cfg.digest()
    r.params = {"kmax": kmax, "points": int(ks.size)}
    r.add(_write_json(r.dir / "stability.json", rep.to_dict()))
    r.add(_write_json(r.dir / "intervals.json", rep.intervals.to_dict()))
    r.add(_write_csv(r.dir / "abscissa.csv", [["k", "alpha"]] + [[_fmt(k), _fmt(a)] for k, a in zip(rep.k, rep.alpha)]))
    K = ", ".join(f"({a:.8g}, {b:.8g})" for a, b in rep.intervals.union) or "empty"
    print(f"{rep.verdict}; K = {K}; max alpha = {rep.alpha_max:.3e}")
    r.finish(verdict=rep.verdict)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .stability import spectrum_scan

    cfg, _, run = _channel(load_doc(args.config))
    kmin, kmax = float(_opt(args, "kmin", run, -50.0)), float(_opt(args, "kmax", run, 50.0))
    points = int(_opt(args, "points", run, 401))
    V = float(_opt(args, "V", run, 0.0))
    ks = np.linspace(kmin, kmax, points)
    scan = spectrum_scan(cfg, ks, V=V, workers=_workers(args))
    r = Run(args, "spectrum")
    r.config_hash = cfg.digest()
    r.params = {"kmin": kmin, "kmax": kmax, "points": points, "V": V}
    r.add(_write_csv(r.dir / "spectrum.csv", scan.csv_rows()))
    print(f"max alpha = {scan.abscissa.max():.3e}; branch crossings flagged at {int(scan.crossings.sum())} samples")
    r.finish()
    return EXIT_OK


def cmd_pseudospec(args) -> int:
    from .pseudospectrum import FIGURE_KS, FIGURE_LEVELS, compute_grid, contours_to_json, extract_contours, width_at

    cfg, _, run = _channel(load_doc(args.config))
    ks = [float(k) for k in _opt(args, "k", run, list(FIGURE_KS))]
    levels = [float(e) for e in _opt(args, "levels", run, list(FIGURE_LEVELS))]
    res = int(_opt(args, "resolution", run, 201))
    r = Run(args, "pseudospec")
    r.config_hash = cfg.digest()
    r.params = {"k": ks, "levels": levels, "resolution": res}
    widths = []
    for k in ks:
        g = compute_grid(cfg, k, resolution=res, levels=levels)
        r.add(contours_to_json(extract_contours(g, levels), k, r.dir / f"contours_k{k:g}.json"))
        if args.fields:
            r.add(_write_csv(r.dir / f"field_k{k:g}.csv", g.rows()))
        w = [width_at(g, e) / e for e in levels]
        widths.append([_fmt(k)] + [_fmt(x) for x in w])
        print(f"k={k:g} width/eps: " + " ".join(f"{x:.3f}" for x in w))
    r.add(_write_csv(r.dir / "widths.csv", [["k"] + [f"eps={e:g}" for e in levels]] + widths))
    r.finish()
    return EXIT_OK


def cmd_greens(args) -> int:
    from .stability import Quadrature, decay_exponent, greens_series

    cfg, _, run = _channel(load_doc(args.config))
    V = float(_opt(args, "V", run, 0.0))
    if args.times:
        times = [float(t) for t in args.times]
    else:
        tmin, tmax = float(_opt(args, "tmin", run, 10.0)), float(_opt(args, "tmax", run, 100.0))
        times = list(np.geomspace(tmin, tmax, int(_opt(args, "count", run, 10))))
    q = Quadrature(kmax=float(_opt(args, "kmax", run, 8.0)))
    samples = greens_series(cfg, V, times, q)
    expo = decay_exponent(samples) if len(samples) > 1 else float("nan")
    r = Run(args, "greens")
    r.config_hash = cfg.digest()
    r.params = {"V": V, "times": times, "kmax": q.kmax, "rtol": q.rtol}
    rows = [["t", "V", "norm_UL", "norm_full", "kmax", "nodes", "error_estimate", "levels"]]
    rows += [[_fmt(s.t), _fmt(s.V), _fmt(s.norm), _fmt(s.full_norm), _fmt(s.kmax), s.nodes, _fmt(s.error_estimate), s.levels] for s in samples]
    r.add(_write_csv(r.dir / "greens.csv", rows))
    print(f"decay exponent of ||G_UL|| over t in [{min(times):g}, {max(times):g}]: {expo:.4f}")
    r.finish(decay_exponent=expo)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verifier import run_battery, write_report

    cases = run_battery(seed=args.seed, configs=args.configs)
    r = Run(args, "verify")
    r.params = {"seed": args.seed, "configs": args.configs}
    r.add(write_report(cases, r.dir / "verify.json"))
    failed = [c for c in cases if not c.passed]
    for c in failed:
        print(f"FAIL {c.id}: residual {c.residual:.3e} vs {c.threshold:.3e} ({c.expect})")
    print(f"{len(cases) - len(failed)}/{len(cases)} cases pass")
    r.finish(failed=len(failed))
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_ndim_spectrum(args) -> int:
    from .ndim import nd_config, ndim_classify, ndim_generator, sphere_directions

    doc = load_doc(args.config)
    try:
        cfg = nd_config(doc["heights"], doc["flows"])
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}") from None
    run = doc.get("run", {})
    rmax = float(_opt(args, "radii_max", run, 5.0))
    nr = int(_opt(args, "radii", run, 120))
    radii = np.linspace(rmax / nr, rmax, nr)
    dirs = sphere_directions(cfg.m, count=args.directions)
    rep = ndim_classify(cfg, dirs, radii)
    r = Run(args, "ndim-spectrum")
    r.config_hash = validate(ChannelConfig(tuple(cfg.base.heights), tuple(cfg.base.flows))).digest()
    r.params = {"radii_max": rmax, "radii": nr, "directions": int(len(dirs))}
    m2 = 2 * cfg.n
    head = [f"khat{j}" for j in range(1, cfg.m + 1)] + ["knorm"]
    head += [f"re{j}" for j in range(1, m2 + 1)] + [f"im{j}" for j in range(1, m2 + 1)] + ["alpha"]
    rows = [head]
    for d in dirs:
        for rad in radii:
            lam = np.sort_complex(np.linalg.eigvals(ndim_generator(cfg, rad * d).M))
            rows.append([_fmt(x) for x in (*d, rad, *lam.real, *lam.imag, lam.real.max())])
    r.add(_write_csv(r.dir / "ndim_spectrum.csv", rows))
    r.add(_write_json(r.dir / "ndim_stability.json", {"verdict": rep.verdict, "alpha_max": rep.alpha_max, **rep.diagnostics}))
    print(f"{rep.verdict}; max alpha = {rep.alpha_max:.3e}")
    r.finish(verdict=rep.verdict)
    return EXIT_OK


def cmd_matrices(args) -> int:
    from .spectral_matrices import dump_csv

    cfg, _, _ = _channel(load_doc(args.config))
    r = Run(args, "matrices")
    r.config_hash = cfg.digest()
    r.params = {"k": args.k}
    path = r.dir / f"matrices_k{args.k:g}.csv"
    dump_csv(cfg, args.k, path)
    r.add(path)
    r.finish()
    return EXIT_OK


def cmd_recipes(args) -> int:
    for name in recipe_names():
        doc = load_doc(name)
        print(f"{name}: {doc.get('description', '')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plateflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"plateflow {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./plateflow_out/<command>)")
    common.add_argument("--threads", type=int, help="worker cap for parallel maps (default: all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_, config=True):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if config:
            sp.add_argument("config", help="config JSON path or shipped recipe name")
        sp.set_defaults(func=func)
        return sp

    sp = add("simulate", cmd_simulate, "evolve initial plate data and export fields")
    sp.add_argument("--L", type=float, help="grid half-width")
    sp.add_argument("--N", type=int, help="grid points (power of two)")
    sp.add_argument("--times", type=float, nargs="+")
    sp.add_argument("--zero-data", action="store_true", help="replace the initial data by zero")

    sp = add("stability", cmd_stability, "stability verdict and unstable intervals")
    sp.add_argument("--kmax", type=float)

    sp = add("spectrum", cmd_spectrum, "eigenvalues of ikV + M(k) on a k grid")
    sp.add_argument("--kmin", type=float)
    sp.add_argument("--kmax", type=float)
    sp.add_argument("--points", type=int)
    sp.add_argument("--V", type=float)

    sp = add("pseudospec", cmd_pseudospec, "pseudospectral contours of M(k)")
    sp.add_argument("--k", type=float, nargs="+")
    sp.add_argument("--levels", type=float, nargs="+")
    sp.add_argument("--resolution", type=int)
    sp.add_argument("--fields", action="store_true", help="also export the sigma_min fields")

    sp = add("greens", cmd_greens, "Green's function norms along a ray")
    sp.add_argument("--V", type=float)
    sp.add_argument("--times", type=float, nargs="+")
    sp.add_argument("--tmin", type=float)
    sp.add_argument("--tmax", type=float)
    sp.add_argument("--count", type=int)
    sp.add_argument("--kmax", type=float)

    sp = add("verify", cmd_verify, "run the oracle battery", config=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--configs", type=int, default=10)

    sp = add("ndim-spectrum", cmd_ndim_spectrum, "spectra over wavevector directions in m dimensions")
    sp.add_argument("--radii-max", dest="radii_max", type=float)
    sp.add_argument("--radii", type=int)
    sp.add_argument("--directions", type=int, default=32)

    sp = add("matrices", cmd_matrices, "dump A, B, C and M at one k")
    sp.add_argument("--k", type=float, required=True)

    add("recipes", cmd_recipes, "list shipped recipes", config=False)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, LevelOutOfRange, OSError) as exc:
        print(f"plateflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"plateflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PlateflowError as exc:
        print(f"plateflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
