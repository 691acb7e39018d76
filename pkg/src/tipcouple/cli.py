"""``tipcouple`` command line: validate, run, sweep, modes, report.

Exit codes: 0 success, 1 physics or convergence failure, 2 configuration
or usage error, 3 missing inputs.
"""

import argparse
import csv
from dataclasses import replace
import json
import logging
import os
import sys

from tipcouple.configs import NAMED, PRESETS, get_preset, named_scene
from tipcouple.fdtd.engine import DivergenceError
from tipcouple.fdtd.grid import courant_dt
from tipcouple.modes import solve_modes, v_number
from tipcouple.scene import (ConfigError, ResolutionError, rasterize, scene_from_dict,
                             scene_to_dict, validate_scene)
from tipcouple import simulate
from tipcouple import sweep as sw

EXIT_OK, EXIT_PHYSICS, EXIT_CONFIG, EXIT_MISSING = 0, 1, 2, 3
SINGLE_MODE_V = 2.405


class UsageError(Exception):
    pass


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(tree, overrides):
    """Set ``a.b.0.c=value`` entries on a nested config tree (in place)."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.split(".")
        node = tree
        for i, part in enumerate(parts):
            last = i == len(parts) - 1
            if isinstance(node, list):
                try:
                    idx = int(part)
                    node[idx]
                except (ValueError, IndexError):
                    raise ConfigError(f"unknown key {key}") from None
                if last:
                    node[idx] = _parse_value(value)
                else:
                    node = node[idx]
            elif isinstance(node, dict):
                if last:
                    node[part] = _parse_value(value)  # unknown names fail in scene_from_dict
                else:
                    if node.get(part) is None:
                        raise ConfigError(f"unknown key {key}")
                    node = node[part]
            else:
                raise ConfigError(f"unknown key {key}")
    return tree


def load_config(source, overrides=(), preset=None, orientation=None):
    """Scene from a JSON file or a built-in config name, with overrides applied."""
    if source in NAMED:
        tree = scene_to_dict(named_scene(source, preset or "coarse", orientation or "radial"))
    else:
        try:
            with open(source) as fh:
                tree = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {source}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: not valid JSON ({exc})") from exc
        if preset is not None:
            tree.setdefault("domain", {})["grid_step"] = get_preset(preset).grid_step
            tree.setdefault("run", {})["preset"] = preset
        if orientation is not None:
            tree.setdefault("source", {})["orientation"] = orientation
    apply_overrides(tree, overrides)
    return scene_from_dict(tree)


def _collector(scene):
    if scene.pair is not None:
        return scene.primitive(scene.pair.primary)
    return scene.primitives[0] if scene.primitives else None


def cmd_validate(args):
    scene = load_config(args.config, args.set, args.preset)
    problems = validate_scene(scene)
    for p in problems:
        print(f"violation: {p}")
    prim = _collector(scene)
    if prim is not None and prim.radius > 0:
        n = scene.material_of(prim).refractive_index if prim.material in scene.materials else None
        if n is not None:
            v = v_number(prim.radius, n, scene.background.refractive_index,
                         scene.source.wavelength)
            regime = "single-mode" if v < SINGLE_MODE_V else "multi-mode"
            print(f"V = {v:.2f} ({regime})")
    dom = scene.domain
    if dom.grid_step > 0:
        try:
            print(f"CFL dt = {courant_dt(dom.grid_step, scene.run.courant):.4f} fs")
        except ValueError as exc:
            print(f"violation: {exc}")
            problems.append(str(exc))
        nx, ny, nz = dom.shape
        print(f"cells = {nx} x {ny} x {nz} = {nx * ny * nz}")
        print(f"memory ~ {simulate.estimate_memory(scene) / 2**20:.0f} MiB")
    if not problems:
        try:
            rasterize(scene)
        except ResolutionError as exc:
            print(f"violation: {exc}")
            problems.append(str(exc))
    return EXIT_OK if not problems else EXIT_CONFIG


def cmd_run(args):
    scene = load_config(args.config, args.set, args.preset, args.orientation)
    problems = validate_scene(scene)
    if problems:
        for p in problems:
            print(f"violation: {p}", file=sys.stderr)
        return EXIT_CONFIG
    snap = os.path.join(args.out, "snapshots") if scene.run.snapshots else None
    try:
        report = simulate.run_scene(scene, threads=args.threads, snapshot_dir=snap)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "report.json")
    rec = report.to_record()
    with open(path, "w") as fh:
        json.dump(rec, fh, indent=1, sort_keys=True)
    print(f"eta = {sw.fmt(report.eta_flux)}  eta_modal = {sw.fmt(report.eta_modal)}  "
          f"purcell = {sw.fmt(report.purcell_ratio)}  converged = {report.converged}  "
          f"steps = {report.steps}")
    issues = report.check()
    for issue in issues:
        print(f"warning: {issue}", file=sys.stderr)
    if not report.converged:
        print("error: run did not reach steady state; report flagged", file=sys.stderr)
        return EXIT_PHYSICS
    return EXIT_PHYSICS if issues else EXIT_OK


def _spec_from_args(args):
    if args.name:
        spec = sw.get_sweep(args.name, args.preset)
        if args.extend:
            spec = replace(spec, extend=True)
        return spec
    if args.spec is None:
        raise UsageError("sweep needs a built-in name or --spec FILE")
    try:
        with open(args.spec) as fh:
            tree = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.spec}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.spec}: not valid JSON ({exc})") from exc
    if args.preset:
        tree["preset"] = args.preset
    if args.extend:
        tree["extend"] = True
    return sw.SweepSpec.from_dict(tree)


def cmd_sweep(args):
    spec = _spec_from_args(args)
    problems = spec.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    upstream = None
    if spec.chain_d_from:
        up = sw.get_sweep(spec.chain_d_from, args.preset)
        upstream = sw.execute(up, sw.sweep_dir(args.out, up.name), args.workers, args.threads)
    result = sw.execute(spec, sw.sweep_dir(args.out, spec.name), args.workers, args.threads,
                        upstream=upstream)
    failed = [r for r in result.rows.values() if r["status"] == "failed"]
    done = result.done_rows()
    print(f"{spec.name}: {len(done)} done, {len(failed)} failed")
    for o in spec.orientations:
        try:
            value, eta = sw.argmax(result, o)
            print(f"  {o}: argmax {spec.axis} = {sw.fmt(value)} um, eta = {sw.fmt(eta)}")
        except sw.SweepError:
            pass
    return EXIT_PHYSICS if failed else EXIT_OK


def cmd_modes(args):
    modes = solve_modes(args.radius, args.n_core, args.n_clad, args.wavelength)
    v = v_number(args.radius, args.n_core, args.n_clad, args.wavelength)
    print(f"V = {v:.4f} ({'single-mode' if v < SINGLE_MODE_V else 'multi-mode'})")
    rows = [(str(m.label), m.n_eff, m.core_fraction) for m in modes]
    print(f"{'mode':<8}{'n_eff':>12}{'core fraction':>16}")
    for label, n_eff, frac in rows:
        print(f"{label:<8}{sw.fmt(n_eff):>12}{sw.fmt(frac):>16}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mode", "n_eff", "core_fraction"])
            for label, n_eff, frac in rows:
                w.writerow([label, sw.fmt(n_eff), sw.fmt(frac)])
    return EXIT_OK


def cmd_report(args):
    if not os.path.isdir(args.results) or not os.listdir(args.results):
        print(f"error: no sweep results in {args.results}", file=sys.stderr)
        return EXIT_MISSING
    if args.figure:
        try:
            rows = sw.figure_rows(args.results, args.figure)
        except FileNotFoundError as exc:
            print(f"error: missing sweeps; run: tipcouple sweep {exc.args[0]}", file=sys.stderr)
            return EXIT_MISSING
        out = args.out or os.path.join(args.results, f"figure_{args.figure}.csv")
        sw.write_figure_csv(rows, out)
        print(f"wrote {out}")
    table = sw.table_rows(args.results)
    if not table and not args.figure:
        print("error: no finished summary sweeps found", file=sys.stderr)
        return EXIT_MISSING
    if table:
        print(f"{'configuration':<14}{'sweep':<14}{'best at':>16}{'eta max':>10}")
        for r in table:
            at = f"{r['axis']} = {sw.fmt(r['axis_value'])}"
            print(f"{r['label']:<14}{r['sweep']:<14}{at:>16}{sw.fmt(r['eta']):>10}")
    return EXIT_OK


def _threads(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid thread count {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("thread count must be at least 1")
    return n


def _default_threads():
    value = os.environ.get(simulate.THREADS_ENV)
    return _threads(value) if value else None


def build_parser():
    p = argparse.ArgumentParser(
        prog="tipcouple",
        description="FDTD coupling efficiency of a dipole emitter into dielectric nanotips.",
        epilog=f"Default thread count comes from ${simulate.THREADS_ENV}. Exit codes: 0 ok, "
               "1 physics/convergence failure, 2 config error, 3 missing inputs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def config_args(sp):
        sp.add_argument("config", help=f"JSON scene file or built-in name ({', '.join(NAMED)})")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="dotted-key override, e.g. source.orientation=axial (repeatable)")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="resolution preset")

    sp = sub.add_parser("validate", help="check a config and print derived quantities")
    config_args(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("run", help="simulate one config and write report.json")
    config_args(sp)
    sp.add_argument("--orientation", choices=("radial", "azimuthal", "axial"))
    sp.add_argument("--threads", type=_threads, default=_default_threads(),
                    help="numba threads for this run")
    sp.add_argument("--out", default="run_out", help="output directory")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run (or resume) a parameter sweep")
    sp.add_argument("name", nargs="?", help=f"built-in sweep ({', '.join(sw.SWEEPS)})")
    sp.add_argument("--spec", help="JSON sweep spec instead of a built-in name")
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--workers", type=_threads, default=1, help="concurrent simulations")
    sp.add_argument("--threads", type=_threads, default=_default_threads(),
                    help="total thread cap shared by the workers")
    sp.add_argument("--extend", action="store_true", help="allow ranges beyond the studied ones")
    sp.add_argument("--out", default="results", help="results directory")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("modes", help="guided modes of a step-index cylinder")
    sp.add_argument("--radius", type=float, required=True, help="core radius, um")
    sp.add_argument("--n-core", type=float, default=1.457)
    sp.add_argument("--n-clad", type=float, default=1.0)
    sp.add_argument("--wavelength", type=float, default=0.620, help="um")
    sp.add_argument("--csv", help="also write the table to this CSV file")
    sp.set_defaults(func=cmd_modes)

    sp = sub.add_parser("report", help="figure CSV and best-efficiency summary from finished sweeps")
    sp.add_argument("results", help="results directory holding sweep subdirectories")
    sp.add_argument("--figure", choices=sorted(sw.FIGURES))
    sp.add_argument("--out", help="CSV path (default: <results>/figure_<id>.csv)")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    except argparse.ArgumentTypeError as exc:  # raised by the env-var default
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ResolutionError, UsageError, sw.SweepError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
