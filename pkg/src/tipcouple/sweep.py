"""Declarative, resumable parameter sweeps over the experiment cases.

Each sweep owns a directory holding ``results.jsonl``: a header line with
the spec and its hash, then one record per finished run.  Records are
appended and fsynced by a single writer as runs complete, so an interrupted
sweep resumes by skipping every key already marked done.
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
import csv
import hashlib
import json
import logging
import math
import os
import traceback

import numpy as np

from tipcouple.configs import CASES, P1, P2, P3, build_scene

log = logging.getLogger(__name__)

ORIENTATIONS = ("radial", "azimuthal", "axial")
AXES = ("d", "b_D", "a")
# parameter ranges of the reference sweeps (um); wider ones need extend=True
STUDIED_RANGES = {"d": (0.05, 0.5), "b_D": (0.05, 0.8), "a": (0.062, 1.24)}
DEFAULT_STEPS = {"d": 0.02, "b_D": 0.05, "a": 0.062}
SIG_DIGITS = 6

SWEEP_COLUMNS = ["case", "a", "b_D", "d", "orientation", "eta_flux", "eta_modal", "P_total",
                 "purcell_ratio", "converged", "preset"]
FIGURE_COLUMNS = ["case", "axis_value_um", "orientation", "eta", "eta_modal", "converged"]


class SweepError(ValueError):
    pass


class SpecMismatchError(SweepError):
    """Resuming a results file written by a different spec."""


def fmt(value):
    """Fixed-point decimal with six significant digits."""
    if isinstance(value, bool) or value is None:
        return str(value)
    v = float(value)
    if not math.isfinite(v):
        return str(v)
    return np.format_float_positional(v, precision=SIG_DIGITS, unique=False, fractional=False,
                                      trim="-")


def rounded(value):
    return float(fmt(value))


@dataclass(frozen=True)
class SweepSpec:
    """One swept axis of one case.

    ``chain_d_from`` names an upstream sweep whose radial argmax gap fixes
    ``d`` (the optimize-gap-then-radius protocol).  ``values`` overrides the
    start/stop/step grid when given.
    """

    name: str
    case_id: str
    axis: str
    start: float = None
    stop: float = None
    step: float = None
    a: float = None
    b_D: float = None
    d: float = None
    orientations: tuple = ("radial",)
    preset: str = "coarse"
    values: tuple = None
    chain_d_from: str = None
    extend: bool = False

    def axis_values(self):
        if self.values is not None:
            return [round(float(v), 6) for v in self.values]
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9))
        return [round(self.start + i * self.step, 6) for i in range(n + 1)]

    def problems(self):
        out = []
        if self.case_id not in CASES:
            out.append(f"unknown case {self.case_id!r}")
        if self.axis not in AXES:
            out.append(f"axis must be one of {AXES}")
        if not self.orientations:
            out.append("orientation set is empty")
        for o in self.orientations:
            if o not in ORIENTATIONS:
                out.append(f"unknown orientation {o!r}")
        if self.values is None:
            if None in (self.start, self.stop, self.step):
                out.append("start, stop and step are required")
            elif self.step <= 0 or self.stop < self.start:
                out.append("need step > 0 and stop >= start")
        elif not self.values:
            out.append("values list is empty")
        if not out and not self.extend and self.axis in STUDIED_RANGES:
            lo, hi = STUDIED_RANGES[self.axis]
            vals = self.axis_values()
            if min(vals) < lo - 1e-9 or max(vals) > hi + 1e-9:
                out.append(f"{self.axis} range [{min(vals)}, {max(vals)}] leaves the studied "
                           f"range [{lo}, {hi}]; pass extend to allow")
        return out

    def to_dict(self):
        d = asdict(self)
        d["orientations"] = list(self.orientations)
        if self.values is not None:
            d["values"] = list(self.values)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["orientations"] = tuple(d.get("orientations", ("radial",)))
        if d.get("values") is not None:
            d["values"] = tuple(d["values"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SweepError(f"unknown sweep key {sorted(unknown)[0]}")
        return cls(**d)

    def spec_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class RunDescriptor:
    case: str
    a: float
    b_D: float
    d: float
    orientation: str
    preset: str
    axis_value: float

    @property
    def key(self):
        return (self.axis_value, self.orientation)

    def scene(self):
        return build_scene(self.case, self.a, self.b_D, self.d, self.orientation, self.preset)


def plan(spec, upstream=None):
    """Deterministic run list: axis values (outer) x orientations (inner)."""
    problems = spec.problems()
    if problems:
        raise SweepError("; ".join(problems))
    d = spec.d
    if spec.chain_d_from is not None:
        if upstream is None:
            raise SweepError(f"{spec.name} needs the finished {spec.chain_d_from} sweep first")
        d, _ = argmax(upstream, "radial")
    runs = []
    for v in spec.axis_values():
        params = {"a": spec.a, "b_D": spec.b_D, "d": d}
        params[spec.axis] = v
        for o in spec.orientations:
            runs.append(RunDescriptor(spec.case_id, params["a"], params["b_D"], params["d"], o,
                                      spec.preset, v))
    return runs


@dataclass
class SweepResult:
    spec_hash: str
    rows: dict = field(default_factory=dict)  # key -> row record

    def done_rows(self, orientation=None):
        return [r for r in self.rows.values()
                if r["status"] == "done" and (orientation is None or r["orientation"] == orientation)]

    def status(self, key):
        row = self.rows.get(key)
        return row["status"] if row else "pending"


def _row_from_report(desc, report):
    rec = report.to_record()
    row = {
        "axis_value": desc.axis_value, "orientation": desc.orientation, "status": "done",
        "case": desc.case, "a": desc.a, "b_D": desc.b_D, "d": desc.d, "preset": desc.preset,
        "eta_flux": rounded(rec["eta_flux"]), "eta_modal": rounded(rec["eta_modal"]),
        "P_total": rounded(rec["P_total"]), "purcell_ratio": rounded(rec["purcell_ratio"]),
        "converged": bool(rec["converged"]),
        "report": rec,
    }
    return row


def run_descriptor(desc, threads=1):
    """Default worker: simulate one descriptor and return a result row."""
    from tipcouple.simulate import run_scene

    return _row_from_report(desc, run_scene(desc.scene(), threads=threads))


def _safe_run(runner, desc, threads):
    try:
        return runner(desc, threads)
    except Exception as exc:  # failures become data; the sweep continues
        return {"axis_value": desc.axis_value, "orientation": desc.orientation,
                "status": "failed", "case": desc.case, "a": desc.a, "b_D": desc.b_D,
                "d": desc.d, "preset": desc.preset,
                "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc(limit=5)}


def results_path(out_dir):
    return os.path.join(out_dir, "results.jsonl")


def load_results(out_dir, spec_hash=None):
    """Replay ``results.jsonl``; later records for a key supersede earlier ones."""
    path = results_path(out_dir)
    result = SweepResult("")
    if not os.path.exists(path):
        return result
    with open(path) as fh:
        lines = fh.read().splitlines()
    for n, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            if n == len(lines) - 1:
                log.warning("ignoring truncated last record in %s", path)
                break
            raise
        if "header" in rec:
            if spec_hash is not None and rec["header"]["spec_hash"] != spec_hash:
                raise SpecMismatchError(
                    f"{path} was written by spec {rec['header']['spec_hash']}, not {spec_hash}")
            result.spec_hash = rec["header"]["spec_hash"]
            continue
        result.rows[(rec["axis_value"], rec["orientation"])] = rec
    return result


def load_spec(out_dir):
    with open(results_path(out_dir)) as fh:
        return SweepSpec.from_dict(json.loads(fh.readline())["header"]["spec"])


class _Writer:
    def __init__(self, path):
        self.fh = open(path, "a")

    def append(self, rec):
        self.fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self.fh.flush()
        os.fsync(self.fh.fileno())

    def close(self):
        self.fh.close()


def execute(spec, out_dir, workers=1, thread_cap=None, runner=run_descriptor, upstream=None):
    """Run every pending point of ``spec``, appending rows under ``out_dir``.

    ``thread_cap`` bounds total threads; each of the ``workers`` processes
    gets ``thread_cap // workers`` numba threads.
    """
    if workers < 1:
        raise SweepError("workers must be at least 1")
    runs = plan(spec, upstream)
    h = spec.spec_hash()
    os.makedirs(out_dir, exist_ok=True)
    result = load_results(out_dir, h)
    writer = _Writer(results_path(out_dir))
    try:
        if not result.spec_hash:
            writer.append({"header": {"spec_hash": h, "spec": spec.to_dict()}})
            result.spec_hash = h
        todo = [r for r in runs if result.status(r.key) != "done"]
        cap = thread_cap or os.cpu_count() or 1
        threads = max(1, cap // workers)
        log.info("%s: %d of %d runs pending", spec.name, len(todo), len(runs))
        if workers == 1:
            for desc in todo:
                row = _safe_run(runner, desc, threads)
                writer.append(row)
                result.rows[desc.key] = row
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_safe_run, runner, desc, threads) for desc in todo]
                for fut in as_completed(futures):
                    row = fut.result()
                    writer.append(row)
                    result.rows[(row["axis_value"], row["orientation"])] = row
    finally:
        writer.close()
    write_sweep_csv(spec, result, out_dir)
    return result


def argmax(result, orientation):
    """(axis value, eta) of the best done row; ties go to the smaller axis value."""
    rows = result.done_rows(orientation)
    if not rows:
        raise SweepError(f"no finished rows for orientation {orientation!r}")
    best = min(rows, key=lambda r: (-r["eta_flux"], r["axis_value"]))
    return best["axis_value"], best["eta_flux"]


def ordered_rows(result):
    rows = result.done_rows()
    return sorted(rows, key=lambda r: (r["axis_value"], ORIENTATIONS.index(r["orientation"])))


def write_sweep_csv(spec, result, out_dir):
    path = os.path.join(out_dir, "sweep.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in ordered_rows(result):
            w.writerow([r["case"], fmt(r["a"]), fmt(r["b_D"]), fmt(r["d"]), r["orientation"],
                        fmt(r["eta_flux"]), fmt(r["eta_modal"]), fmt(r["P_total"]),
                        fmt(r["purcell_ratio"]), r["converged"], r["preset"]])
    return path


# --- built-in sweeps ---------------------------------------------------------

_TIP_OR = ("radial", "axial")
_WIRE_OR = ("radial", "azimuthal", "axial")


def _d_sweep(name, case, a, wire):
    return SweepSpec(name, case, "d", 0.05, 0.49, DEFAULT_STEPS["d"], a=a, b_D=a,
                     orientations=_WIRE_OR if wire else _TIP_OR)


def _builtin_sweeps():
    s = {}
    for tag, a in (("p1", P1), ("p2", P2), ("p3", P3)):
        for case, wire in (("case1", False), ("case2", True), ("case3", False), ("case4", True)):
            s[f"{case}_{tag}_d"] = _d_sweep(f"{case}_{tag}_d", case, a, wire)
    s["case3_p2_bD"] = SweepSpec("case3_p2_bD", "case3", "b_D", 0.05, 0.8, 0.05, a=P2,
                                 orientations=_TIP_OR, chain_d_from="case3_p2_d")
    s["case4_p2_bD"] = SweepSpec("case4_p2_bD", "case4", "b_D", 0.05, 0.8, 0.05, a=P2,
                                 orientations=_WIRE_OR, chain_d_from="case4_p2_d")
    s["snt_alone"] = SweepSpec("snt_alone", "snt_alone", "a", values=(P1, P2, P3),
                               orientations=_TIP_OR, extend=True)
    s["dnt_radius"] = SweepSpec("dnt_radius", "dnt_radius", "a", 0.062, 1.24, 0.062,
                                orientations=_TIP_OR)
    s["case6_d"] = SweepSpec("case6_d", "case6", "d", 0.05, 0.49, 0.02, a=0.4, b_D=0.4,
                             orientations=_TIP_OR)
    s["case7_d"] = SweepSpec("case7_d", "case7", "d", 0.05, 0.49, 0.02, a=0.4, b_D=0.4,
                             orientations=_WIRE_OR)
    s["case6_bD"] = SweepSpec("case6_bD", "case6", "b_D", 0.05, 0.8, 0.05, a=0.4,
                              orientations=_TIP_OR, chain_d_from="case6_d")
    s["case7_bD"] = SweepSpec("case7_bD", "case7", "b_D", 0.05, 0.8, 0.05, a=0.4,
                              orientations=_WIRE_OR, chain_d_from="case7_d")
    return s


SWEEPS = _builtin_sweeps()

FIGURES = {
    "fig2a": ("case1_p1_d", "case2_p1_d"),
    "fig2b": ("case3_p1_d", "case4_p1_d"),
    "fig2c": ("case1_p2_d", "case2_p2_d"),
    "fig2d": ("case3_p2_d", "case4_p2_d"),
    "fig2e": ("case1_p3_d", "case2_p3_d"),
    "fig2f": ("case3_p3_d", "case4_p3_d"),
    "fig3a": ("case3_p2_bD",),
    "fig3b": ("case4_p2_bD",),
    "fig4a": ("dnt_radius",),
    "fig4b": ("case6_d", "case7_d"),
    "fig4c": ("case6_bD",),
    "fig4d": ("case7_bD",),
}

# summary table: label, sweep, collector radius label
TABLE_ROWS = [
    ("SNT alone", "snt_alone"),
    ("Case 1 P1", "case1_p1_d"), ("Case 1 P2", "case1_p2_d"), ("Case 1 P3", "case1_p3_d"),
    ("Case 2 P1", "case2_p1_d"), ("Case 2 P2", "case2_p2_d"), ("Case 2 P3", "case2_p3_d"),
    ("Case 3 P1", "case3_p1_d"), ("Case 3 P2", "case3_p2_d"), ("Case 3 P3", "case3_p3_d"),
    ("Case 4 P1", "case4_p1_d"), ("Case 4 P2", "case4_p2_d"), ("Case 4 P3", "case4_p3_d"),
    ("Case 5", "dnt_radius"),
    ("Case 6", "case6_d"),
    ("Case 7", "case7_d"),
]


def get_sweep(name, preset=None):
    try:
        spec = SWEEPS[name]
    except KeyError:
        raise SweepError(f"unknown sweep {name!r}") from None
    return replace(spec, preset=preset) if preset else spec


def sweep_dir(results_dir, name):
    return os.path.join(results_dir, name)


def run_named(name, results_dir, preset=None, workers=1, thread_cap=None, runner=run_descriptor):
    """Execute a built-in sweep, running its upstream stage first when chained."""
    spec = get_sweep(name, preset)
    upstream = None
    if spec.chain_d_from:
        upstream = run_named(spec.chain_d_from, results_dir, preset, workers, thread_cap, runner)
    return execute(spec, sweep_dir(results_dir, name), workers, thread_cap, runner, upstream)


def figure_rows(results_dir, figure_id):
    """Rows of one figure, or raise FileNotFoundError naming missing sweeps."""
    if figure_id not in FIGURES:
        raise SweepError(f"unknown figure {figure_id!r}; choose from {sorted(FIGURES)}")
    missing = [n for n in FIGURES[figure_id]
               if not os.path.exists(results_path(sweep_dir(results_dir, n)))]
    if missing:
        raise FileNotFoundError(", ".join(missing))
    rows = []
    for n in FIGURES[figure_id]:
        res = load_results(sweep_dir(results_dir, n))
        rows.extend(ordered_rows(res))
    return rows


def write_figure_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIGURE_COLUMNS)
        for r in rows:
            w.writerow([r["case"], fmt(r["axis_value"]), r["orientation"], fmt(r["eta_flux"]),
                        fmt(r["eta_modal"]), r["converged"]])
    return path


def read_figure_csv(path):
    with open(path, newline="") as fh:
        out = []
        for r in csv.DictReader(fh):
            out.append({"case": r["case"], "axis_value": float(r["axis_value_um"]),
                        "orientation": r["orientation"], "eta_flux": float(r["eta"]),
                        "eta_modal": float(r["eta_modal"]), "converged": r["converged"] == "True"})
        return out


def table_rows(results_dir):
    """Best radial-orientation efficiency for every finished summary sweep."""
    out = []
    for label, name in TABLE_ROWS:
        path = results_path(sweep_dir(results_dir, name))
        if not os.path.exists(path):
            continue
        res = load_results(sweep_dir(results_dir, name))
        try:
            value, eta = argmax(res, "radial")
        except SweepError:
            continue
        spec = load_spec(sweep_dir(results_dir, name))
        out.append({"label": label, "sweep": name, "axis": spec.axis, "axis_value": value,
                    "eta": eta})
    return out
