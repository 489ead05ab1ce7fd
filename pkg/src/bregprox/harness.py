"""Configuration-driven experiments: the Bregman x lambda sweep, the SPD
appendix checks, the condition checkers and trace verification.

Every writer uses fixed float formatting and leaves timings out of CSV
files, so two runs of the same configuration produce identical CSVs.
"""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .bregman import BREGMAN_KEYS, check_level_set_bounded, make_bregman
from .convexity import (REF_X, spd_regularized, reproduce_reference_values, test_kx_convexity,
                        verify_det_identities)
from .equilibrium import (BIFUNCTION_KEYS, RegularizedBifunction, check_c6, check_monotone,
                          check_upper_lower_semicontinuity, example1_defect, make_bifunction)
from .errors import ConfigError, ContractError, ConvergenceError, DomainError, ParameterError
from .solver import (SolverConfig, SolverTrace, IterationRecord, read_iterates_csv,
                     read_trace_csv, solve_outer, verify_run)

# reference rows: (outer iterations, inner iterations, time in seconds, final Er)
REFERENCE_TABLE = {
    ("org", 0.3): (70, 253, 4.8380, 9.590e-07),
    ("org", 0.6): (71, 259, 4.6991, 9.279e-07),
    ("org", 0.9): (72, 269, 4.2970, 9.102e-07),
    ("breg1", 0.3): (85, 363, 11.765, 9.240e-07),
    ("breg1", 0.6): (83, 533, 30.946, 9.206e-07),
    ("breg1", 0.9): (142, 535, 14.946, 9.971e-07),
    ("breg2", 0.3): (68, 210, 3.4920, 9.829e-07),
    ("breg2", 0.6): (70, 217, 3.4428, 9.889e-07),
    ("breg2", 0.9): (70, 226, 3.6600, 9.788e-07),
}
OUTER_BANDS = {"org": (35, 140), "breg2": (35, 140), "breg1": (42, 284)}
DEFECT_TOL = 1e-3
MANIFOLD_OF = {"example1": "orthant", "spd-logdet": "spd"}


@dataclass
class ExperimentConfig:
    """One experiment: a bifunction, several Bregman functions and lambdas.

    The proximal anchor is always the current iterate (``anchor_policy``
    exists so configuration files can state it explicitly).
    """

    manifold: str = "orthant"
    bifunction: str = "example1"
    bregmans: list = field(default_factory=lambda: ["org", "breg1", "breg2"])
    lambdas: list = field(default_factory=lambda: [0.3, 0.6, 0.9])
    x0: list = field(default_factory=lambda: [20.0, 5.0, 3.0])
    anchor_policy: str = "current-iterate"
    inner_tol: float = 1e-3
    outer_tol: float = 1e-6
    max_outer: int = 10000
    max_inner: int = 5000
    inner_method: str = "extragradient"
    step0: float = 0.01
    seed: int = 0
    out: str = "results"
    workers: int = 1
    verify: bool = True

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data).validated()

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw).validated()

    def solver_config(self, lam):
        return SolverConfig(lam=lam, inner_tol=self.inner_tol, outer_tol=self.outer_tol,
                            max_outer=self.max_outer, max_inner=self.max_inner,
                            inner_method=self.inner_method, step0=self.step0)

    def validated(self):
        """Resolve every key and check ``x0`` against ``C`` and each zone."""
        if self.bifunction not in BIFUNCTION_KEYS:
            raise ConfigError(f"unknown bifunction {self.bifunction!r}; "
                              f"expected one of {BIFUNCTION_KEYS}")
        if MANIFOLD_OF[self.bifunction] != self.manifold:
            raise ConfigError(f"bifunction {self.bifunction!r} lives on "
                              f"{MANIFOLD_OF[self.bifunction]!r}, not {self.manifold!r}")
        if self.anchor_policy != "current-iterate":
            raise ConfigError("anchor_policy must be 'current-iterate'")
        if not self.bregmans or not self.lambdas:
            raise ConfigError("bregmans and lambdas must be non-empty")
        f = make_bifunction(self.bifunction)
        try:
            x0 = f.manifold.check_point(np.asarray(self.x0, dtype=float))
        except DomainError as exc:
            raise ConfigError(f"x0 is not a point of the manifold: {exc}") from exc
        if not f.feasible.contains(x0):
            raise ConfigError(f"x0 lies outside C ({f.feasible.description})")
        for key in self.bregmans:
            if key not in BREGMAN_KEYS:
                raise ConfigError(f"unknown Bregman key {key!r}; expected one of {BREGMAN_KEYS}")
            phi = make_bregman(key, f.manifold)
            if type(phi.manifold) is not type(f.manifold) or phi.manifold.n != f.manifold.n:
                raise ConfigError(f"Bregman {key!r} is defined on {phi.manifold!r}, "
                                  f"not {f.manifold!r}")
            if not phi.in_zone(x0):
                raise ConfigError(f"x0 lies outside the zone of {key!r} ({phi.zone_description})")
        try:
            for lam in self.lambdas:
                self.solver_config(lam)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        return self

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# sweep

@dataclass
class SummaryRow:
    bregman: str
    lam: float
    outer_iters: int
    total_inner_iters: int
    wall_time_s: float
    final_er: float
    termination_reason: str
    defect: float = float("nan")
    outer_band: tuple = None
    invariants: dict = None
    trace_file: str = ""
    error: str = ""

    @property
    def converged(self):
        return self.termination_reason == "converged" and self.final_er <= 1e-6

    @property
    def in_band(self):
        if self.outer_band is None:
            return True
        lo, hi = self.outer_band
        return lo <= self.outer_iters <= hi

    @property
    def accepted(self):
        ok = self.converged and self.in_band
        if np.isfinite(self.defect):
            ok = ok and abs(self.defect) <= DEFECT_TOL
        if self.invariants is not None:
            ok = ok and self.invariants.get("passed", False)
        return ok

    def to_dict(self):
        d = asdict(self)
        d.update(converged=self.converged, in_band=self.in_band, accepted=self.accepted)
        return d


def _run_name(key, lam):
    return f"{key}_lam{lam:g}"


def _run_one(cfg, key, lam):
    """Run one (Bregman, lambda) pair and write its files. Returns a SummaryRow."""
    f = make_bifunction(cfg.bifunction)
    phi = make_bregman(key, f.manifold)
    base = os.path.join(cfg.out, _run_name(key, lam))
    band = OUTER_BANDS.get(key) if cfg.bifunction == "example1" else None
    try:
        trace = solve_outer(f, phi, np.asarray(cfg.x0, dtype=float), cfg.solver_config(lam))
    except (ConvergenceError, DomainError) as exc:
        partial = getattr(exc, "partial", None)
        trace = partial if isinstance(partial, SolverTrace) else None
        reason = "inner_failure" if isinstance(exc, ConvergenceError) else "domain_error"
        row = SummaryRow(key, lam, trace.outer_iters if trace else 0,
                         trace.total_inner_iters if trace else 0,
                         trace.wall_time_s if trace else 0.0,
                         trace.final_er if trace else float("nan"), reason,
                         outer_band=band, error=str(exc))
        if trace is not None:
            _write_trace(trace, base)
            row.trace_file = base + ".csv"
        return row
    invariants = None
    defect = float("nan")
    if f.solution_projector is not None:
        x_ref = f.solution_projector(trace.final_point)
        trace.attach_reference(x_ref, phi)
        defect = example1_defect(trace.final_point) if cfg.bifunction == "example1" else defect
        if cfg.verify:
            invariants = verify_run(trace, f, phi, x_ref=x_ref, seed=cfg.seed).to_dict()
    _write_trace(trace, base)
    return SummaryRow(key, lam, trace.outer_iters, trace.total_inner_iters, trace.wall_time_s,
                      trace.final_er, trace.termination_reason, defect, band, invariants,
                      base + ".csv")


def _write_trace(trace, base):
    trace.write_csv(base + ".csv")
    trace.write_iterates(base + ".iterates.csv")
    trace.write_summary(base + ".json")


def _run_one_star(args):
    return _run_one(*args)


@dataclass
class SweepResult:
    rows: list
    files: list

    @property
    def passed(self):
        return all(r.accepted for r in self.rows)


def run_sweep(cfg):
    """Run every (Bregman, lambda) pair and write traces and summaries.

    Files in ``cfg.out``: one ``<bregman>_lam<lambda>.csv`` trace per run
    (plus ``.iterates.csv`` and ``.json``), ``summary.csv``, ``summary.txt``,
    ``summary.json`` and ``er_by_iteration.csv`` (``n`` against ``Er(n)``).
    A failing run is recorded in the summary and the sweep continues.
    """
    os.makedirs(cfg.out, exist_ok=True)
    jobs = [(cfg, key, float(lam)) for key in cfg.bregmans for lam in cfg.lambdas]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_run_one_star, jobs))
    else:
        rows = [_run_one(*job) for job in jobs]
    files = [r.trace_file for r in rows if r.trace_file]
    files += _write_summaries(cfg, rows)
    return SweepResult(rows, files)


SUMMARY_COLUMNS = ["bregman", "lambda", "outer_iters", "total_inner_iters", "final_Er",
                   "termination_reason", "defect", "in_band", "invariants_passed"]


def _write_summaries(cfg, rows):
    out = cfg.out
    paths = [os.path.join(out, n) for n in
             ("summary.csv", "summary.txt", "summary.json", "er_by_iteration.csv")]
    with open(paths[0], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            inv = "" if r.invariants is None else r.invariants["passed"]
            w.writerow([r.bregman, f"{r.lam:g}", r.outer_iters, r.total_inner_iters,
                        repr(float(r.final_er)), r.termination_reason, repr(float(r.defect)),
                        r.in_band, inv])
    with open(paths[1], "w") as fh:
        fh.write(format_summary_table(rows) + "\n")
    with open(paths[2], "w") as fh:
        json.dump({"config": cfg.to_dict(), "rows": [r.to_dict() for r in rows]}, fh,
                  indent=2, default=str)
    with open(paths[3], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bregman", "lambda", "n", "Er"])
        for r in rows:
            if not r.trace_file:
                continue
            for rec in read_trace_csv(r.trace_file):
                w.writerow([r.bregman, f"{r.lam:g}", rec["n"], repr(rec["Er"])])
    return paths


def format_summary_table(rows):
    """Aligned text table with the reference counts alongside."""
    head = (f"{'D':<7}{'lambda':>7}{'outer':>8}{'inner':>9}{'time(s)':>10}{'Er(n)':>12}"
            f"{'ref outer':>11}{'ref inner':>11}{'band':>12}  status")
    lines = [head, "-" * len(head)]
    for r in rows:
        ref = REFERENCE_TABLE.get((r.bregman, round(r.lam, 6)))
        band = "" if r.outer_band is None else f"[{r.outer_band[0]},{r.outer_band[1]}]"
        status = "ok" if r.accepted else ("FAIL: " + _failure_reason(r))
        lines.append(
            f"{r.bregman:<7}{r.lam:>7g}{r.outer_iters:>8}{r.total_inner_iters:>9}"
            f"{r.wall_time_s:>10.3f}{r.final_er:>12.3e}"
            f"{'' if ref is None else ref[0]:>11}{'' if ref is None else ref[1]:>11}"
            f"{band:>12}  {status}")
    return "\n".join(lines)


def _failure_reason(r):
    reasons = []
    if not r.converged:
        reasons.append(r.termination_reason)
    if not r.in_band:
        reasons.append("outer count outside band")
    if np.isfinite(r.defect) and abs(r.defect) > DEFECT_TOL:
        reasons.append("defect")
    if r.invariants is not None and not r.invariants.get("passed", False):
        bad = [k for k in ("fejer_holds", "final_step_holds", "partial_sums_hold",
                           "optimality_holds") if not r.invariants.get(k)]
        reasons.append("invariants: " + ",".join(bad))
    return "; ".join(reasons)


# ---------------------------------------------------------------------------
# appendix and checkers

@dataclass
class AppendixResult:
    lam: float
    values: object
    det_identities: object
    det_kx: object
    trace_kx: object

    @property
    def passed(self):
        return (self.values.passed and self.det_identities.passed
                and self.det_kx.verdict == "no-violation-found"
                and self.trace_kx.verdict == "violation-found")

    def lines(self):
        out = [f"SPD counterexample values (lambda = {self.lam:g}):"]
        out += ["  " + s for s in self.values.lines()]
        out.append(f"det interpolation identity: max rel err "
                   f"{self.det_identities.det_identity_max_rel_err:.2e} over {self.det_identities.pairs} pairs "
                   f"({'ok' if self.det_identities.det_identity_holds else 'FAIL'})")
        out.append(f"det-Bregman closed form: max abs err {self.det_identities.closed_form_max_err:.2e} "
                   f"({'ok' if self.det_identities.closed_form_holds else 'FAIL'})")
        out.append(f"K_x with det-Bregman: {self.det_kx.verdict} "
                   f"({self.det_kx.pairs_tested} pairs)")
        out.append(f"K_x with trace-Bregman: {self.trace_kx.verdict} "
                   f"({len(self.trace_kx.violations)} violating pairs of "
                   f"{self.trace_kx.pairs_tested})")
        return out

    def to_dict(self):
        return {"lambda": self.lam, "passed": self.passed, "reference_values": self.values.to_dict(),
                "det_identities": self.det_identities.to_dict(), "det_kx": self.det_kx.to_dict(),
                "trace_kx": self.trace_kx.to_dict()}


def run_appendix(lam=1.0, pairs=100, seed=0):
    """Counterexample values, det identities and K_x probes on SPD(2)."""
    values = reproduce_reference_values(lam)
    det_identities = verify_det_identities(200, seed=seed)
    det_kx = test_kx_convexity(spd_regularized(lam, "det"), REF_X, pairs=pairs, seed=seed)
    trace_kx = test_kx_convexity(spd_regularized(lam, "trace"), REF_X, pairs=pairs, seed=seed)
    return AppendixResult(lam, values, det_identities, det_kx, trace_kx)


def run_checkers(cfg, samples=500, rays=16):
    """Run the condition checkers for every configured Bregman and lambda.

    The report flags conditions; it never fails. C6 is anchored at ``x0``.
    """
    f = make_bifunction(cfg.bifunction)
    x0 = np.asarray(cfg.x0, dtype=float)
    report = {
        "bifunction": f.name,
        "monotone": check_monotone(f, samples, seed=cfg.seed).to_dict(),
        "semicontinuity": check_upper_lower_semicontinuity(f, 100, seed=cfg.seed).to_dict(),
        "bregman": {},
    }
    for key in cfg.bregmans:
        phi = make_bregman(key, f.manifold)
        entry = {
            "level_set": check_level_set_bounded(phi, x0, 10.0, np.geomspace(0.1, 30, 15),
                                                 rays, seed=cfg.seed).to_dict(),
            "c6": {},
            "kx_convexity": {},
        }
        for lam in cfg.lambdas:
            c6 = check_c6(f, phi, x0, lam, rays=rays, seed=cfg.seed)
            entry["c6"][f"{lam:g}"] = c6.to_dict()
            g = RegularizedBifunction(f, phi, x0, lam)
            x = f.feasible.sample(np.random.default_rng(cfg.seed), 1.0, around=x0)
            entry["kx_convexity"][f"{lam:g}"] = test_kx_convexity(
                g, x, pairs=100, seed=cfg.seed).to_dict()
        report["bregman"][key] = entry
    report["spd_reference"] = {
        "trace_kx": test_kx_convexity(spd_regularized(1.0, "trace"), REF_X, pairs=100,
                                      seed=cfg.seed).to_dict(),
        "det_kx": test_kx_convexity(spd_regularized(1.0, "det"), REF_X, pairs=100,
                                    seed=cfg.seed).to_dict(),
    }
    return report


def summarize_checkers(report):
    """One line per flagged condition."""
    lines = [f"monotone: {'ok' if report['monotone']['holds'] else 'FLAG'} "
             f"(max F(x,y)+F(y,x) = {report['monotone']['max_sum']:.3e})",
             f"semicontinuity/convexity in y: "
             f"{'ok' if report['semicontinuity']['convexity_holds'] else 'FLAG'}"]
    for key, entry in report["bregman"].items():
        lines.append(f"{key}: level set bounded {entry['level_set']['bounded']}")
        for lam, c6 in entry["c6"].items():
            lines.append(f"{key} lambda={lam}: C6 min at largest radius "
                         f"{c6['min_at_largest_radius']:.3e} "
                         f"({'positive' if c6['positive'] else 'FLAG not positive'})")
        for lam, kx in entry["kx_convexity"].items():
            lines.append(f"{key} lambda={lam}: K_x {kx['verdict']}")
    if "spd_reference" in report:
        for name, kx in report["spd_reference"].items():
            lines.append(f"SPD {name}: {kx['verdict']}")
    return lines


# ---------------------------------------------------------------------------
# trace verification from files

@dataclass
class TraceCheck:
    path: str
    rows: int
    consistent: bool
    messages: list
    invariants: dict

    @property
    def passed(self):
        return self.consistent and self.invariants.get("passed", False)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def load_trace(csv_path):
    """Rebuild a SolverTrace and its (bifunction, Bregman) from the files of one run."""
    stem = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    try:
        rows = read_trace_csv(stem + ".csv")
        xs = read_iterates_csv(stem + ".iterates.csv")
        with open(stem + ".json") as fh:
            summary = json.load(fh)
    except (OSError, ValueError, KeyError, StopIteration) as exc:
        raise ConfigError(f"cannot load trace files for {stem}: {exc}") from exc
    f = make_bifunction(summary["bifunction"])
    phi = make_bregman(summary["bregman"], f.manifold)
    cfg = SolverConfig(**{k: v for k, v in summary["config"].items()})
    shape = np.asarray(f.manifold.origin()).shape
    xs = [x.reshape(shape) for x in xs]
    if len(xs) != len(rows) + 1:
        raise ContractError(f"{len(rows)} trace rows but {len(xs)} iterates")
    trace = SolverTrace(x0=xs[0], config=cfg, bifunction=f.name, bregman=phi.name,
                        termination_reason=summary["termination_reason"])
    for row, x in zip(rows, xs[1:]):
        trace.records.append(IterationRecord(row["n"], x, row["Er"], row["inner_iters"],
                                             cfg.lambda_at(row["n"]), row["D_step"],
                                             row["D_to_ref"]))
    return trace, f, phi, summary


def verify_trace(csv_path, seed=0):
    """Re-check a written trace: internal consistency and the run invariants."""
    trace, f, phi, summary = load_trace(csv_path)
    m = f.manifold
    msgs = []
    xs = trace.iterates
    for r in trace.records:
        er = m.dist(r.x, xs[r.n])
        if abs(er - r.er) > 1e-9 * max(1.0, er):
            msgs.append(f"row {r.n}: Er {r.er!r} does not match iterates ({er!r})")
            break
    if trace.outer_iters != summary["outer_iters"]:
        msgs.append("row count differs from outer_iters in the summary")
    if trace.records and trace.final_er != summary["final_er"]:
        msgs.append("last Er differs from final_er in the summary")
    if summary["termination_reason"] == "converged" and trace.final_er > trace.config.outer_tol:
        msgs.append("run marked converged but final Er exceeds outer_tol")
    try:
        inv = verify_run(trace, f, phi, seed=seed).to_dict()
    except ContractError as exc:
        inv = {"passed": False, "error": str(exc)}
    return TraceCheck(csv_path, trace.outer_iters, not msgs, msgs, inv)
