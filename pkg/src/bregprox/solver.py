"""Bregman regularized proximal point method for equilibrium problems.

Outer loop: given ``x_n``, the next iterate approximately solves the
regularized problem

    find x in C with  F(x, y) + lam_n (D(y, x_n) - D(y, x) - D(x, x_n)) >= 0  for all y in C

and the run stops once ``Er(n) = d(x_{n+1}, x_n) <= outer_tol``.

Each subproblem is solved by a Riemannian extragradient method whose
operator at ``y`` is the gradient of ``w -> g(y, w)`` at ``w = y``
(central differences along an orthonormal tangent basis). On the flat
positive orthant an exact-gradient variant runs the same scheme in log
coordinates.
"""

import csv
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .equilibrium import RegularizedBifunction
from .errors import ContractError, ConvergenceError, DomainError, ParameterError
from .manifolds import PositiveOrthant

INNER_METHODS = ("extragradient", "logchart-exact")
CSV_HEADER = ["n", "Er", "inner_iters", "D_to_ref", "D_step", "elapsed_ms"]


@dataclass
class SolverConfig:
    """Parameters of one run.

    ``lam`` is either a constant or a finite sequence (the last value is
    repeated once the sequence is exhausted).
    """

    lam: object = 0.3
    inner_tol: float = 1e-3
    outer_tol: float = 1e-6
    max_outer: int = 10000
    max_inner: int = 5000
    inner_method: str = "extragradient"
    step0: float = 0.01
    armijo_mu: float = 0.5
    armijo_beta: float = 0.5
    min_step: float = 1e-12
    fd_step: float = 1e-6
    residual_scale: float = 10.0

    def __post_init__(self):
        lams = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if lams.size == 0 or not np.all(lams > 0) or not np.all(np.isfinite(lams)):
            raise ParameterError(f"lambda schedule must be positive and bounded, got {self.lam}")
        for name in ("inner_tol", "outer_tol", "step0", "fd_step", "residual_scale"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if not 0 < self.armijo_mu < 1 or not 0 < self.armijo_beta < 1:
            raise ParameterError("armijo_mu and armijo_beta must lie in (0, 1)")
        if self.inner_method not in INNER_METHODS:
            raise ParameterError(f"inner_method must be one of {INNER_METHODS}")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ParameterError("iteration limits must be positive")

    def lambda_at(self, n):
        lams = np.atleast_1d(np.asarray(self.lam, dtype=float))
        return float(lams[min(n, lams.size - 1)])

    def to_dict(self):
        d = asdict(self)
        lams = np.atleast_1d(np.asarray(self.lam, dtype=float))
        d["lam"] = float(lams[0]) if lams.size == 1 else lams.tolist()
        return d


@dataclass
class IterationRecord:
    n: int
    x: np.ndarray  # x_{n+1}
    er: float
    inner_iters: int
    lam: float
    d_step: float  # D(x_{n+1}, x_n)
    d_to_ref: float = None  # D(x_ref, x_n)
    elapsed_ms: float = 0.0


@dataclass
class SolverTrace:
    x0: np.ndarray
    records: list = field(default_factory=list)
    termination_reason: str = "running"
    config: SolverConfig = None
    bifunction: str = ""
    bregman: str = ""
    wall_time_s: float = 0.0
    x_ref: np.ndarray = None

    @property
    def iterates(self):
        return [self.x0] + [r.x for r in self.records]

    @property
    def outer_iters(self):
        return len(self.records)

    @property
    def total_inner_iters(self):
        return sum(r.inner_iters for r in self.records)

    @property
    def final_point(self):
        return self.iterates[-1]

    @property
    def final_er(self):
        return self.records[-1].er if self.records else float("nan")

    def attach_reference(self, x_ref, bregman):
        """Fill ``d_to_ref = D(x_ref, x_n)`` for every record."""
        self.x_ref = np.asarray(x_ref, dtype=float)
        xs = self.iterates
        for r in self.records:
            r.d_to_ref = bregman.distance(self.x_ref, xs[r.n])

    def write_csv(self, path, timing=False):
        """Per-iteration CSV. Timings are left blank unless ``timing`` is set,
        so repeated runs produce byte-identical files."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in self.records:
                w.writerow([
                    r.n, repr(float(r.er)), r.inner_iters,
                    "" if r.d_to_ref is None else repr(float(r.d_to_ref)),
                    repr(float(r.d_step)),
                    f"{r.elapsed_ms:.3f}" if timing else "",
                ])

    def write_iterates(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            xs = self.iterates
            w.writerow(["n"] + [f"x{i}" for i in range(np.asarray(xs[0]).size)])
            for n, x in enumerate(xs):
                w.writerow([n] + [repr(float(c)) for c in np.ravel(x)])

    def summary(self):
        return {
            "config": self.config.to_dict() if self.config is not None else None,
            "bifunction": self.bifunction,
            "bregman": self.bregman,
            "termination_reason": self.termination_reason,
            "outer_iters": self.outer_iters,
            "total_inner_iters": self.total_inner_iters,
            "final_er": self.final_er,
            "final_point": np.asarray(self.final_point).tolist(),
            "wall_time_s": self.wall_time_s,
        }

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def read_trace_csv(path):
    """Read a trace CSV back into a list of dicts with numeric values."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ContractError(f"unexpected trace header {reader.fieldnames}")
        for row in reader:
            rows.append({
                "n": int(row["n"]),
                "Er": float(row["Er"]),
                "inner_iters": int(row["inner_iters"]),
                "D_to_ref": float(row["D_to_ref"]) if row["D_to_ref"] else None,
                "D_step": float(row["D_step"]),
                "elapsed_ms": float(row["elapsed_ms"]) if row["elapsed_ms"] else None,
            })
    return rows


def read_iterates_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [np.array([float(c) for c in row[1:]]) for row in reader]


# ---------------------------------------------------------------------------
# inner solvers

def _fd_scale(y):
    return 1.0 + float(np.max(np.abs(y)))


def fd_gradient(g, y, fd_step=1e-6):
    """Riemannian gradient of ``w -> g(y, w)`` at ``w = y`` by central differences.

    Falls back to a one-sided difference when a probe leaves the domain.
    """
    m = g.manifold
    gy = g.partial(y)
    h = fd_step * _fd_scale(y)
    g0 = None
    grad = m.zero_vector(y)
    for e in m.tangent_basis(y):
        try:
            gp = gy(m.exp(y, h * e))
            plus = True
        except DomainError:
            plus = False
        try:
            gm = gy(m.exp(y, -h * e))
            minus = True
        except DomainError:
            minus = False
        if plus and minus:
            c = (gp - gm) / (2 * h)
        else:
            if g0 is None:
                g0 = gy(y)
            if plus:
                c = (gp - g0) / h
            elif minus:
                c = (g0 - gm) / h
            else:
                raise DomainError("finite-difference probes left the domain on both sides")
        grad = grad + c * e
    return grad


class _RiemannianSteps:
    """Geometry callbacks for the extragradient core on a general manifold."""

    def __init__(self, g, cfg):
        self.g, self.cfg, self.m = g, cfg, g.manifold

    def project(self, x):
        x = self.g.feasible.clamp(x)
        self.g.bregman.check_zone(x)
        return x

    def operator(self, y):
        return fd_gradient(self.g, y, self.cfg.fd_step)

    def move(self, y, v):
        return self.project(self.m.exp(y, v))

    def dist(self, a, b):
        return self.m.dist(a, b)

    def carry(self, z, y, v):
        return self.m.transport(z, y, v)

    def norm(self, y, v):
        return self.m.norm(y, v)


class _LogChartSteps:
    """Euclidean steps in ``u = ln x`` with exact gradients (flat orthant only)."""

    def __init__(self, g, cfg):
        m = g.manifold
        if not isinstance(m, PositiveOrthant):
            raise ContractError("logchart-exact inner solver requires the positive orthant")
        if g.base.y_gradient is None:
            raise ContractError(f"{g.base.name} provides no exact y-gradient")
        self.g, self.m = g, m
        phi = g.bregman
        self.anchor_grad = m.tangent_to_chart(g.anchor, phi.gradient(g.anchor))

    def project(self, u):
        x = self.g.feasible.clamp(self.m.from_chart(u))
        self.g.bregman.check_zone(x)
        return np.log(x)

    def operator(self, u):
        x = self.m.from_chart(u)
        phi, base = self.g.bregman, self.g.base
        return (self.m.tangent_to_chart(x, base.y_gradient(x))
                + self.g.lam * (self.m.tangent_to_chart(x, phi.gradient(x)) - self.anchor_grad))

    def move(self, u, w):
        return self.project(u + w)

    def dist(self, a, b):
        return float(np.linalg.norm(a - b))

    def carry(self, z, y, w):
        return w

    def norm(self, y, w):
        return float(np.linalg.norm(w))


def _extragradient(ops, y, cfg, step=None, history=None):
    """Extragradient core with Armijo-type backtracking.

    Predictor ``z = P(exp(y, -a G(y)))``, corrector ``y+ = P(exp(y, -a G(z)))``
    with ``G(z)`` transported back to ``y``. The step ``a`` is halved until
    ``a ||G(y) - G(z)|| <= mu d(y, z)``; it never increases within a solve.
    Stops when ``d(y+, y) < inner_tol``.

    Returns ``(y, iterations, final_step)``. If ``history`` is a list, the
    distance moved in each iteration is appended to it.
    """
    alpha = cfg.step0 if step is None else min(step, cfg.step0)
    gy = ops.operator(y)
    for k in range(1, cfg.max_inner + 1):
        while True:
            z = ops.move(y, -alpha * gy)
            gz = ops.carry(z, y, ops.operator(z))
            if (alpha * ops.norm(y, gy - gz) <= cfg.armijo_mu * ops.dist(y, z)
                    or alpha <= cfg.min_step):
                break
            alpha *= cfg.armijo_beta
        y_new = ops.move(y, -alpha * gz)
        moved = ops.dist(y, y_new)
        if history is not None:
            history.append(moved)
        y = y_new
        if moved < cfg.inner_tol:
            return y, k, alpha
        gy = ops.operator(y)
    raise ConvergenceError(f"inner solver did not converge in {cfg.max_inner} iterations",
                           partial=y)


def solve_inner_extragradient(g, start, cfg, step=None, history=None):
    """Approximately solve ``EP(g, C)`` from ``start``.

    Parameters
    ----------
    g : RegularizedBifunction
    start : ndarray
        Point in ``C`` and the Bregman zone.
    cfg : SolverConfig
    step : float, optional
        Initial step (capped at ``cfg.step0``).
    history : list, optional
        Receives the distance moved in each iteration.

    Returns
    -------
    y : ndarray
    iterations : int
    """
    y, k, _ = _extragradient(_RiemannianSteps(g, cfg), _feasible_start(g, start), cfg, step,
                             history)
    return y, k


def solve_inner_logchart(g, start, cfg, step=None, history=None):
    """Same scheme in ``u = ln x`` with exact gradients; positive orthant only."""
    ops = _LogChartSteps(g, cfg)
    u, k, _ = _extragradient(ops, np.log(_feasible_start(g, start)), cfg, step, history)
    return np.exp(u), k


def _feasible_start(g, start):
    start = g.manifold.check_point(start)
    if not g.feasible.contains(start):
        raise DomainError(f"start point outside C ({g.feasible.description})")
    return g.bregman.check_zone(start)


def _inner_dispatch(g, x, cfg, step):
    if cfg.inner_method == "extragradient":
        return _extragradient(_RiemannianSteps(g, cfg), x, cfg, step)
    ops = _LogChartSteps(g, cfg)
    u, k, a = _extragradient(ops, np.log(x), cfg, step)
    return np.exp(u), k, a


# ---------------------------------------------------------------------------
# outer loop

def solve_outer(f, bregman, x0, cfg=None):
    """Run the Bregman regularized proximal point method.

    Parameters
    ----------
    f : Bifunction
    bregman : BregmanFunction
    x0 : ndarray
        Starting point in ``C`` and in the Bregman zone.
    cfg : SolverConfig, optional

    Returns
    -------
    SolverTrace
        ``termination_reason`` is ``"converged"`` or ``"max_outer"``.

    Raises
    ------
    ConvergenceError
        If an inner solve exceeds ``max_inner``; ``partial`` holds the trace so far.
    DomainError
        If ``x0`` is infeasible or an iterate escapes the zone.
    """
    cfg = SolverConfig() if cfg is None else cfg
    x = f.manifold.check_point(x0)
    if not f.feasible.contains(x):
        raise DomainError(f"x0 outside C ({f.feasible.description})")
    bregman.check_zone(x)
    if abs(f(x, x)) > 1e-12:
        raise ContractError(f"{f.name}: F(x0, x0) != 0")
    m = f.manifold
    trace = SolverTrace(x0=x.copy(), config=cfg, bifunction=f.name, bregman=bregman.name)
    t_start = time.perf_counter()
    step = None
    for n in range(cfg.max_outer):
        lam = cfg.lambda_at(n)
        g = RegularizedBifunction(f, bregman, x, lam)
        t0 = time.perf_counter()
        try:
            y, k, step = _inner_dispatch(g, x, cfg, None if step is None else step / cfg.armijo_beta)
        except ConvergenceError as exc:
            trace.termination_reason = "inner_failure"
            trace.wall_time_s = time.perf_counter() - t_start
            raise ConvergenceError(f"outer iteration {n}: {exc}", partial=trace) from exc
        er = m.dist(y, x)
        trace.records.append(IterationRecord(
            n=n, x=y, er=er, inner_iters=k, lam=lam, d_step=bregman.distance(y, x),
            elapsed_ms=1e3 * (time.perf_counter() - t0)))
        x = y
        if er <= cfg.outer_tol:
            trace.termination_reason = "converged"
            break
    else:
        trace.termination_reason = "max_outer"
    trace.wall_time_s = time.perf_counter() - t_start
    return trace


# ---------------------------------------------------------------------------
# certificates

@dataclass
class SubproblemResidual:
    y_witness: list
    value: float
    mean: float
    samples: int
    radius: float
    threshold: float

    @property
    def holds(self):
        return self.value >= self.threshold

    def to_dict(self):
        d = asdict(self)
        d["holds"] = self.holds
        return d


def _ball_grid(m, x, radius, per_axis):
    ticks = np.linspace(-radius, radius, per_axis)
    basis = m.tangent_basis(x)
    mesh = np.meshgrid(*([ticks] * len(basis)), indexing="ij")
    coefs = np.stack([c.ravel() for c in mesh], axis=1)
    coefs = coefs[np.linalg.norm(coefs, axis=1) <= radius * (1 + 1e-12)]
    return [m.exp(x, sum(c * e for c, e in zip(row, basis))) for row in coefs]


def subproblem_residual(g, x_next, radius=0.1, per_axis=10, cfg=None):
    """Sampled certificate for ``g(x_next, y) >= 0`` over ``y`` in ``C``.

    ``y`` ranges over the points of a ``per_axis^dim`` grid in normal
    coordinates around ``x_next`` that lie in the ball of radius ``radius``; points outside ``C`` or the zone are
    skipped. The threshold is ``-inner_tol * residual_scale``.
    """
    cfg = SolverConfig() if cfg is None else cfg
    m = g.manifold
    gx = g.partial(x_next)
    best, best_y, vals = np.inf, None, []
    for y in _ball_grid(m, x_next, radius, per_axis):
        if not (g.feasible.contains(y) and g.bregman.in_zone(y)):
            continue
        v = gx(y)
        vals.append(v)
        if v < best:
            best, best_y = v, y
    return SubproblemResidual(m.to_json(best_y), float(best), float(np.mean(vals)),
                              len(vals), radius, -cfg.inner_tol * cfg.residual_scale)


@dataclass
class RunReport:
    x_ref: list
    fejer_holds: bool
    fejer_worst_increase: float
    final_d_step: float
    final_step_holds: bool
    partial_sums_hold: bool
    partial_sums_worst_excess: float
    optimality_holds: bool
    optimality_min: float
    fejer_slack: float
    residual_tol: float

    @property
    def passed(self):
        return self.fejer_holds and self.final_step_holds and self.partial_sums_hold \
            and self.optimality_holds

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def verify_run(trace, f, bregman, x_ref=None, fejer_slack=1e-6, final_step_tol=1e-8,
               residual_tol=1e-2, residual_radius=0.1, residual_samples=32, seed=0):
    """Check the run-level consequences of the convergence theory on a trace.

    (a) ``D(x_ref, x_n)`` nonincreasing within ``fejer_slack``;
    (b) final ``D(x_{n+1}, x_n) <= final_step_tol`` and
        ``sum_{k<=n} D(x_{k+1}, x_k) <= D(x_ref, x_0) + (n+1) fejer_slack``;
    (c) ``F(x_{n+1}, y) + lam_n (D(y, x_n) - D(y, x_{n+1})) >= -residual_tol``
        for random ``y`` in ``C`` on the geodesic sphere of radius
        ``residual_radius`` around ``x_{n+1}``.

    On the orthant the left side of (c) is affine in ``ln y``, so its sampled
    minimum is about ``lam_n D(x_{n+1}, x_n) - |T| residual_radius`` where
    ``T`` is the leftover subproblem gradient; the radius sets the scale.

    ``x_ref`` defaults to the projection of the final iterate onto the known
    solution set.
    """
    m = f.manifold
    xs = trace.iterates
    if x_ref is None:
        if f.solution_projector is None:
            raise ContractError(f"{f.name} has no known solution set; pass x_ref")
        x_ref = f.solution_projector(xs[-1])
    x_ref = bregman.check_zone(x_ref)
    d_ref = [bregman.distance(x_ref, x) for x in xs]
    increases = np.diff(d_ref) if len(d_ref) > 1 else np.zeros(0)
    worst_inc = float(increases.max()) if increases.size else 0.0

    steps = np.array([r.d_step for r in trace.records])
    final_step = float(steps[-1]) if steps.size else 0.0
    if steps.size:
        bound = d_ref[0] + fejer_slack * np.arange(1, steps.size + 1)
        excess = float(np.max(np.cumsum(steps) - bound))
    else:
        excess = -np.inf

    rng = np.random.default_rng(seed)
    opt_min = np.inf
    for r in trace.records:
        x_prev, x_next = xs[r.n], r.x
        for _ in range(residual_samples):
            v = m.random_unit_tangent(x_next, rng)
            y = m.exp(x_next, residual_radius * v)
            if not (f.feasible.contains(y) and bregman.in_zone(y)):
                continue
            val = f(x_next, y) + r.lam * (bregman.distance(y, x_prev) - bregman.distance(y, x_next))
            opt_min = min(opt_min, val)
    opt_min = float(opt_min) if np.isfinite(opt_min) else 0.0

    return RunReport(
        x_ref=m.to_json(x_ref),
        fejer_holds=worst_inc <= fejer_slack,
        fejer_worst_increase=worst_inc,
        final_d_step=final_step,
        final_step_holds=final_step <= final_step_tol,
        partial_sums_hold=excess <= 0,
        partial_sums_worst_excess=excess if np.isfinite(excess) else 0.0,
        optimality_holds=opt_min >= -residual_tol,
        optimality_min=opt_min,
        fejer_slack=fejer_slack,
        residual_tol=residual_tol,
    )

