"""Bifunctions, their Bregman regularization and empirical condition checks."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContractError, DomainError, ParameterError
from .manifolds import PositiveOrthant, SPDManifold

C1_TOL = 1e-12
CLAMP_DELTA = 1e-9
EXAMPLE1_DIRECTION = np.array([1.0, 1.0, -1.0])


class FeasibleSet:
    """Feasible set ``C``: membership, an interior clamp and a sampler.

    Parameters
    ----------
    manifold : Manifold
    contains : callable
        Membership predicate on (already valid) manifold points.
    clamp : callable
        Maps a nearby point to a strictly feasible one.
    center : ndarray
        Default centre for random sampling.
    description : str
    """

    def __init__(self, manifold, contains, clamp, center, description):
        self.manifold = manifold
        self._contains = contains
        self._clamp = clamp
        self.center = manifold.check_point(center)
        self.description = description

    def contains(self, x):
        try:
            x = self.manifold.check_point(x)
        except DomainError:
            return False
        return bool(self._contains(x))

    def clamp(self, x):
        return self._clamp(self.manifold.check_point(x))

    def sample(self, rng, scale=1.0, around=None, tries=100):
        """Random feasible point at geodesic distance ~ ``scale`` from ``around``."""
        around = self.center if around is None else around
        for _ in range(tries):
            y = self.manifold.random_point(rng, scale, around)
            if self.contains(y):
                return y
        return self.clamp(y)


def orthant_box(n=3, lower=1.0, delta=CLAMP_DELTA):
    """``C = (lower, inf)^n`` in the weighted orthant, clamped to ``lower + delta``."""
    m = PositiveOrthant(n)
    floor = lower + delta
    return FeasibleSet(
        m,
        contains=lambda x: bool(np.all(x > lower)),
        clamp=lambda x: np.maximum(x, floor),
        center=np.full(n, np.e * lower),
        description=f"all coordinates > {lower}",
    )


def whole_manifold(manifold):
    return FeasibleSet(manifold, lambda x: True, lambda x: x, manifold.origin(),
                       "whole manifold")


class Bifunction:
    """A bifunction ``F: C x C -> R`` with ``F(x, x) = 0``.

    Parameters
    ----------
    manifold : Manifold
    evaluate : callable
        ``evaluate(x, y) -> float``.
    feasible : FeasibleSet
    name : str
    solution_predicate : callable, optional
        ``predicate(x, tol) -> bool`` for problems with a known solution set.
    solution_projector : callable, optional
        Maps a point to (an approximation of) its projection onto the solution set.
    y_gradient : callable, optional
        ``y_gradient(x)`` is the Riemannian gradient of ``F(x, .)`` at ``x``.
    check_c1 : bool
        Spot-check ``F(x, x) = 0`` on a few feasible points at construction.
    """

    def __init__(self, manifold, evaluate, feasible, name, solution_predicate=None,
                 solution_projector=None, y_gradient=None, check_c1=True):
        self.manifold = manifold
        self._evaluate = evaluate
        self.feasible = feasible
        self.name = name
        self.solution_predicate = solution_predicate
        self.solution_projector = solution_projector
        self.y_gradient = y_gradient
        if check_c1:
            rng = np.random.default_rng(0)
            for _ in range(5):
                x = feasible.sample(rng)
                val = self(x, x)
                if abs(val) > C1_TOL:
                    raise ContractError(f"{name}: F(x, x) = {val!r} != 0")

    def __repr__(self):
        return f"Bifunction({self.name!r})"

    def __call__(self, x, y):
        m = self.manifold
        return float(self._evaluate(m.check_point(x), m.check_point(y)))

    def check_args(self, *points):
        for p in points:
            if not self.feasible.contains(p):
                raise DomainError(f"{self.name}: argument outside C ({self.feasible.description})")


class RegularizedBifunction:
    """``F(x, y) + lam * (D(y, a) - D(y, x) - D(x, a))`` for an anchor ``a``."""

    def __init__(self, base, bregman, anchor, lam):
        if not lam > 0:
            raise ParameterError(f"regularization weight must be positive, got {lam}")
        self.base = base
        self.bregman = bregman
        self.anchor = bregman.check_zone(anchor)
        self.lam = float(lam)
        self.manifold = base.manifold
        self.feasible = base.feasible
        self.name = f"{base.name}+{bregman.name}"

    def __repr__(self):
        return f"RegularizedBifunction({self.name!r}, lam={self.lam})"

    def __call__(self, x, y):
        d = self.bregman.distance
        a = self.anchor
        return float(self.base(x, y) + self.lam * (d(y, a) - d(y, x) - d(x, a)))

    def partial(self, x):
        """Return ``w -> self(x, w)`` with the ``x``-dependent terms cached.

        ``phi(w)`` cancels between ``D(w, a)`` and ``D(w, x)``, so it is never
        evaluated; the result equals ``self(x, w)`` up to rounding.
        """
        phi, m, a, lam = self.bregman, self.manifold, self.anchor, self.lam
        x = phi.check_zone(x)
        ga = phi.gradient(a)
        gx = phi.gradient(x)
        const = phi(x) - phi(a) - phi.distance(x, a)
        base = self.base

        def g(w):
            w = phi.check_zone(w)
            reg = const - m.inner(a, ga, m.log(a, w)) + m.inner(x, gx, m.log(x, w))
            return float(base(x, w) + lam * reg)

        return g


def regularize(base, bregman, anchor, lam):
    return RegularizedBifunction(base, bregman, anchor, lam)


# ---------------------------------------------------------------------------
# concrete bifunctions

def example1_defect(x):
    """``ln(x1 x2 / x3)``; the solution set of the orthant example is its zero set."""
    x = np.asarray(x, dtype=float)
    return float(np.log(x[0]) + np.log(x[1]) - np.log(x[2]))


def example1_project(x):
    """Geodesic projection onto ``{x1 x2 = x3}`` (straight in log coordinates)."""
    u = np.log(np.asarray(x, dtype=float))
    s = u @ EXAMPLE1_DIRECTION
    return np.exp(u - (s / 3.0) * EXAMPLE1_DIRECTION)


def make_example1(lower=1.0):
    """``F(x, y) = 3 ln(x1 x2/x3) [ln(y1/x1) + ln(y2/x2) - ln(y3/x3)]`` on ``(1, inf)^3``.

    In log coordinates ``F(x, y) = <A(u), v - u>`` with
    ``A(u) = 3 (u1 + u2 - u3) (1, 1, -1)``, so ``F(x, y) >= 0`` for all ``y``
    exactly when ``x1 x2 = x3``.
    """
    m = PositiveOrthant(3)
    feasible = orthant_box(3, lower)
    a = EXAMPLE1_DIRECTION

    def evaluate(x, y):
        if not (np.all(x > lower) and np.all(y > lower)):
            raise DomainError(f"example1: argument outside C ({feasible.description})")
        return 3.0 * example1_defect(x) * (np.log(y / x) @ a)

    def y_gradient(x):
        return 3.0 * example1_defect(x) * a * x

    return Bifunction(
        m, evaluate, feasible, "example1",
        solution_predicate=lambda x, tol=1e-3: abs(example1_defect(x)) <= tol,
        solution_projector=example1_project,
        y_gradient=y_gradient,
    )


def spd_logdet_inner_form(x, y):
    """``<A(x), log_x y>_x`` with ``A(x) = x``, evaluated geometrically."""
    m = SPDManifold(len(x))
    return m.inner(x, x, m.log(x, y))


def make_spd_logdet(n=2):
    """``F(x, y) = ln det y - ln det x`` on SPD(n)."""
    m = SPDManifold(n)

    def evaluate(x, y):
        sx, lx = np.linalg.slogdet(x)
        sy, ly = np.linalg.slogdet(y)
        if sx <= 0 or sy <= 0:
            raise DomainError("spd-logdet: argument is not positive definite")
        return ly - lx

    return Bifunction(m, evaluate, whole_manifold(m), "spd-logdet",
                      y_gradient=lambda x: np.array(x, dtype=float))


def make_distance_squared(manifold):
    """``F(x, y) = d(x, y)^2``: satisfies C1 but is not monotone (negative control)."""
    return Bifunction(manifold, lambda x, y: manifold.dist(x, y) ** 2,
                      whole_manifold(manifold), "distance-squared")


BIFUNCTION_KEYS = ("example1", "spd-logdet")


def make_bifunction(key):
    if key == "example1":
        return make_example1()
    if key == "spd-logdet":
        return make_spd_logdet()
    raise KeyError(f"unknown bifunction key {key!r}; expected one of {BIFUNCTION_KEYS}")


# ---------------------------------------------------------------------------
# condition checkers (samplers, not provers)

@dataclass
class MonotoneReport:
    samples: int
    max_sum: float
    violations: int
    worst_pair: list
    holds: bool
    tol: float = 1e-10

    def to_dict(self):
        return asdict(self)


def check_monotone(f, samples=500, seed=0, scale=1.0, tol=1e-10):
    """Sample ``F(x, y) + F(y, x)`` over random feasible pairs."""
    m = f.manifold
    rng = np.random.default_rng(seed)
    worst, worst_pair, bad = -np.inf, [], 0
    for _ in range(samples):
        x = f.feasible.sample(rng, scale)
        y = f.feasible.sample(rng, scale)
        s = f(x, y) + f(y, x)
        if s > tol:
            bad += 1
        if s > worst:
            worst, worst_pair = s, [m.to_json(x), m.to_json(y)]
    return MonotoneReport(samples, float(worst), bad, worst_pair, bad == 0, tol)


@dataclass
class C6Report:
    lam: float
    radii: list
    rays_probed: int
    rays_rejected: int
    values: list = field(default_factory=list)
    min_at_largest_radius: float = float("nan")
    positive: bool = False
    increasing: bool = False
    first_positive_radius: float = float("nan")
    flagged_rays: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def check_c6(f, bregman, anchor, lam, rays=16, radii=None, seed=0, max_draws=None):
    """Probe ``g(r) = F(a, y(r)) + lam (D(a, y(r)) + D(y(r), a))`` along rays.

    Rays are geodesics from the anchor whose far end stays inside ``C`` and
    the Bregman zone (``C`` is geodesically convex, so the whole segment
    does). Directions failing that test are rejected and counted; a ray that
    nevertheless produces a domain error mid-way is flagged and truncated.
    ``positive`` refers to the minimum over rays at the largest radius;
    ``first_positive_radius`` is the smallest probed radius from which ``g``
    stays positive on every ray.
    """
    m = f.manifold
    rng = np.random.default_rng(seed)
    radii = list(np.geomspace(1.0, 50.0, 12)) if radii is None else sorted(radii)
    radii = [float(r) for r in radii]
    anchor = bregman.check_zone(anchor)
    max_draws = 200 * rays if max_draws is None else max_draws
    report = C6Report(float(lam), radii, 0, 0)
    draws = 0
    while report.rays_probed < rays and draws < max_draws:
        draws += 1
        v = m.random_unit_tangent(anchor, rng)
        end = m.exp(anchor, radii[-1] * v)
        if not (f.feasible.contains(end) and bregman.in_zone(end)):
            report.rays_rejected += 1
            continue
        row = []
        for r in radii:
            y = m.exp(anchor, r * v)
            try:
                row.append(f(anchor, y) + lam * (bregman.distance(anchor, y)
                                                 + bregman.distance(y, anchor)))
            except DomainError:
                report.flagged_rays.append(report.rays_probed)
                break
        report.values.append([float(g) for g in row])
        report.rays_probed += 1
    complete = [row for row in report.values if len(row) == len(radii)]
    if complete:
        last = np.array([row[-1] for row in complete])
        report.min_at_largest_radius = float(last.min())
        report.positive = bool(last.min() > 0)
        report.increasing = all(row[-1] > row[-2] for row in complete) if len(radii) > 1 else True
        grid = np.array(complete)
        for k in range(len(radii)):
            if np.all(grid[:, k:] > 0):
                report.first_positive_radius = radii[k]
                break
    return report


@dataclass
class SemicontinuityReport:
    samples: int
    worst_continuity_gap: float
    worst_convexity_excess: float
    continuity_holds: bool
    convexity_holds: bool

    def to_dict(self):
        return asdict(self)


def check_upper_lower_semicontinuity(f, samples=100, seed=0, scale=1.0,
                                     t_grid=(0.25, 0.5, 0.75), tol=1e-10):
    """Probe continuity of ``x -> F(x, y)`` and geodesic convexity of ``y -> F(x, y)``.

    Continuity: ``|F(x_k, y) - F(x, y)|`` for ``x_k = exp(x, 2^-k v)`` with
    ``k = 40`` (the reported gap should be at rounding level).
    Convexity: midpoint-type excess ``F(x, g(t)) - (1-t) F(x, y1) - t F(x, y2)``
    relative to ``1 + |F|``.
    """
    m = f.manifold
    rng = np.random.default_rng(seed)
    gap, excess = 0.0, -np.inf
    for _ in range(samples):
        x = f.feasible.sample(rng, scale)
        y1 = f.feasible.sample(rng, scale)
        y2 = f.feasible.sample(rng, scale)
        v = m.random_unit_tangent(x, rng)
        xk = f.feasible.clamp(m.exp(x, 2.0 ** -40 * v))
        gap = max(gap, abs(f(xk, y1) - f(x, y1)))
        f1, f2 = f(x, y1), f(x, y2)
        geo = m.geodesic(y1, y2)
        for t in t_grid:
            val = f(x, geo(t)) - (1 - t) * f1 - t * f2
            excess = max(excess, val / (1.0 + abs(f1) + abs(f2)))
    return SemicontinuityReport(samples, float(gap), float(excess),
                                gap <= 1e-6, excess <= tol)
