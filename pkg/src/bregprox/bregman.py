"""Bregman functions on Hadamard manifolds and their Bregman distances.

The distance is always evaluated through the intrinsic formula

    D(x, y) = phi(x) - phi(y) - <grad phi(y), log_y x>_y

Closed forms for particular functions are exposed separately and are only
used as cross-checks.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .manifolds import PositiveOrthant, SPDManifold, logm_spd, symmetrize

BREG2_ZONE_MARGIN = 1e-12


class BregmanFunction:
    """A strictly geodesically convex ``phi`` with its Riemannian gradient.

    Parameters
    ----------
    manifold : Manifold
    value, grad : callable
        ``value(x) -> float`` and ``grad(x) -> tangent vector at x``.
    name : str
    in_zone : callable, optional
        Predicate for the zone ``Z``; defaults to the whole manifold.
    zone_description : str
    """

    def __init__(self, manifold, value, grad, name, in_zone=None,
                 zone_description="whole manifold"):
        self.manifold = manifold
        self._value = value
        self._grad = grad
        self.name = name
        self._in_zone = in_zone
        self.zone_description = zone_description

    def __repr__(self):
        return f"BregmanFunction({self.name!r} on {self.manifold!r})"

    def in_zone(self, x):
        try:
            x = self.manifold.check_point(x)
        except DomainError:
            return False
        return True if self._in_zone is None else bool(self._in_zone(x))

    def check_zone(self, x):
        x = self.manifold.check_point(x)
        if self._in_zone is not None and not self._in_zone(x):
            raise DomainError(f"{self.name}: point outside zone ({self.zone_description})")
        return x

    def __call__(self, x):
        return float(self._value(self.check_zone(x)))

    def gradient(self, x):
        return self._grad(self.check_zone(x))

    def distance(self, x, y):
        """Bregman distance ``D(x, y)``; ``x`` in the zone, ``y`` in the zone."""
        x = self.check_zone(x)
        y = self.check_zone(y)
        m = self.manifold
        return float(self._value(x) - self._value(y)
                     - m.inner(y, self._grad(y), m.log(y, x)))


def bregman_distance(phi, x, y):
    return phi.distance(x, y)


# ---------------------------------------------------------------------------
# concrete Bregman functions

def make_org(manifold, x0=None):
    """``phi(x) = d(x, x0)^2 / 2`` with gradient ``-log_x x0``."""
    x0 = manifold.origin() if x0 is None else manifold.check_point(x0)

    def value(x):
        return 0.5 * manifold.dist(x, x0) ** 2

    def grad(x):
        return -manifold.log(x, x0)

    return BregmanFunction(manifold, value, grad, "org")


def make_breg1(n=3):
    """``phi(x) = sum(ln^2 x_i + x_i^2)`` on the weighted orthant."""
    m = PositiveOrthant(n)

    def value(x):
        return np.sum(np.log(x) ** 2 + x ** 2)

    def grad(x):
        # G(x)^{-1} times the Euclidean gradient
        return 2.0 * x * np.log(x) + 2.0 * x ** 3

    return BregmanFunction(m, value, grad, "breg1")


def _breg2_zone(x):
    return bool(np.all(x > 1.0 + BREG2_ZONE_MARGIN))


def make_breg2(n=3):
    """``psi(x) = sum(ln x_i * ln ln x_i)`` with zone ``(1, inf)^n``."""
    m = PositiveOrthant(n)

    def value(x):
        lx = np.log(x)
        return np.sum(lx * np.log(lx))

    def grad(x):
        return x * (1.0 + np.log(np.log(x)))

    return BregmanFunction(m, value, grad, "breg2", in_zone=_breg2_zone,
                           zone_description="all coordinates > 1")


def make_det_bregman(n=2):
    """``phi(x) = det x`` on SPD(n); ``grad phi(x) = det(x) x``."""
    m = SPDManifold(n)
    return BregmanFunction(m, np.linalg.det, lambda x: np.linalg.det(x) * x, "spd-det")


def make_trace_bregman(n=2):
    """``psi(x) = tr x`` on SPD(n); ``grad psi(x) = x^2``."""
    m = SPDManifold(n)
    return BregmanFunction(m, np.trace, lambda x: symmetrize(x @ x), "spd-trace")


BREGMAN_KEYS = ("org", "breg1", "breg2", "spd-det", "spd-trace")


def make_bregman(key, manifold=None):
    """Build a Bregman function from its configuration key."""
    if key == "org":
        return make_org(manifold if manifold is not None else PositiveOrthant(3))
    n = None if manifold is None else manifold.n
    if key == "breg1":
        return make_breg1(n or 3)
    if key == "breg2":
        return make_breg2(n or 3)
    if key == "spd-det":
        return make_det_bregman(n or 2)
    if key == "spd-trace":
        return make_trace_bregman(n or 2)
    raise KeyError(f"unknown Bregman key {key!r}; expected one of {BREGMAN_KEYS}")


# ---------------------------------------------------------------------------
# closed forms (cross-checks only)

def breg1_expanded(x, y):
    """Direct expansion of the intrinsic formula for ``sum(ln^2 x + x^2)``."""
    r = np.log(x / y)
    return float(np.sum(r ** 2 + x ** 2 - y ** 2 - 2.0 * y ** 2 * r))


def breg1_printed(x, y):
    """The closed form as printed for ``sum(ln^2 x + x^2)``.

    It does not agree with the intrinsic formula (the first summand lacks a
    square, among other things); kept so tests can pin the discrepancy.
    """
    return float(np.sum(np.log(x / y) + 2.0 * (x - y) ** 2
                        + 2.0 * (y ** 2 * np.log(y / x) + x * y - y ** 2)))


def breg2_closed_form(x, y):
    lx, ly = np.log(x), np.log(y)
    return float(np.sum(lx * np.log(lx) - ly * np.log(ly)
                        - np.log(x / y) * (1.0 + np.log(ly))))


def det_closed_form(x, y):
    dx, dy = np.linalg.det(x), np.linalg.det(y)
    return float(dx - dy - dy * np.log(dx / dy))


def trace_closed_form(x, y):
    s = SPDManifold(len(y))._roots(y)[1]
    return float(np.trace(x) - np.trace(y) - np.trace(y @ logm_spd(symmetrize(s @ x @ s))))


# ---------------------------------------------------------------------------
# empirical probes for the level-set and limit conditions

@dataclass
class LevelSetReport:
    alpha: float
    radii: list
    rays: int
    largest_radius_in_set: float
    bounded: bool
    rays_leaving_zone: int
    note: str = "empirical evidence from ray probing, not a proof"

    def to_dict(self):
        return asdict(self)


def check_level_set_bounded(phi, x, alpha, radii, rays=16, seed=0):
    """Probe the right level set ``{y : D(x, y) <= alpha}`` along geodesic rays.

    ``bounded`` is reported when on every ray ``D(x, y) > alpha`` holds at the
    largest probed radius (or the ray has left the zone, where the set is
    empty by definition).
    """
    m = phi.manifold
    x = phi.check_zone(x)
    rng = np.random.default_rng(seed)
    radii = sorted(float(r) for r in radii)
    largest = 0.0
    bounded = True
    left = 0
    for _ in range(rays):
        direction = m.random_unit_tangent(x, rng)
        exceeded_at_end = True
        for r in radii:
            y = m.exp(x, r * direction)
            if not phi.in_zone(y):
                left += 1
                exceeded_at_end = True
                break
            inside = phi.distance(x, y) <= alpha
            if inside:
                largest = max(largest, r)
            exceeded_at_end = not inside
        bounded = bounded and exceeded_at_end
    return LevelSetReport(alpha, radii, rays, largest, bounded, left)


@dataclass
class LimitReport:
    b2_values: list
    b2_settled_index: int
    b2_holds: bool
    b3_distances: list = field(default_factory=list)
    b3_holds: bool = True

    def to_dict(self):
        return asdict(self)


def check_b2_b3(phi, sequence, limit, companion=None, tol=1e-8, dist_tol=1e-4):
    """Probe the limit conditions along a convergent sequence ``y_n -> limit``.

    B2: ``D(limit, y_n)`` should tend to 0. ``b2_settled_index`` is the first
    index after which every value is below ``tol`` (``-1`` if never).
    B3: for a bounded ``companion`` sequence with ``D(z_n, y_n) -> 0`` the
    manifold distance ``d(z_n, limit)`` should tend to 0 as well; it holds
    when the last distance is below ``dist_tol``.
    """
    m = phi.manifold
    limit = phi.check_zone(limit)
    values = [phi.distance(limit, y) for y in sequence]
    settled = -1
    for i in range(len(values)):
        if all(v < tol for v in values[i:]):
            settled = i
            break
    report = LimitReport(values, settled, settled >= 0 and values[-1] < tol)
    if companion is not None:
        dists = [m.dist(z, limit) for z in companion]
        report.b3_distances = dists
        report.b3_holds = dists[-1] < dist_tol
    return report
