"""Hadamard manifolds: the weighted positive orthant and SPD matrices.

Points and tangent vectors are plain numpy arrays. Every operation takes its
base point explicitly, so a tangent vector is only meaningful together with
the point it was produced at.

Two concrete manifolds are provided:

* :class:`PositiveOrthant` -- ``R^n_{++}`` with metric ``G(x) = diag(x_i^{-2})``.
  The map ``u = ln x`` is a global isometry onto Euclidean ``R^n``, which gives
  closed forms for every operation (zero sectional curvature).
* :class:`SPDManifold` -- symmetric positive definite ``n x n`` matrices with
  the affine-invariant metric ``<u, v>_x = tr(x^{-1} u x^{-1} v)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError

SYM_TOL = 1e-12
EIG_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# symmetric matrix kernels

def symmetrize(m):
    return 0.5 * (m + m.T)


def _is_symmetric(m, tol=SYM_TOL):
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    return np.all(np.abs(m - m.T) <= tol * scale)


def sym_eig(m):
    """Eigendecomposition ``m = Q diag(w) Q^T`` of a symmetric matrix.

    Parameters
    ----------
    m : ndarray, shape (n, n)
        Symmetric matrix (component-wise symmetric to 1e-12, scale relative).

    Returns
    -------
    w : ndarray, shape (n,)
        Eigenvalues in ascending order.
    q : ndarray, shape (n, n)
        Orthonormal eigenvectors as columns.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {m.shape}")
    if not _is_symmetric(m):
        raise ContractError("matrix is not symmetric")
    return np.linalg.eigh(symmetrize(m))


def sym_fn(m, f, positive=False):
    """Apply a scalar function spectrally: ``Q f(w) Q^T``.

    With ``positive=True`` the input must be positive definite (eigenvalues
    above 1e-14); use this for log, square root and negative powers.
    """
    w, q = sym_eig(m)
    if positive and w[0] <= EIG_FLOOR:
        raise DomainError(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
    return symmetrize((q * f(w)) @ q.T)


def expm_sym(m):
    return sym_fn(m, np.exp)


def logm_spd(m):
    return sym_fn(m, np.log, positive=True)


def sqrtm_spd(m):
    return sym_fn(m, np.sqrt, positive=True)


def powm_spd(m, p):
    return sym_fn(m, lambda w: w ** p, positive=True)


# ---------------------------------------------------------------------------
# geometry contract

@dataclass(frozen=True)
class Geodesic:
    """The unique geodesic ``t -> gamma(x, y; t)``, ``t`` in [0, 1]."""

    manifold: "Manifold"
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_velocity", self.manifold.log(self.start, self.end))

    def __call__(self, t):
        if t == 0:
            return self.start.copy()
        if t == 1:
            return self.end.copy()
        return self.manifold.exp(self.start, t * self._velocity)

    @property
    def length(self):
        return self.manifold.norm(self.start, self._velocity)


class Manifold:
    """Operations every Hadamard manifold in this package implements."""

    name = "manifold"
    dim = 0

    def check_point(self, x):
        raise NotImplementedError

    def check_tangent(self, x, v):
        raise NotImplementedError

    def inner(self, x, u, v):
        raise NotImplementedError

    def norm(self, x, v):
        return float(np.sqrt(max(self.inner(x, v, v), 0.0)))

    def dist(self, x, y):
        raise NotImplementedError

    def exp(self, x, v):
        raise NotImplementedError

    def log(self, x, y):
        raise NotImplementedError

    def transport(self, x, y, v):
        """Parallel transport of ``v`` in ``T_x`` to ``T_y`` along the geodesic."""
        raise NotImplementedError

    def geodesic(self, x, y):
        return Geodesic(self, self.check_point(x), self.check_point(y))

    def tangent_basis(self, x):
        """Orthonormal basis of ``T_x`` (list of ``dim`` tangent vectors)."""
        raise NotImplementedError

    def zero_vector(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def origin(self):
        raise NotImplementedError

    def random_point(self, rng, scale=1.0, around=None):
        """Point at geodesic distance ~ ``scale`` from ``around`` (default: origin)."""
        base = self.origin() if around is None else self.check_point(around)
        return self.exp(base, self.random_tangent(base, rng, scale))

    def random_tangent(self, x, rng, scale=1.0):
        coef = rng.standard_normal(self.dim)
        basis = self.tangent_basis(x)
        return scale * sum(c * e for c, e in zip(coef, basis))

    def random_unit_tangent(self, x, rng):
        v = self.random_tangent(x, rng)
        return v / self.norm(x, v)

    def to_json(self, x):
        return np.asarray(x, dtype=float).tolist()

    def from_json(self, obj):
        return self.check_point(np.asarray(obj, dtype=float))


class PositiveOrthant(Manifold):
    """``R^n_{++}`` with metric ``<u, v>_x = sum u_i v_i / x_i^2``.

    In log coordinates ``u = ln x`` the metric is Euclidean, so

    * ``exp(x, v)_i = x_i exp(v_i / x_i)``
    * ``log(x, y)_i = x_i ln(y_i / x_i)``
    * ``transport(x, y, v)_i = (y_i / x_i) v_i``
    """

    name = "orthant"

    def __init__(self, n):
        self.n = int(n)
        self.dim = self.n

    def __repr__(self):
        return f"PositiveOrthant({self.n})"

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DomainError(f"expected shape ({self.n},), got {x.shape}")
        if not np.all(x > 0) or not np.all(np.isfinite(x)):
            raise DomainError(f"point has non-positive or non-finite coordinates: {x}")
        return x

    def check_tangent(self, x, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ContractError(f"tangent vector shape {v.shape} does not match base point")
        return v

    def inner(self, x, u, v):
        x = self.check_point(x)
        u = self.check_tangent(x, u)
        v = self.check_tangent(x, v)
        return float(np.sum(u * v / x ** 2))

    def dist(self, x, y):
        x = self.check_point(x)
        y = self.check_point(y)
        return float(np.linalg.norm(np.log(x / y)))

    def exp(self, x, v):
        x = self.check_point(x)
        v = self.check_tangent(x, v)
        return x * np.exp(v / x)

    def log(self, x, y):
        x = self.check_point(x)
        y = self.check_point(y)
        return x * np.log(y / x)

    def transport(self, x, y, v):
        x = self.check_point(x)
        y = self.check_point(y)
        v = self.check_tangent(x, v)
        return (y / x) * v

    def tangent_basis(self, x):
        x = self.check_point(x)
        return [x[i] * np.eye(self.n)[i] for i in range(self.n)]

    def origin(self):
        return np.ones(self.n)

    def random_tangent(self, x, rng, scale=1.0):
        x = self.check_point(x)
        return scale * x * rng.standard_normal(self.n)

    # log chart
    def to_chart(self, x):
        return np.log(self.check_point(x))

    def from_chart(self, u):
        return np.exp(np.asarray(u, dtype=float))

    def tangent_to_chart(self, x, v):
        return np.asarray(v, dtype=float) / x

    def tangent_from_chart(self, x, w):
        return np.asarray(w, dtype=float) * x


class SPDManifold(Manifold):
    """Symmetric positive definite matrices with the affine-invariant metric."""

    name = "spd"

    def __init__(self, n):
        self.n = int(n)
        self.dim = self.n * (self.n + 1) // 2
        basis = []
        for i in range(self.n):
            for j in range(i, self.n):
                e = np.zeros((self.n, self.n))
                if i == j:
                    e[i, i] = 1.0
                else:
                    e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
                basis.append(e)
        self._sym_basis = basis

    def __repr__(self):
        return f"SPDManifold({self.n})"

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n, self.n):
            raise DomainError(f"expected shape ({self.n}, {self.n}), got {x.shape}")
        if not np.all(np.isfinite(x)) or not _is_symmetric(x):
            raise DomainError("matrix is not symmetric")
        return symmetrize(x)

    def check_tangent(self, x, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n, self.n):
            raise ContractError(f"tangent vector shape {v.shape} does not match base point")
        if not _is_symmetric(v):
            raise ContractError("tangent vector is not symmetric")
        return symmetrize(v)

    def _roots(self, x):
        """Return ``(x^{1/2}, x^{-1/2})`` sharing one eigendecomposition."""
        x = self.check_point(x)
        w, q = np.linalg.eigh(x)
        if w[0] <= EIG_FLOOR:
            raise DomainError(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
        s = np.sqrt(w)
        return symmetrize((q * s) @ q.T), symmetrize((q / s) @ q.T)

    def inner(self, x, u, v):
        x = self.check_point(x)
        u = self.check_tangent(x, u)
        v = self.check_tangent(x, v)
        xu = np.linalg.solve(x, u)
        xv = np.linalg.solve(x, v)
        return float(np.sum(xu * xv.T))

    def dist(self, x, y):
        _, si = self._roots(x)
        y = self.check_point(y)
        w = np.linalg.eigvalsh(symmetrize(si @ y @ si))
        if w[0] <= EIG_FLOOR:
            raise DomainError("second argument is not positive definite")
        return float(np.sqrt(np.sum(np.log(w) ** 2)))

    def exp(self, x, v):
        s, si = self._roots(x)
        v = self.check_tangent(x, v)
        return symmetrize(s @ expm_sym(symmetrize(si @ v @ si)) @ s)

    def log(self, x, y):
        s, si = self._roots(x)
        y = self.check_point(y)
        return symmetrize(s @ logm_spd(symmetrize(si @ y @ si)) @ s)

    def transport(self, x, y, v):
        # E v E^T with E = (y x^{-1})^{1/2} = x^{1/2} (x^{-1/2} y x^{-1/2})^{1/2} x^{-1/2}
        s, si = self._roots(x)
        y = self.check_point(y)
        v = self.check_tangent(x, v)
        e = s @ sqrtm_spd(symmetrize(si @ y @ si)) @ si
        return symmetrize(e @ v @ e.T)

    def geodesic_point(self, x, y, t):
        s, si = self._roots(x)
        y = self.check_point(y)
        return symmetrize(s @ sym_fn(symmetrize(si @ y @ si), lambda w: w ** t, positive=True) @ s)

    def tangent_basis(self, x):
        s, _ = self._roots(x)
        return [symmetrize(s @ e @ s) for e in self._sym_basis]

    def origin(self):
        return np.eye(self.n)


mat_fn = sym_fn
