"""Dense complex linear algebra and the box-constrained least-squares solver.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; nothing here
wraps them in a container type.
"""
from dataclasses import dataclass

import numpy as np

COND_LIMIT = 1e12
HERMITIAN_RTOL = 1e-8


class RankDeficiencyError(ValueError):
    """Raised when a matrix that must have full column rank does not."""


class NotPositiveDefiniteError(ValueError):
    pass


class SvdConvergenceError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        return (self.u * self.singular_values) @ self.v.conj().T


@dataclass(frozen=True)
class BoxLsProblem:
    """``min ||target - delta @ mapping||^2`` over real ``delta`` with ``|delta_n| <= bound``.

    ``target`` is a complex row of length ``S`` and ``mapping`` is ``M x S``,
    one row per unknown.
    """

    target: np.ndarray
    mapping: np.ndarray
    bound: float

    def __post_init__(self):
        if not self.bound > 0:
            raise ValueError(f"bound must be positive, got {self.bound}")
        if self.mapping.ndim != 2 or self.target.shape != (self.mapping.shape[1],):
            raise ValueError(
                f"inconsistent shapes: target {self.target.shape}, mapping {self.mapping.shape}"
            )

    def objective(self, delta):
        return float(np.sum(np.abs(self.target - delta @ self.mapping) ** 2))


def as_complex(a):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def standardize_columns(u, v=None):
    """Rotate each column of ``u`` so its first non-negligible entry is real positive.

    The same per-column phase is applied to ``v`` so that ``u @ diag(s) @ v^H``
    is unchanged.
    """
    u = np.array(u, dtype=np.complex128)
    mag = np.abs(u)
    thresh = 1e-12 * np.maximum(mag.max(axis=0, initial=0.0), np.finfo(float).tiny)
    first = np.argmax(mag > thresh, axis=0)
    pivot = u[first, np.arange(u.shape[1])]
    rot = np.ones(u.shape[1], dtype=np.complex128)
    nz = np.abs(pivot) > 0
    rot[nz] = np.abs(pivot[nz]) / pivot[nz]
    u *= rot
    if v is None:
        return u
    return u, np.asarray(v, dtype=np.complex128) * rot


def svd(a):
    """Thin SVD with deterministic column phases."""
    a = as_complex(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(str(exc)) from exc
    u, v = standardize_columns(u, vh.conj().T)
    return SvdResult(u, s, v)


def frobenius_norm(a):
    return float(np.linalg.norm(np.asarray(a), "fro"))


def ls_solve(a, b):
    """Least-squares solution of ``a @ x = b`` for full-column-rank ``a``.

    Solved through the thin QR of ``a`` rather than forming ``a^H a``.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape[0] < a.shape[1]:
        raise RankDeficiencyError(f"{a.shape[0]}x{a.shape[1]} matrix cannot have full column rank")
    q, r = np.linalg.qr(a)
    d = np.abs(np.diag(r))
    if d.min() == 0 or np.linalg.cond(r) > COND_LIMIT:
        raise RankDeficiencyError("matrix is numerically rank deficient")
    return np.linalg.solve(r, q.conj().T @ b)


def logdet2_hpd(a):
    """log2 determinant of a Hermitian positive definite matrix via Cholesky."""
    a = np.asarray(a, dtype=np.complex128)
    scale = np.linalg.norm(a, "fro")
    if np.linalg.norm(a - a.conj().T, "fro") > HERMITIAN_RTOL * scale:
        raise ValueError("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    return float(2.0 * np.sum(np.log2(np.diag(chol).real)))


def _objective(A, b, x, c):
    return np.einsum("pi,pij,pj->p", x, A, x) - 2.0 * np.einsum("pi,pi->p", b, x) + c


def _gradient(A, b, x):
    return np.einsum("pij,pj->pi", A, x) - b


def _subspace_minimizer(A, b, x, fixed, ridge):
    """Minimize over the free coordinates, holding the fixed ones at their values."""
    eye = np.eye(x.shape[1])
    An = np.where(~fixed[:, :, None] & ~fixed[:, None, :], A, 0.0)
    An = An + np.where(fixed, 1.0, ridge[:, None])[:, :, None] * eye
    rhs = np.where(fixed, x, b - np.einsum("pij,pj->pi", A, np.where(fixed, x, 0.0)))
    return np.linalg.solve(An, rhs[:, :, None])[:, :, 0]


def solve_box_ls_batch(mapping, target, bound, tol=1e-9, max_iter=10_000):
    """Solve independent box-constrained least-squares problems in one sweep.

    Parameters
    ----------
    mapping : complex array, shape (P, M, S)
        One ``M x S`` map per problem.
    target : complex array, shape (P, S)
    bound : float
        Common box half-width.

    Returns
    -------
    delta : real array, shape (P, M)

    Each problem is reduced to the real quadratic ``x A x - 2 b x`` through
    the ``[Re | Im]`` embedding and solved by a primal active-set method:
    step toward the minimizer over the free coordinates, pin the first bound
    that blocks the step, and release a pinned coordinate whose gradient
    points back into the box. Iterates stay feasible and the objective never
    increases. Stops once the KKT conditions hold to ``tol`` relative to
    ``max|b|``.
    """
    mapping = np.asarray(mapping, dtype=np.complex128)
    target = np.asarray(target, dtype=np.complex128)
    G = np.concatenate([mapping.real, mapping.imag], axis=2)
    q = np.concatenate([target.real, target.imag], axis=1)
    A = G @ G.transpose(0, 2, 1)
    b = np.einsum("pms,ps->pm", G, q)
    c = np.einsum("ps,ps->p", q, q)
    P, M = b.shape
    gtol = tol * np.maximum(1.0, np.abs(b).max(axis=1, initial=0.0))
    ridge = 1e-13 * np.maximum(np.trace(A, axis1=1, axis2=2), 1e-300)
    edge = bound * (1.0 - 1e-12)

    x = np.zeros((P, M))
    fixed = np.zeros((P, M), dtype=bool)
    active = np.ones(P, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ai, bi, xi, fi = A[idx], b[idx], x[idx], fixed[idx]
        d = _subspace_minimizer(Ai, bi, xi, fi, ridge[idx]) - xi
        d[fi] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(d > 0, (bound - xi) / d, np.where(d < 0, (-bound - xi) / d, np.inf))
        alpha = np.minimum(room.min(axis=1), 1.0)
        xi = np.clip(xi + alpha[:, None] * d, -bound, bound)
        blocked = alpha < 1.0
        hit = np.abs(xi) >= edge
        xi[hit] = np.sign(xi[hit]) * bound
        fi = fi | (blocked[:, None] & hit)

        g = _gradient(Ai, bi, xi)
        wrong = np.where(fi, np.where(xi > 0, g, -g), -np.inf)
        free_err = np.where(fi, 0.0, np.abs(g)).max(axis=1)
        worst = wrong.argmax(axis=1)
        rows = np.arange(idx.size)
        release = ~blocked & (wrong[rows, worst] > gtol[idx])
        fi[rows[release], worst[release]] = False
        done = ~blocked & ~release & (free_err <= gtol[idx])

        x[idx], fixed[idx] = xi, fi
        active[idx[done]] = False

    worse = _objective(A, b, x, c) > c
    x[worse] = 0.0
    return x


def solve_box_ls(problem):
    delta = solve_box_ls_batch(problem.mapping[None], problem.target[None], problem.bound)
    return delta[0]
