"""eigen module: closed form eigen decomposition of real symmetric 3x3 matrices

The eigenvalues come from the trigonometric solution of the characteristic
cubic, the eigenvector from cross products of the rows of (A - lambda I).
Everything is plain float arithmetic so that it can sit in the inner loop of a
simulation without array overhead.
"""

import math

import numpy as np

E_BETA1 = (0.0, 1.0, 0.0)


def _entries(matrix):
    return (
        float(matrix[0][0]),
        float(matrix[0][1]),
        float(matrix[0][2]),
        float(matrix[1][1]),
        float(matrix[1][2]),
        float(matrix[2][2]),
    )


def _cross(u, v):
    return (
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    )


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _normalized(u):
    n = math.sqrt(_dot(u, u))
    return (u[0] / n, u[1] / n, u[2] / n)


def _matvec(entries, v):
    a11, a12, a13, a22, a23, a33 = entries
    return (
        a11 * v[0] + a12 * v[1] + a13 * v[2],
        a12 * v[0] + a22 * v[1] + a23 * v[2],
        a13 * v[0] + a23 * v[1] + a33 * v[2],
    )


def symmetric_eigenvalues(matrix):
    """
    Eigenvalues of a symmetric 3x3 matrix, sorted in decreasing order.

    Only the upper triangle of `matrix` is read.
    """
    a11, a12, a13, a22, a23, a33 = _entries(matrix)
    p1 = a12 * a12 + a13 * a13 + a23 * a23
    if p1 == 0.0:
        return tuple(sorted((a11, a22, a33), reverse=True))
    q = (a11 + a22 + a33) / 3.0
    p2 = (a11 - q) ** 2 + (a22 - q) ** 2 + (a33 - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    b11, b22, b33 = (a11 - q) / p, (a22 - q) / p, (a33 - q) / p
    b12, b13, b23 = a12 / p, a13 / p, a23 / p
    det_b = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13) + b13 * (b12 * b23 - b22 * b13)
    r = det_b / 2.0
    # rounding can push r slightly outside [-1, 1]
    if r <= -1.0:
        phi = math.pi / 3.0
    elif r >= 1.0:
        phi = 0.0
    else:
        phi = math.acos(r) / 3.0
    e1 = q + 2.0 * p * math.cos(phi)
    e3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return e1, e2, e3


def _kernel_vector(entries, lam):
    """best conditioned null vector of (A - lam I), None when the rank is below 2"""
    a11, a12, a13, a22, a23, a33 = entries
    r0 = (a11 - lam, a12, a13)
    r1 = (a12, a22 - lam, a23)
    r2 = (a13, a23, a33 - lam)
    best = None
    best_norm = 0.0
    for u, v in ((r0, r1), (r0, r2), (r1, r2)):
        c = _cross(u, v)
        n = _dot(c, c)
        if n > best_norm:
            best, best_norm = c, n
    if best is None:
        return None
    return _normalized(best)


def _orient(v):
    """deterministic sign: beta1 component positive, else first non zero component"""
    for component in (v[1], v[0], v[2]):
        if component != 0.0:
            if component < 0.0:
                return (-v[0], -v[1], -v[2])
            return v
    return v


def _degenerate_top_vector(entries, e2, e3, tol):
    """unit vector of the top eigenspace with the largest beta1 component"""
    spread = max(abs(e2), abs(e3), 1.0)
    if e2 - e3 <= tol * spread:
        # the matrix is a multiple of the identity
        return E_BETA1
    w = _kernel_vector(entries, e3)
    if w is None:
        return E_BETA1
    u = (-w[1] * w[0], 1.0 - w[1] * w[1], -w[1] * w[2])
    if _dot(u, u) <= tol * tol:
        u = _cross(w, (1.0, 0.0, 0.0))
    return _normalized(u)


def top_eigenpair(matrix, degeneracy_tol=1e-12):
    """
    Largest eigenvalue of a symmetric 3x3 matrix and a unit eigenvector.

    Return:
        - value, eigenvector (numpy array of shape (3,)) and a degeneracy flag.

    The value is the Rayleigh quotient of the returned eigenvector. When the
    gap to the second eigenvalue is below `degeneracy_tol` times the top
    eigenvalue the eigenvector is the member of the top eigenspace most aligned
    with (0, 1, 0).
    """
    entries = _entries(matrix)
    e1, e2, e3 = symmetric_eigenvalues(matrix)
    degenerate = (e1 - e2) < degeneracy_tol * max(abs(e1), 1e-300)
    if degenerate:
        v = _degenerate_top_vector(entries, e2, e3, degeneracy_tol)
    else:
        v = _kernel_vector(entries, e1)
        if v is None:
            v = E_BETA1
    v = _orient(v)
    value = _dot(v, _matvec(entries, v))
    return value, np.array(v, dtype=np.float64), degenerate
