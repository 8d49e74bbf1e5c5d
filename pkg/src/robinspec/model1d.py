"""One-dimensional model operators.

Eigenvalues of -u'' + V u on (0, l) with Dirichlet, Neumann or Robin end
conditions.  Robin(beta) at an end means that the outward derivative equals
beta * u there, so beta > 0 is attractive.

Two solvers are provided.  The transcendental one (V = 0 only) isolates each
eigenvalue with an exact Pruefer-angle count and then bisects the
characteristic function built from the exp/trig fundamental solutions.  The
finite-difference one handles potentials and reports a Richardson error
estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import GridTooCoarse, NonSelfAdjointInput, RootBracketFailure

__all__ = [
    "EndCondition",
    "IntervalOperator",
    "FDResult",
    "DirectSum",
    "interval_eigs",
    "finite_difference_eigs",
    "direct_sum_eigs",
    "schrodinger_eigs",
    "count_below",
    "characteristic",
    "robin_dirichlet",
    "robin_neumann",
]

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
ROBIN = "robin"


@dataclass(frozen=True)
class EndCondition:
    kind: str
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN, ROBIN):
            raise ValueError(f"unknown end condition {self.kind!r}")
        if not math.isfinite(self.beta):
            raise NonSelfAdjointInput("Robin parameter must be finite")

    @classmethod
    def dirichlet(cls) -> "EndCondition":
        return cls(DIRICHLET)

    @classmethod
    def neumann(cls) -> "EndCondition":
        return cls(NEUMANN)

    @classmethod
    def robin(cls, beta: float) -> "EndCondition":
        return cls(ROBIN, float(beta))

    @property
    def robin_beta(self) -> float:
        """Coefficient of the boundary term; 0 for Neumann, unused for Dirichlet."""
        return self.beta if self.kind == ROBIN else 0.0

    def coefficients(self, side: str) -> tuple[float, float]:
        """(a, b) such that the condition reads a*u + b*u' = 0 at that end."""
        if self.kind == DIRICHLET:
            return 1.0, 0.0
        beta = self.robin_beta
        # outward derivative is -u' on the left and +u' on the right
        return (beta, 1.0) if side == "left" else (-beta, 1.0)

    def short(self) -> str:
        return {DIRICHLET: "D", NEUMANN: "N"}.get(self.kind, f"R({self.beta:g})")


@dataclass(frozen=True)
class IntervalOperator:
    length: float
    left: EndCondition
    right: EndCondition
    potential: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError("interval length must be positive")


def robin_dirichlet(alpha: float, delta: float) -> IntervalOperator:
    """L_D: Robin(alpha) at 0 and Dirichlet at delta."""
    return IntervalOperator(delta, EndCondition.robin(alpha), EndCondition.dirichlet(), label="L_D")


def robin_neumann(alpha: float, delta: float, beta: float = 0.0) -> IntervalOperator:
    """L_N: Robin(alpha) at 0 and Neumann (or Robin(beta)) at delta."""
    right = EndCondition.neumann() if beta == 0.0 else EndCondition.robin(beta)
    return IntervalOperator(delta, EndCondition.robin(alpha), right, label="L_N")


# ---------------------------------------------------------------------------
# transcendental solver


def _angle_mod(a: float, lower_closed: bool) -> float:
    """Reduce an angle mod pi into [0, pi) or (0, pi]."""
    r = math.fmod(a, math.pi)
    if r < 0:
        r += math.pi
    if not lower_closed and r == 0.0:
        r = math.pi
    return r


def _end_state(lam: float, ell: float, aL: float, bL: float):
    """Pruefer data at x = ell for the solution satisfying the left condition.

    Returns (zeros, x, y, k): the number of zeros of u in (0, ell], the
    direction (x, y) ~ (u', u) at ell (for lam > 0 the modified pair
    (u'/k, u) is used and ``zeros`` counts completed half-turns), and the scale
    k of the modified angle (1 for lam <= 0).
    """
    if lam > 0.0:
        k = math.sqrt(lam)
        phi = _angle_mod(math.atan2(-bL * k, aL), True) + k * ell
        turns = math.floor(phi / math.pi)
        rest = phi - turns * math.pi
        return turns, math.cos(rest), math.sin(rest), k
    if lam == 0.0:
        u, up = -bL + aL * ell, aL
        zeros = 1 if aL != 0.0 and 0.0 < bL / aL <= ell else 0
        return zeros, up, u, 1.0
    kap = math.sqrt(-lam)
    # values divided by cosh(kap*ell); tau = 1 - tanh(kap*ell) without cancellation
    tau = 2.0 / (math.exp(min(2.0 * kap * ell, 1400.0)) + 1.0)
    p = aL - bL * kap
    u = (p - aL * tau) / kap
    up = p + bL * kap * tau
    zeros = 0
    if aL != 0.0:
        q = bL * kap / aL
        if 0.0 < q < 1.0 and math.atanh(q) / kap <= ell:
            zeros = 1
    return zeros, up, u, 1.0


def count_below(lam: float, op: IntervalOperator) -> int:
    """Number of eigenvalues strictly below ``lam`` (V = 0), by Sturm oscillation.

    The final Pruefer angle is compared with the right-end angle through a
    cross product, which stays accurate near (numerically) double roots.
    """
    aL, bL = op.left.coefficients("left")
    aR, bR = op.right.coefficients("right")
    zeros, x, y, k = _end_state(lam, op.length, aL, bL)
    # final angle = zeros*pi + psi with psi in [0, pi) the angle of (x, y)
    if y < 0.0 or (y == 0.0 and x < 0.0):
        x, y = -x, -y
    if y == 0.0 and lam <= 0.0:
        zeros = max(zeros, 1)  # u(ell) = 0 completes a half-turn
    # right-end angle in (0, pi]: (u'/k, u) orthogonal to (b_R k, a_R)
    xr, yr = aR, -bR * k
    if yr < 0.0 or (yr == 0.0 and xr > 0.0):
        xr, yr = -xr, -yr
    return max(0, zeros + (1 if xr * y - yr * x > 0.0 else 0))


def characteristic(lam: float, op: IntervalOperator) -> float:
    """Characteristic function; its zeros are the eigenvalues (V = 0).

    Built from u = -bL*y1 + aL*y2 where y1, y2 are the cos/sin (cosh/sinh)
    fundamental solutions; for lam < 0 it is divided by cosh(k*l) and written
    in product form to avoid cancellation at nearly double roots.
    """
    aL, bL = op.left.coefficients("left")
    aR, bR = op.right.coefficients("right")
    ell = op.length
    if lam > 0.0:
        k = math.sqrt(lam)
        c, s = math.cos(k * ell), math.sin(k * ell)
        u, up = -bL * c + aL * s / k, bL * k * s + aL * c
        return aR * u + bR * up
    if lam == 0.0:
        return aR * (-bL + aL * ell) + bR * aL
    k = math.sqrt(-lam)
    tau = 2.0 / (math.exp(min(2.0 * k * ell, 1400.0)) + 1.0)
    p = aL - bL * k
    q = aR + bR * k
    return (p * q - tau * (aL * aR - bL * bR * k * k)) / k


def _nth_eigenvalue(op: IntervalOperator, n: int, lo: float, hi: float, tol: float) -> float:
    """Isolate eigenvalue number n (1-based) in (lo, hi] and bisect it."""
    # shrink by counting until the bracket holds exactly this eigenvalue
    for _ in range(400):
        if count_below(hi, op) - count_below(lo, op) == 1 and count_below(lo, op) == n - 1:
            break
        mid = 0.5 * (lo + hi)
        if count_below(mid, op) >= n:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, abs(hi)):
            return 0.5 * (lo + hi)
    flo, fhi = characteristic(lo, op), characteristic(hi, op)
    use_sign = flo * fhi < 0.0
    for _ in range(400):
        if hi - lo <= max(tol, 4 * np.finfo(float).eps * abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if use_sign:
            fm = characteristic(mid, op)
            if fm == 0.0:
                return mid
            if (fm < 0.0) == (flo < 0.0):
                lo, flo = mid, fm
            else:
                hi = mid
        else:
            if count_below(mid, op) >= n:
                hi = mid
            else:
                lo = mid
    return 0.5 * (lo + hi)


def _transcendental(op: IntervalOperator, n: int, tol: float = 1e-12) -> np.ndarray:
    if op.potential is not None:
        raise ValueError("transcendental method requires V = 0")
    lo = -1.0
    for _ in range(200):
        if count_below(lo, op) == 0:
            break
        lo *= 4.0
    else:
        raise RootBracketFailure("could not bound the lowest eigenvalue from below")
    hi = max(1.0, ((n + 2) * math.pi / op.length) ** 2)
    for _ in range(200):
        if count_below(hi, op) >= n:
            break
        hi *= 4.0
    else:
        raise RootBracketFailure(f"fewer than {n} eigenvalues below {hi:g}")
    out = np.empty(n)
    left = lo
    for i in range(1, n + 1):
        out[i - 1] = _nth_eigenvalue(op, i, left, hi, tol)
        # the next eigenvalue is >= this one; a double root may coincide
        left = min(out[i - 1] - 10 * tol * max(1.0, abs(out[i - 1])), out[i - 1])
        left = max(left, lo)
    return out


# ---------------------------------------------------------------------------
# finite differences


@dataclass(frozen=True)
class FDResult:
    values: np.ndarray
    error: np.ndarray
    points: int


def _fd_solve(op: IntervalOperator, n: int, intervals: int) -> np.ndarray:
    ell = op.length
    h = ell / intervals
    x = np.linspace(0.0, ell, intervals + 1)
    v = np.zeros_like(x) if op.potential is None else np.asarray(op.potential(x), dtype=float) * np.ones_like(x)
    d = 2.0 / h**2 + v
    w = np.ones_like(x)
    for idx, cond in ((0, op.left), (-1, op.right)):
        if cond.kind != DIRICHLET:
            # ghost-point elimination, then halve the row to keep symmetry
            d[idx] = 1.0 / h**2 - cond.robin_beta / h + 0.5 * v[idx]
            w[idx] = 0.5
    e = np.full(intervals, -1.0 / h**2)
    keep = np.ones(intervals + 1, dtype=bool)
    if op.left.kind == DIRICHLET:
        keep[0] = False
    if op.right.kind == DIRICHLET:
        keep[-1] = False
    idx = np.flatnonzero(keep)
    d, w = d[idx], w[idx]
    e = e[idx[:-1]]
    sw = np.sqrt(w)
    d_s = d / w
    e_s = e / (sw[:-1] * sw[1:])
    m = min(n, len(d_s))
    return eigh_tridiagonal(d_s, e_s, eigvals_only=True, select="i", select_range=(0, m - 1))


def _default_intervals(op: IntervalOperator, n: int, points: int) -> int:
    scale = max(abs(op.left.robin_beta), abs(op.right.robin_beta), n * math.pi / op.length)
    if op.potential is not None:
        xs = np.linspace(0.0, op.length, 257)
        scale = max(scale, math.sqrt(float(np.max(np.abs(op.potential(xs)))) + 0.0))
    need = int(math.ceil(scale * op.length / 0.015))
    m = max(points - 1, need)
    return m + (m % 2)


def finite_difference_eigs(op: IntervalOperator, n: int, points: int = 2048, intervals: int | None = None) -> FDResult:
    """Second-order finite differences with one Richardson step.

    ``points`` is the minimum grid size; the grid is enlarged when the
    boundary-layer or oscillation scale demands it.
    """
    m = intervals if intervals is not None else _default_intervals(op, n, points)
    coarse = _fd_solve(op, n, m)
    fine = _fd_solve(op, n, 2 * m)
    k = min(len(coarse), len(fine))
    extrap = (4.0 * fine[:k] - coarse[:k]) / 3.0
    return FDResult(extrap, np.abs(extrap - fine[:k]), 2 * m + 1)


def interval_eigs(op: IntervalOperator, n: int, method: str = "auto") -> np.ndarray:
    """The n smallest eigenvalues, ascending."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if method == "auto":
        method = "transcendental" if op.potential is None else "finite-difference"
    if method == "transcendental":
        return _transcendental(op, n)
    if method == "finite-difference":
        return finite_difference_eigs(op, n).values
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# direct sums and Schroedinger operators


@dataclass(frozen=True)
class DirectSum:
    values: np.ndarray
    sources: np.ndarray  # index of the summand
    local_index: np.ndarray  # 1-based index within the summand
    labels: tuple[str, ...]


def _tie_order(vals, src, loc, rtol: float = 1e-10) -> list[int]:
    """Ascending order in which values equal up to rounding keep summand order."""
    order = sorted(range(len(vals)), key=lambda i: vals[i])
    out: list[int] = []
    group: list[int] = []
    for i in order:
        if group and vals[i] - vals[group[0]] > rtol * max(1.0, abs(vals[group[0]])):
            out += sorted(group, key=lambda g: (src[g], loc[g]))
            group = []
        group.append(i)
    out += sorted(group, key=lambda g: (src[g], loc[g]))
    return out


def direct_sum_eigs(ops: Sequence[IntervalOperator], n: int, method: str = "auto") -> DirectSum:
    """Merged spectrum of a direct sum; ties keep summand order."""
    vals, src, loc = [], [], []
    for j, op in enumerate(ops):
        ev = interval_eigs(op, n, method)
        vals.extend(ev)
        src.extend([j] * len(ev))
        loc.extend(range(1, len(ev) + 1))
    order = _tie_order(vals, src, loc)[:n]
    return DirectSum(
        np.array([vals[i] for i in order]),
        np.array([src[i] for i in order], dtype=int),
        np.array([loc[i] for i in order], dtype=int),
        tuple(op.label for op in ops),
    )


def schrodinger_eigs(
    length: float,
    alpha: float,
    curvature: Callable[[np.ndarray], np.ndarray] | float,
    ends: str = "D",
    n: int = 1,
    points: int = 2048,
    max_points: int = 2**20,
) -> np.ndarray:
    """Eigenvalues of -d^2/ds^2 - alpha*H(s) on (0, length) with D/D or N/N ends."""
    cond = {"D": EndCondition.dirichlet(), "N": EndCondition.neumann()}[ends.upper()[0]]
    if not callable(curvature):
        h0 = float(curvature)
        return interval_eigs(IntervalOperator(length, cond, cond), n) - alpha * h0
    xs = np.linspace(0.0, length, 1025)
    hs = np.asarray(curvature(xs), dtype=float) * np.ones_like(xs)
    if np.ptp(hs) == 0.0:
        return interval_eigs(IntervalOperator(length, cond, cond), n) - alpha * float(hs[0])
    tol = 1e-4 * (1.0 + alpha * float(np.ptp(hs)))
    op = IntervalOperator(length, cond, cond, potential=lambda s: -alpha * np.asarray(curvature(s), dtype=float))
    m = _default_intervals(op, n, points)
    if 2 * m + 1 > max_points:
        raise GridTooCoarse(f"the potential needs about {2 * m + 1} grid points, above max_points={max_points}",
                            suggested_points=2 * m + 1)
    while True:
        res = finite_difference_eigs(op, n, intervals=m)
        if float(np.max(res.error)) <= tol:
            return res.values
        if 4 * m > max_points:
            raise GridTooCoarse(
                f"finite-difference error {np.max(res.error):.3e} exceeds {tol:.3e}", suggested_points=4 * m + 1
            )
        m *= 2
