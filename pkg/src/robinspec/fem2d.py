"""P1 finite elements for the Robin form  u -> int |grad u|^2 - alpha int_Robin u^2.

Dirichlet-tagged nodes are eliminated; the generalized problem
(K - alpha B) u = lambda M u is solved by shift-invert Lanczos.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotConverged, ShiftTooClose, SingularGeometry, ZeroVector
from .mesh import DIRICHLET, ROBIN, Mesh, refine


@dataclass(frozen=True, eq=False)
class AssembledForms:
    K: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix
    dirichlet: np.ndarray
    free: np.ndarray
    mesh: Mesh
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_dofs(self) -> int:
        return len(self.free)

    def restricted(self):
        if "r" not in self._cache:
            f = self.free
            self._cache["r"] = (self.K[f][:, f].tocsc(), self.M[f][:, f].tocsc(), self.B[f][:, f].tocsc())
        return self._cache["r"]


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray
    vectors: np.ndarray | None  # (n_nodes, n), zero on Dirichlet nodes
    residuals: np.ndarray
    shift: float
    alpha: float
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)


def assemble(mesh: Mesh) -> AssembledForms:
    """Stiffness, mass and Robin boundary-mass matrices (exact P1 integration)."""
    p = mesh.nodes
    t = np.asarray(mesh.triangles)
    n = len(p)
    x, y = p[t, 0], p[t, 1]
    # gradient coefficients of the barycentric functions
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    if not np.all(area > 0.0):
        bad = int(np.argmin(area))
        raise SingularGeometry(f"triangle {bad} has non-positive area {area[bad]:.3e}")
    ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area)[:, None, None]
    me = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    me = area[:, None, None] * me[None]
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    e = mesh.edges[mesh.edge_tag == ROBIN]
    if len(e):
        L = np.hypot(*(p[e[:, 1]] - p[e[:, 0]]).T)
        be = L[:, None, None] * (np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0)[None]
        br = np.repeat(e, 2, axis=1).ravel()
        bc = np.tile(e, (1, 2)).ravel()
        B = sp.coo_matrix((be.ravel(), (br, bc)), shape=(n, n)).tocsr()
    else:
        B = sp.csr_matrix((n, n))
    dn = np.unique(mesh.edges[mesh.edge_tag == DIRICHLET].ravel())
    mask = np.ones(n, dtype=bool)
    mask[dn] = False
    return AssembledForms(K, M, B, dn.astype(np.int64), np.flatnonzero(mask), mesh)


def _robin_half_angle_min(mesh: Mesh) -> float:
    """Smallest half-angle between consecutive Robin pieces of the mesh region (pi/2 if none)."""
    reg = mesh.region
    if reg is None:
        return 0.5 * math.pi
    tags = np.full(len(reg.pieces), -1)
    for k in range(len(reg.pieces)):
        sel = mesh.edge_piece == k
        if np.any(sel):
            tags[k] = int(mesh.edge_tag[sel][0])
    out = 0.5 * math.pi
    for j, piece in enumerate(reg.pieces):
        prev = reg.pieces[j - 1]
        if tags[j] != ROBIN or tags[j - 1] != ROBIN:
            continue
        a = prev.func(np.array([1.0 - 1e-6, 1.0]))
        b = piece.func(np.array([0.0, 1e-6]))
        u, v = a[0] - a[1], b[1] - b[0]
        cosang = float(np.dot(u, v) / (np.hypot(*u) * np.hypot(*v)))
        out = min(out, 0.5 * math.acos(max(-1.0, min(1.0, cosang))))
    return out


def default_shift(alpha: float, theta_min: float = 0.5 * math.pi) -> float:
    """Below the corner bound -alpha^2 / sin^2(theta_min) with a 1.5 safety factor (and at most -1)."""
    return min(-1.5 * alpha**2 * max(1.0, 1.0 / math.sin(theta_min) ** 2), -1.0)


def lowest_eigs(
    forms: AssembledForms,
    alpha: float,
    n: int,
    shift_hint: float | None = None,
    tol: float = 1e-8,
    seed: int = 0,
    return_vectors: bool = True,
    max_iter: int = 500,
) -> Spectrum:
    """The n smallest eigenvalues of (K - alpha B) u = lambda M u on the Dirichlet-constrained space."""
    if n < 1:
        raise ValueError("n must be at least 1")
    K, M, B = forms.restricted()
    N = K.shape[0]
    if n >= N - 1:
        raise ValueError(f"n={n} too large for {N} unknowns")
    A = (K - alpha * B).tocsc() if alpha else K
    sigma = shift_hint if shift_hint is not None else default_shift(alpha, _robin_half_angle_min(forms.mesh))
    v0 = np.random.default_rng(seed).standard_normal(N)
    # Lanczos can drop one copy of an exactly degenerate pair at the edge of the wanted set; a guard band avoids it
    k = min(N - 2, n + max(3, n // 2))
    ncv = min(N, max(2 * k + 1, 20))
    last_exc: Exception | None = None
    for attempt in range(4):
        try:
            lu = spla.splu((A - sigma * M).tocsc())
        except RuntimeError as exc:  # exactly singular
            last_exc = exc
            sigma = sigma - 1e-3 * max(1.0, abs(sigma))
            continue
        opinv = spla.LinearOperator((N, N), matvec=lu.solve, dtype=float)
        try:
            vals, vecs = spla.eigsh(A, k=k, M=M, sigma=sigma, which="LM", OPinv=opinv, v0=v0,
                                    ncv=ncv, tol=tol * 1e-2, maxiter=max_iter * n)
        except spla.ArpackNoConvergence as exc:
            last_exc = exc
            ncv = min(N, 2 * ncv)
            continue
        if np.min(np.abs(vals - sigma)) < 1e-10 * max(1.0, abs(sigma)):
            last_exc = ShiftTooClose(f"shift {sigma:g} within 1e-10 of an eigenvalue")
            sigma = sigma - 1e-3 * max(1.0, abs(sigma))
            continue
        order = np.argsort(vals, kind="stable")[:n]
        vals, vecs = vals[order], vecs[:, order]
        res = _residuals(A, M, vals, vecs)
        if np.all(res <= tol) or attempt == 3:
            full = None
            if return_vectors:
                full = np.zeros((forms.mesh.n_nodes, n))
                full[forms.free] = vecs
            spec = Spectrum(vals, full, res, float(sigma), float(alpha),
                            {"ncv": ncv, "n_dofs": N, "attempts": attempt + 1,
                             "mesh_hash": forms.mesh.meta.get("key", "")})
            if not np.all(res <= tol):
                raise NotConverged(f"residuals {res.max():.2e} above {tol:g}", partial=spec)
            return spec
        ncv = min(N, 2 * ncv)
        last_exc = NotConverged("residual check failed")
    if isinstance(last_exc, ShiftTooClose):
        raise last_exc
    raise NotConverged(f"eigensolver failed after retries: {last_exc}")


def _residuals(A, M, vals, vecs) -> np.ndarray:
    """||A u - lambda M u||_{M^-1} / (max(1, |lambda|) ||u||_M)."""
    R = A @ vecs - (M @ vecs) * vals
    # lumped mass inverse is spectrally equivalent and avoids a second factorization
    lump = np.asarray(M.sum(axis=1)).ravel()
    rn = np.sqrt(np.sum(R * R / lump[:, None], axis=0))
    un = np.sqrt(np.sum(vecs * (M @ vecs), axis=0))
    return rn / (np.maximum(1.0, np.abs(vals)) * un)


def rayleigh(forms: AssembledForms, alpha: float, u: np.ndarray) -> float:
    """(u'Ku - alpha u'Bu) / u'Mu for a nodal vector u vanishing on Dirichlet nodes."""
    u = np.asarray(u, dtype=float)
    if u.shape != (forms.mesh.n_nodes,):
        raise ValueError("u must be a nodal vector")
    if len(forms.dirichlet) and np.max(np.abs(u[forms.dirichlet])) > 1e-12 * max(1.0, np.abs(u).max()):
        raise ValueError("u violates the Dirichlet constraint")
    m = float(u @ (forms.M @ u))
    if not m > 0:
        raise ZeroVector("Rayleigh quotient of the zero vector")
    return float(u @ (forms.K @ u) - alpha * (u @ (forms.B @ u))) / m


@dataclass(frozen=True, eq=False)
class Extrapolated:
    """Two-level Richardson values with an error budget from the level difference."""

    values: np.ndarray
    budget: np.ndarray
    levels: tuple[Spectrum, ...]
    n_nodes: tuple[int, ...]
    mesh_hashes: tuple[str, ...]


def solve_mesh(mesh: Mesh, alpha: float, n: int, **kw) -> Spectrum:
    return lowest_eigs(assemble(mesh), alpha, n, **kw)


def extrapolated_eigs(mesh: Mesh, alpha: float, n: int, refinements: int = 1, **kw) -> Extrapolated:
    """Solve on ``mesh`` and its successive red refinements; Richardson on the last two levels (O(h^2))."""
    if refinements < 1:
        raise ValueError("need at least one refinement for extrapolation")
    kw.setdefault("return_vectors", False)
    levels = []
    hashes = []
    m = mesh
    for k in range(refinements + 1):
        if k:
            m = refine(m)
        levels.append(lowest_eigs(assemble(m), alpha, n, **kw))
        hashes.append(m.content_hash()[:16])
    coarse, fine = levels[-2].values, levels[-1].values
    ext = (4.0 * fine - coarse) / 3.0
    budget = np.abs(fine - coarse) / 3.0
    nn = tuple(int(l.info["n_dofs"]) for l in levels)
    return Extrapolated(ext, budget, tuple(levels), nn, tuple(hashes))
