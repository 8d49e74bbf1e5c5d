import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robinspec.errors import SingularGeometry, ZeroVector
from robinspec.fem2d import assemble, extrapolated_eigs, lowest_eigs, rayleigh
from robinspec.geometry import square
from robinspec.mesh import Grading, Mesh, refine, triangulate

# Robin-Robin interval (0, 1) at alpha = 10: the two negative roots solve
# k tanh(k/2) = 10 and k coth(k/2) = 10 (E = -k^2), the third q tan(q/2) = -10 (E = q^2).
# Values from a 30-digit root solve.
MU_RR_10 = np.array([-100.018145150397932697, -99.981825168932774415, 15.071598364718663936])


@pytest.fixture(scope="module")
def square_mesh():
    return triangulate(square(1.0).region(), 0.1)


@pytest.fixture(scope="module")
def square_forms(square_mesh):
    return assemble(square_mesh)


def test_reference_element_rows_sum_to_zero():
    m = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]),
             np.array([[0, 1], [1, 2], [2, 0]]), np.zeros(3, dtype=np.int64), np.zeros(3, dtype=np.int64),
             np.zeros((3, 2)))
    f = assemble(m)
    K = f.K.toarray()
    np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-15)
    np.testing.assert_allclose(K, [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]], atol=1e-15)
    np.testing.assert_allclose(f.M.toarray().sum(), 0.5, atol=1e-15)


def test_mass_and_boundary_partition_of_unity(square_forms):
    one = np.ones(square_forms.mesh.n_nodes)
    assert one @ (square_forms.M @ one) == pytest.approx(1.0, abs=1e-12)
    assert one @ (square_forms.B @ one) == pytest.approx(4.0, abs=1e-12)
    np.testing.assert_allclose(square_forms.K @ one, 0.0, atol=1e-11)


def test_singular_geometry():
    m = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.array([[0, 1, 2]]),
             np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
             np.zeros((0, 2)))
    with pytest.raises(SingularGeometry):
        assemble(m)


def test_dirichlet_square_upper_bound(square_mesh):
    m = square_mesh.with_bc({"star": "dirichlet"})
    a = lowest_eigs(assemble(m), 0.0, 3).values
    b = lowest_eigs(assemble(refine(m)), 0.0, 3).values
    exact = np.array([2, 5, 5]) * math.pi**2
    assert np.all(a >= b - 1e-9)
    assert np.all(b >= exact - 1e-9)
    assert a[0] == pytest.approx(2 * math.pi**2, rel=2e-2)


def test_neumann_square(square_mesh):
    m = square_mesh.with_bc({"star": "neumann"})
    sp = lowest_eigs(assemble(m), 0.0, 2)
    assert abs(sp.values[0]) < 1e-10
    assert sp.values[1] == pytest.approx(math.pi**2, rel=1e-2)


def test_robin_square_separable():
    m = triangulate(square(1.0).region(), 0.1, Grading.for_alpha(10.0, corner_radius=0.3))
    ex = extrapolated_eigs(m, 10.0, 4)
    mu = MU_RR_10
    oracle = np.sort([mu[0] + mu[0], mu[0] + mu[1], mu[1] + mu[0], mu[1] + mu[1]])
    np.testing.assert_allclose(ex.values, oracle, rtol=1e-3)


def test_rayleigh_identities(square_mesh, square_forms):
    one = np.ones(square_mesh.n_nodes)
    assert rayleigh(square_forms, 0.0, one) == pytest.approx(0.0, abs=1e-12)
    assert rayleigh(square_forms, 1.0, one) == pytest.approx(-4.0, abs=1e-12)
    with pytest.raises(ZeroVector):
        rayleigh(square_forms, 1.0, np.zeros(square_mesh.n_nodes))


def test_rayleigh_of_eigenvector(square_forms):
    sp = lowest_eigs(square_forms, 5.0, 3)
    for k in range(3):
        assert rayleigh(square_forms, 5.0, sp.vectors[:, k]) == pytest.approx(sp.values[k], rel=1e-8)
    assert np.all(sp.residuals <= 1e-8)


def test_dirichlet_above_neumann_on_part(square_mesh):
    # Dirichlet on one side (a sub-space of the Neumann form domain) raises every eigenvalue
    labels = [p.label for p in square_mesh.region.pieces]
    neu = square_mesh.with_bc({"star": "robin", labels[0]: "neumann"})
    dir_ = square_mesh.with_bc({"star": "robin", labels[0]: "dirichlet"})
    a = lowest_eigs(assemble(neu), 3.0, 4).values
    b = lowest_eigs(assemble(dir_), 3.0, 4).values
    assert np.all(b >= a - 1e-9)


def test_refinement_non_increasing(square_mesh):
    m1 = refine(square_mesh)
    a = lowest_eigs(assemble(square_mesh), 4.0, 5).values
    b = lowest_eigs(assemble(m1), 4.0, 5).values
    assert np.all(b <= a + 1e-9)


def test_lower_bound_sanity(square_forms):
    # trace inequality: lambda_1 >= -C alpha^2 with C fitted at alpha = 1
    c = -lowest_eigs(square_forms, 1.0, 1).values[0]
    for a in (2.0, 4.0, 8.0):
        assert lowest_eigs(square_forms, a, 1).values[0] >= -max(c, 2.5) * a * a


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0.0, 15.0), min_size=2, max_size=4, unique=True))
def test_monotone_in_alpha(alphas):
    forms = _coarse_forms()
    alphas = sorted(alphas)
    vals = [lowest_eigs(forms, a, 3, return_vectors=False).values for a in alphas]
    for lo, hi in zip(vals, vals[1:]):
        assert np.all(hi <= lo + 1e-8 * np.maximum(1.0, np.abs(lo)))


_COARSE = {}


def _coarse_forms():
    if "f" not in _COARSE:
        _COARSE["f"] = assemble(triangulate(square(1.0).region(), 0.15))
    return _COARSE["f"]


def test_seed_determinism(square_forms):
    a = lowest_eigs(square_forms, 6.0, 4, seed=3).values
    b = lowest_eigs(square_forms, 6.0, 4, seed=3).values
    assert np.array_equal(a, b)


def test_extrapolation_budget_shape(square_mesh):
    ex = extrapolated_eigs(square_mesh, 2.0, 3)
    assert ex.values.shape == ex.budget.shape == (3,)
    assert len(ex.levels) == 2 and ex.n_nodes[1] > ex.n_nodes[0]
    assert np.all(ex.budget >= 0)
