import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from troplab.matrix_core import (
    Algebra, DimensionError, Element, SchemaError, adjoint, amplify_element, diag_amplify,
    element_from_json, element_to_json, get_tolerances, grid_entries, is_negligible,
    matrix_from_json, matrix_to_json, operator_norm, random_unitary, svd, tolerances,
)

from conftest import ALGEBRAS


def test_adjoint_involution_and_scalar(rng):
    a = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    assert np.array_equal(adjoint(adjoint(a)), a)
    assert adjoint(np.array([[1j]]))[0, 0] == -1j


def test_svd_examples(rng):
    d = svd(np.diag([3.0, 1.0]))
    assert np.allclose(d.values, [3, 1])
    assert np.all(svd(np.zeros((3, 2))).values == 0)
    a = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    d = svd(a)
    assert np.linalg.norm(d.reconstruct() - a) <= 1e-12 * max(1, np.linalg.norm(a, 2))
    assert np.all(np.diff(d.values) <= 0) and np.all(d.values >= 0)


@given(st.integers(1, 32), st.integers(1, 32), st.integers(0, 2 ** 32))
def test_svd_reconstruction_property(m, n, seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((m, n)) + 1j * r.standard_normal((m, n))
    d = svd(a)
    assert np.linalg.norm(d.reconstruct() - a, 2) <= 1e-12 * max(1.0, np.linalg.norm(a, 2)) * 10


def test_svd_rejects_non_finite():
    with pytest.raises(ValueError):
        svd(np.array([[np.nan]]))


def test_random_unitary_is_unitary(rng):
    u = random_unitary(5, rng)
    assert np.allclose(adjoint(u) @ u, np.eye(5), atol=1e-12)


def test_algebra_bookkeeping():
    a = Algebra((1, 2, 3))
    assert a.dim == 14
    assert a.offsets == (0, 1, 5)
    assert a.labels()[1] == (1, 0, 0)
    assert str(a) == "M1⊕M2⊕M3"
    assert Algebra.abelian(3).is_abelian and not a.is_abelian
    with pytest.raises(ValueError):
        Algebra((0,))
    with pytest.raises(ValueError):
        Algebra(())


def test_element_shape_checks():
    a = Algebra((2,))
    with pytest.raises(DimensionError):
        Element(a, [np.eye(3)])
    with pytest.raises(DimensionError):
        Element(a, [np.eye(2), np.eye(2)])
    with pytest.raises(DimensionError):
        a.unit() + Algebra((3,)).unit()
    with pytest.raises(DimensionError):
        a.unit() @ a.unit(2)
    with pytest.raises(ValueError):
        Element(a, [np.array([[np.inf, 0], [0, 0]])])


def test_element_is_immutable():
    x = Algebra((2,)).unit()
    with pytest.raises(AttributeError):
        x.level = 3
    with pytest.raises(ValueError):
        x.blocks[0][0, 0] = 5


def test_operator_norm_examples(rng):
    alg = Algebra((1, 2))
    x = Element(alg, [np.array([[2.0]]), np.diag([5.0, 1.0])])
    assert operator_norm(x) == pytest.approx(5.0)
    u = Element(Algebra((4,)), [random_unitary(4, rng)])
    assert u.norm() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("algebra", ALGEBRAS, ids=str)
@pytest.mark.parametrize("level", [1, 2])
def test_element_algebra_identities(algebra, level, rng):
    x, y = algebra.random_element(rng, level), algebra.random_element(rng, level)
    one = algebra.unit(level)
    assert (one @ x).is_close(x) and (x @ one).is_close(x)
    assert (x @ y).adjoint().is_close(y.adjoint() @ x.adjoint())
    assert one.adjoint().is_close(one)
    assert x.norm() == pytest.approx(x.adjoint().norm(), rel=1e-12)
    assert (x - x).norm() == 0
    assert ((2 * x) / 2).is_close(x)
    assert (-x + x).norm() == 0


@pytest.mark.parametrize("algebra", ALGEBRAS, ids=str)
def test_coordinates_round_trip(algebra, rng):
    x = algebra.random_element(rng, 2)
    assert Element.from_coords(algebra, x.coords(), 2).is_close(x)
    e = algebra.basis()
    assert len(e) == algebra.dim
    assert np.array_equal(np.column_stack([b.coords() for b in e]), np.eye(algebra.dim))


def test_amplify_element_examples(rng):
    alg = Algebra((2,))
    x = alg.random_element(rng)
    assert amplify_element([[x]]).is_close(x)
    d = amplify_element([[x, alg.zeros()], [alg.zeros(), x]])
    assert d.norm() == pytest.approx(x.norm())
    assert d.is_close(diag_amplify(x, 2))
    e = alg.basis()
    grid = amplify_element([[e[0], e[1]], [e[2], e[3]]])
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[0, 3] = expected[3, 0] = expected[3, 3] = 1
    assert np.array_equal(grid.blocks[0].real, expected)
    with pytest.raises(DimensionError):
        amplify_element([[x, x], [x]])


def test_grid_entries_inverts_amplify(rng):
    alg = Algebra((1, 2))
    grid = [[alg.random_element(rng) for _ in range(3)] for _ in range(3)]
    back = grid_entries(amplify_element(grid))
    assert all(back[i][j].is_close(grid[i][j]) for i in range(3) for j in range(3))


def test_tolerance_context():
    base = get_tolerances()
    with tolerances(rel_tol=1e-3) as tol:
        assert tol.rel_tol == 1e-3
        assert is_negligible(1e-4, 1.0)
    assert get_tolerances() == base
    assert not is_negligible(1e-4, 1.0)
    with pytest.raises(ValueError):
        with tolerances(abs_tol=-1):
            pass


def test_json_round_trip(rng):
    x = Algebra((1, 3)).random_element(rng, 2)
    text = json.dumps(element_to_json(x))
    assert element_from_json(json.loads(text)).is_close(x, 0.0)
    m = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    assert np.array_equal(matrix_from_json(matrix_to_json(m)), m)


@pytest.mark.parametrize("bad, field", [
    ({"rows": 2, "cols": 2, "re": [1, 2, 3], "im": [0, 0, 0, 0]}, "re"),
    ({"rows": 1, "cols": 1, "re": [1], "im": [0, 0]}, "im"),
    ({"rows": 1, "cols": 1, "re": ["x"], "im": [0]}, "re"),
])
def test_matrix_json_errors_name_the_field(bad, field):
    with pytest.raises(SchemaError, match=field):
        matrix_from_json(bad)


def test_element_json_errors():
    with pytest.raises(SchemaError, match="algebra"):
        element_from_json({"n": 1, "blocks": []})
    with pytest.raises(SchemaError):
        element_from_json({"algebra": {"blocks": [2]}, "n": 1,
                           "blocks": [matrix_to_json(np.eye(3))]})


def test_imaginary_part_is_optional():
    m = matrix_from_json({"rows": 1, "cols": 2, "re": [1, 2]})
    assert np.array_equal(m, np.array([[1, 2]], dtype=complex))
