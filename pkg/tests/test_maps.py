import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from troplab.corpus import EXPECTED_PRODUCT, orthogonal_pair
from troplab.generators import generate
from troplab.maps import (
    LinearMap, adjoint_map, amplified_apply, apply, choi_element, compose, direct_sum,
    estimate_amplified_norm, estimate_norm_table, identity_map, is_completely_positive,
    is_positive, is_symmetric, make_transpose, transpose_map, zero_map,
)
from troplab.matrix_core import (
    Algebra, DimensionError, Element, SchemaError, adjoint, amplify_element, diag_amplify,
    grid_entries, random_unitary,
)

from conftest import ALGEBRAS

M2 = Algebra((2,))


def unitary_map(u, v):
    alg = Algebra((u.shape[0],))
    return LinearMap.from_function(alg, alg, lambda a: Element(alg, [u @ a.blocks[0] @ adjoint(v)]))


def test_apply_examples(rng):
    alg = Algebra((1, 2))
    x = alg.random_element(rng)
    assert apply(identity_map(alg), x).is_close(x)
    assert apply(zero_map(alg, M2), x).norm() == 0
    e12 = M2.basis_element(1)
    assert make_transpose(2)(e12).is_close(M2.basis_element(2))
    with pytest.raises(DimensionError):
        apply(identity_map(alg), M2.unit())


def test_amplified_apply_known_pair():
    x, y = orthogonal_pair()
    theta = make_transpose(2)
    tx = theta(x)
    expected = np.block([[b.T for b in row] for row in
                         [[x.blocks[0][:2, :2], x.blocks[0][:2, 2:]],
                          [x.blocks[0][2:, :2], x.blocks[0][2:, 2:]]]])
    assert np.allclose(tx.blocks[0], expected)
    assert np.allclose((tx.adjoint() @ theta(y)).blocks[0], EXPECTED_PRODUCT, atol=1e-12)


@pytest.mark.parametrize("algebra", ALGEBRAS, ids=str)
def test_amplification_commutes_with_grids(algebra, rng):
    t = generate("weighted_tro_hom", algebra, 2, 1, 4).map
    grid = [[algebra.random_element(rng) for _ in range(3)] for _ in range(3)]
    lhs = amplified_apply(t, amplify_element(grid))
    rhs = amplify_element([[t(g) for g in row] for row in grid])
    assert lhs.is_close(rhs, 0.0) or (lhs - rhs).norm() <= 1e-13 * rhs.norm()
    x = algebra.random_element(rng)
    assert t(diag_amplify(x, 3)).is_close(diag_amplify(t(x), 3))
    assert amplified_apply(t, x).is_close(apply(t, x))


def test_transpose_examples():
    assert np.array_equal(make_transpose(1).matrix, identity_map(Algebra((1,))).matrix)
    t = make_transpose(3)
    assert np.array_equal(compose(t, t).matrix, np.eye(9))
    a = Algebra((2, 3))
    lhs = direct_sum(make_transpose(2), make_transpose(3))
    assert np.array_equal(lhs.matrix, transpose_map(a).matrix)


def test_compose_and_adjoint_map(rng):
    alg = Algebra((1, 2))
    t = LinearMap(alg, alg, rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
    assert np.array_equal(compose(t, identity_map(alg)).matrix, t.matrix)
    assert np.allclose(adjoint_map(adjoint_map(t)).matrix, t.matrix)
    with pytest.raises(DimensionError):
        compose(t, identity_map(M2))


def test_symmetry_examples(rng):
    assert is_symmetric(make_transpose(3))
    u = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    left = LinearMap.from_function(M2, M2, lambda a: Element(M2, [u @ a.blocks[0]]))
    assert not is_symmetric(left)
    w = random_unitary(3, rng)
    assert is_symmetric(unitary_map(w, w))


def test_positivity_examples():
    assert is_positive(identity_map(Algebra((1, 2))))
    neg = -1 * identity_map(M2)
    res = is_positive(neg)
    assert not res and res.witness.is_close(M2.unit())
    assert is_positive(make_transpose(2))


def test_complete_positivity_examples(rng):
    assert is_completely_positive(identity_map(Algebra((2, 3))))
    res = is_completely_positive(make_transpose(2))
    assert not res and res.min_eigenvalue == pytest.approx(-1.0)
    v = np.linalg.qr(rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))[0]
    compress = LinearMap.from_function(Algebra((3,)), M2,
                                       lambda a: Element(M2, [adjoint(v) @ a.blocks[0] @ v]))
    assert is_completely_positive(compress)


def test_choi_element_is_scaled_projection():
    e = choi_element(identity_map(Algebra((1, 3))), 1)
    m = e.blocks[1]
    assert np.allclose(m @ m, 3 * m)
    assert e.blocks[0].shape == (3, 3) and not e.blocks[0].any()


def test_norm_estimate_examples():
    alg = Algebra((2, 1))
    for n in (1, 2, 3):
        assert estimate_amplified_norm(identity_map(alg), n).lower_bound == pytest.approx(1, abs=1e-9)
    assert estimate_amplified_norm(make_transpose(2), 2).lower_bound == pytest.approx(2, abs=1e-3)
    values = [e.lower_bound for e in estimate_norm_table(make_transpose(3), 4)]
    assert values == pytest.approx([1, 2, 3, 3], abs=1e-3)
    with pytest.raises(ValueError):
        estimate_amplified_norm(identity_map(alg), 0)


def test_norm_estimate_certificate(rng):
    t = LinearMap(M2, Algebra((1, 2)), rng.standard_normal((5, 4)))
    est = estimate_amplified_norm(t, 2, restarts=5, seed=3)
    assert est.witness.norm() <= 1 + 1e-12
    assert t(est.witness).norm() == pytest.approx(est.lower_bound, abs=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_norm_table_is_monotone(seed, rng):
    t = LinearMap(Algebra((1, 2)), M2, rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5)))
    values = [e.lower_bound for e in estimate_norm_table(t, 4, restarts=10, seed=seed)]
    assert all(b >= a - 1e-6 for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("seed", range(4))
def test_tro_homs_are_completely_contractive(seed):
    t = generate("tro_hom", Algebra((1, 2)), 2, 1, seed).map
    for n in (1, 2, 3):
        assert estimate_amplified_norm(t, n, restarts=10, seed=seed).lower_bound <= 1 + 1e-6


@pytest.mark.parametrize("m", [2, 3])
def test_transpose_witness_ratio(m):
    for n in range(1, 5):
        est = estimate_amplified_norm(make_transpose(m), n)
        ratio = make_transpose(m)(est.witness).norm() / est.witness.norm()
        assert ratio == pytest.approx(min(m, n), abs=1e-3)


@pytest.mark.parametrize("seed", range(3))
def test_cop_maps_reach_weight_norm(seed):
    gt = generate("weighted_tro_hom", Algebra((1, 2)), 2, 0, seed)
    hn = gt.h.norm()
    for n in (1, 2, 3):
        value = estimate_amplified_norm(gt.map, n, restarts=10, seed=seed).lower_bound
        assert hn - 1e-3 <= value <= hn + 1e-6


def test_linear_map_json_round_trip(rng):
    t = LinearMap(Algebra((1, 2)), M2, rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5)))
    back = LinearMap.from_json(json.loads(json.dumps(t.to_json())))
    assert np.array_equal(back.matrix, t.matrix) and back.domain == t.domain


def test_linear_map_json_errors():
    good = identity_map(M2).to_json()
    with pytest.raises(SchemaError, match="codomain"):
        LinearMap.from_json({k: v for k, v in good.items() if k != "codomain"})
    bad = dict(good, codomain={"blocks": [3]})
    with pytest.raises(SchemaError, match="map.matrix"):
        LinearMap.from_json(bad)


@given(st.integers(0, 2 ** 32))
def test_linearity_is_structural(seed):
    r = np.random.default_rng(seed)
    alg = Algebra((1, 2))
    t = LinearMap(alg, M2, r.standard_normal((4, 5)) + 1j * r.standard_normal((4, 5)))
    x, y = alg.random_element(r, 2), alg.random_element(r, 2)
    c = complex(r.standard_normal(), r.standard_normal())
    assert t(x * c + y).is_close(t(x) * c + t(y))
    entries = grid_entries(t(x))
    assert entries[0][1].is_close(t(grid_entries(x)[0][1]))
