"""JSON schemas: bit-exact roundtrips of every serialized object."""

import json

import numpy as np

from cstar_rank import (
    Algebra,
    AlgebraElement,
    ModuleSpace,
    ModuleTuple,
    ReductionCoefficients,
    corner_space,
    density_experiment,
    element_from_json_dict,
    space_from_json_dict,
    tuple_from_json_list,
)
from cstar_rank._version import __version__


def roundtrip(obj):
    return json.loads(json.dumps(obj))


def test_algebra_roundtrip():
    alg = Algebra((1, 2, 3))
    data = roundtrip(alg.to_json_dict())
    assert data == {"blocks": [1, 2, 3]}
    assert Algebra.from_json_dict(data) == alg


def test_algebra_element_roundtrip_is_bit_exact():
    rng = np.random.default_rng(0)
    alg = Algebra((2, 3))
    for _ in range(20):
        a = alg.random_element(rng)
        data = roundtrip(a.to_json_dict())
        back = AlgebraElement.from_json_dict(alg, data)
        assert all(np.array_equal(x, y) for x, y in zip(a.blocks, back.blocks))


def test_element_json_shape():
    alg = Algebra((2,))
    a = alg.element([np.array([[1.0 + 2.0j, 0.0], [0.0, -1.0]])])
    data = a.to_json_dict()
    # Row-major nesting of [re, im] pairs, dimensions k x k.
    assert data["blocks"][0][0][0] == [1.0, 2.0]
    assert data["blocks"][0][1][1] == [-1.0, 0.0]


def test_module_space_roundtrip():
    space = ModuleSpace(Algebra((1, 2)), 2, 3)
    data = roundtrip(space.to_json_dict())
    assert data == {"algebra": {"blocks": [1, 2]}, "rows": 2, "cols": 3}
    assert space_from_json_dict(data) == space


def test_module_element_and_tuple_roundtrip():
    rng = np.random.default_rng(1)
    space = ModuleSpace(Algebra((1, 2)), 2, 3)
    x = space.random_element(rng)
    back = element_from_json_dict(roundtrip(x.to_json_dict()))
    assert back.space == space
    assert all(np.array_equal(a, b) for a, b in zip(x.blocks, back.blocks))

    t = ModuleTuple((x, space.random_element(rng)))
    t_back = tuple_from_json_list(roundtrip(t.to_json_list()))
    assert len(t_back) == 2
    for a, b in zip(t.entries, t_back.entries):
        assert all(np.array_equal(x1, x2) for x1, x2 in zip(a.blocks, b.blocks))


def test_corner_space_roundtrip_serializes_projections():
    alg = Algebra((1,))
    big = alg.matrix_algebra(3)
    p = big.element([np.diag([1.0, 1.0, 0.0])])
    q = big.element([np.diag([1.0, 0.0, 0.0])])
    corner = corner_space(alg, 3, p, q)
    data = roundtrip(corner.to_json_dict())
    assert set(data) == {"algebra", "size", "p", "q"}
    back = space_from_json_dict(data)
    assert back == corner


def test_corner_element_roundtrip():
    alg = Algebra((1,))
    big = alg.matrix_algebra(2)
    p = big.element([np.diag([1.0, 0.0])])
    corner = corner_space(alg, 2, p, p)
    x = corner.random_element(np.random.default_rng(2))
    back = element_from_json_dict(roundtrip(x.to_json_dict()))
    assert back.space == corner
    assert all(np.array_equal(a, b) for a, b in zip(x.blocks, back.blocks))


def test_reduction_coefficients_roundtrip():
    space = ModuleSpace(Algebra((1, 2)), 2, 2)
    rng = np.random.default_rng(3)
    left = space.left_algebra
    coeffs = ReductionCoefficients(
        space,
        [[left.random_element(rng) for _ in range(2)] for _ in range(3)],
    )
    data = roundtrip(coeffs.to_json_dict())
    assert data["shape"] == [3, 2]
    back = ReductionCoefficients.from_json_dict(data)
    assert back.shape == coeffs.shape
    for row_a, row_b in zip(coeffs.coeffs, back.coeffs):
        for a, b in zip(row_a, row_b):
            assert all(np.array_equal(x, y) for x, y in zip(a.blocks, b.blocks))


def test_density_report_embeds_provenance():
    space = ModuleSpace(Algebra((1,)), 1, 1)
    report = density_experiment(space, 1, 10, seed=5)
    data = roundtrip(report.to_json_dict())
    assert data["version"] == __version__
    assert data["seed"] == 5
    assert data["tolerance"] == 1e-9
    assert data["space"] == {"algebra": {"blocks": [1]}, "rows": 1, "cols": 1}
