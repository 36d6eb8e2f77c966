"""Reduction coefficients, Warfield and Bass reductions, padding and density."""

import math

import numpy as np
import pytest

from cstar_rank import (
    Algebra,
    DomainError,
    ModuleNotFullError,
    ModuleSpace,
    ModuleTuple,
    PerturbationParams,
    ReductionCoefficients,
    ReductionFailedError,
    ShapeMismatchError,
    adjointable_norm,
    bass_reduce,
    corner_space,
    density_experiment,
    dual_witness,
    gen_oracle,
    gram,
    hv_pad,
    hv_perturb,
    inner_right,
    is_unimodular,
    normalize_tuple,
    sr_formula,
    warfield_b_to_a,
    warfield_forward,
)


def scalar_space():
    return ModuleSpace(Algebra((1,)), 1, 1)


def scalar(space, value):
    return space.element([np.array([[value]], dtype=complex)])


def random_tuple(space, rng, k):
    return ModuleTuple(tuple(space.random_element(rng) for _ in range(k)))


def random_unimodular(space, rng, k):
    for _ in range(100):
        t = random_tuple(space, rng, k)
        if is_unimodular(t):
            return t
    raise AssertionError("sampling failed")


# -- the ceiling formula ---------------------------------------------------------


def test_sr_formula_values():
    assert sr_formula(1, 1, 1) == 1
    assert sr_formula(2, 3, 5) == 2  # ceil(6 / 3)


def test_sr_formula_matches_square_case():
    # ceil((s + n - 1) / n) == ceil((s - 1) / n) + 1 for all small s, n.
    for s in range(1, 21):
        for n in range(1, 21):
            assert sr_formula(s, n, n) == math.ceil((s - 1) / n) + 1


def test_sr_formula_validates():
    with pytest.raises(ValueError):
        sr_formula(0, 1, 1)
    with pytest.raises(ValueError):
        sr_formula(1, 0, 1)


def test_predicted_rank_matches_formula():
    for rows in range(1, 5):
        for cols in range(1, 5):
            space = ModuleSpace(Algebra((1, 2)), rows, cols)
            assert space.predicted_stable_rank() == sr_formula(1, rows, cols)


# -- reduction coefficients -------------------------------------------------------


def test_adjointable_norm_trivial():
    space = ModuleSpace(Algebra((1, 2)), 2, 2)
    left = space.left_algebra
    zero = ReductionCoefficients(space, [[left.zero()], [left.zero()]])
    assert adjointable_norm(zero) == 0.0
    ident = ReductionCoefficients(
        space,
        [[left.unit(), left.zero()], [left.zero(), left.unit()]],
    )
    assert abs(adjointable_norm(ident) - 1.0) < 1e-12


def test_adjointable_norm_bounds_action():
    rng = np.random.default_rng(0)
    space = ModuleSpace(Algebra((2, 1)), 2, 2)
    left = space.left_algebra
    for _ in range(100):
        coeffs = ReductionCoefficients(
            space,
            [
                [left.random_element(rng) for _ in range(2)]
                for _ in range(3)
            ],
        )
        bound = adjointable_norm(coeffs)
        for _ in range(5):
            entries = [space.random_element(rng) for _ in range(2)]
            out = ModuleTuple(tuple(coeffs.apply(entries)))
            in_norm = ModuleTuple(tuple(entries)).norm()
            assert out.norm() <= bound * in_norm + 1e-9


def test_coefficients_validate_parent_algebra():
    space = ModuleSpace(Algebra((2,)), 2, 2)
    wrong = Algebra((2,)).unit()  # not the left algebra M_2(M_2)
    with pytest.raises(ShapeMismatchError):
        ReductionCoefficients(space, [[wrong]])


# -- forward reduction --------------------------------------------------------------


def test_warfield_forward_zero_coefficients():
    rng = np.random.default_rng(1)
    space = ModuleSpace(Algebra((1, 2)), 2, 2)
    t = random_tuple(space, rng, 3)
    zero = ReductionCoefficients(
        space, [[space.left_algebra.zero()], [space.left_algebra.zero()]]
    )
    out = warfield_forward(t, zero)
    assert all((a - b).norm() == 0.0 for a, b in zip(out, t.entries[:2]))


def test_warfield_forward_zero_last_entry():
    rng = np.random.default_rng(2)
    space = ModuleSpace(Algebra((2,)), 1, 1)
    head = [space.random_element(rng) for _ in range(2)]
    t = ModuleTuple((*head, space.zero()))
    coeffs = ReductionCoefficients(
        space,
        [[space.left_algebra.random_element(rng)] for _ in range(2)],
    )
    out = warfield_forward(t, coeffs)
    assert all((a - b).norm() == 0.0 for a, b in zip(out, head))


def test_warfield_forward_shape_mismatch():
    space = scalar_space()
    t = ModuleTuple((space.zero(), space.zero(), space.zero()))
    coeffs = ReductionCoefficients(space, [[space.left_algebra.unit()]])
    with pytest.raises(ShapeMismatchError):
        warfield_forward(t, coeffs)


# -- witness to coefficients ----------------------------------------------------------


def test_warfield_b_to_a_trivial_instance():
    space = scalar_space()
    one, zero = scalar(space, 1.0), scalar(space, 0.0)
    t = ModuleTuple((one, zero))
    y = ModuleTuple((one, zero))
    z = ModuleTuple((one,))
    coeffs = warfield_b_to_a(t, y, z)
    assert coeffs.coeffs[0][0].norm() == 0.0
    reduced = warfield_forward(t, coeffs)
    assert is_unimodular(reduced)


def test_warfield_b_to_a_requires_unimodular_head():
    space = scalar_space()
    one, zero = scalar(space, 1.0), scalar(space, 0.0)
    t = ModuleTuple((zero, one))
    y = ModuleTuple((zero, one))  # pairing is 1 but the head is zero
    z = ModuleTuple((one,))
    with pytest.raises(DomainError):
        warfield_b_to_a(t, y, z)


def test_warfield_b_to_a_checks_pairing_residual():
    space = scalar_space()
    one = scalar(space, 1.0)
    t = ModuleTuple((one, one))
    y = ModuleTuple((one, one))  # pairing sums to 2, not 1
    z = ModuleTuple((one,))
    with pytest.raises(DomainError):
        warfield_b_to_a(t, y, z)


def test_warfield_b_to_a_random_instances():
    rng = np.random.default_rng(3)
    space = ModuleSpace(Algebra((1, 2)), 2, 2)
    for _ in range(30):
        head = random_unimodular(space, rng, 1)
        y = ModuleTuple(head.entries + (space.random_element(rng),))
        b_inv = space.right_inverse(gram(y), 1e-9)
        t = ModuleTuple(tuple(yk * b_inv for yk in y.entries))
        z = dual_witness(head)
        coeffs = warfield_b_to_a(t, y, z)
        reduced = warfield_forward(t, coeffs)
        assert is_unimodular(reduced)
        telescoped = coeffs.coeffs[0][0].adjoint() * y[0]
        assert (telescoped - y[1]).norm() <= 1e-7


# -- randomized Bass reduction ----------------------------------------------------------


def test_bass_reduce_scalar_pair():
    space = scalar_space()
    t = ModuleTuple((scalar(space, 1.0), scalar(space, 1.0)))
    coeffs = bass_reduce(t, PerturbationParams(eps=0.1, seed=0))
    reduced = warfield_forward(t, coeffs)
    assert is_unimodular(reduced)


def test_bass_reduce_fails_below_stable_rank():
    space = ModuleSpace(Algebra((1,)), 1, 2)
    rng = np.random.default_rng(4)
    t = random_unimodular(space, rng, 2)
    with pytest.raises(ReductionFailedError) as err:
        bass_reduce(t, PerturbationParams(eps=0.1, seed=1, max_retries=12))
    assert len(err.value.eta_schedule) == 12
    assert err.value.eta_schedule[0] == pytest.approx(1e-3)
    assert err.value.eta_schedule[-1] == pytest.approx(1e-3 * 2 ** 11)


def test_bass_reduce_sound_on_both_routes():
    rng = np.random.default_rng(5)
    cases = [
        ((1,), 1, 1, 1),
        ((2,), 1, 1, 2),
        ((1, 2), 2, 2, 1),
        ((1,), 1, 2, 2),
        ((2,), 2, 3, 2),
    ]
    for base, rows, cols, n in cases:
        space = ModuleSpace(Algebra(base), rows, cols)
        for i in range(10):
            t = random_unimodular(space, rng, n + 1)
            coeffs = bass_reduce(t, PerturbationParams(eps=0.1, seed=i))
            reduced = warfield_forward(t, coeffs)
            assert is_unimodular(reduced)
            assert gen_oracle(reduced)


def test_bass_reduce_requires_unimodular_input():
    space = ModuleSpace(Algebra((1,)), 1, 3)
    rng = np.random.default_rng(6)
    t = random_tuple(space, rng, 2)  # 2 < 3 columns, never unimodular
    with pytest.raises(DomainError):
        bass_reduce(t, PerturbationParams(eps=0.1, seed=0))


# -- padding ---------------------------------------------------------------------------


def test_hv_pad_zero_tuple():
    space = ModuleSpace(Algebra((1, 2)), 1, 1)
    u = normalize_tuple(
        ModuleTuple(tuple(space.standard_unimodular_tuple()))
    )
    t = ModuleTuple((space.zero(),))
    padded = hv_pad(t, u, 1.0)
    assert is_unimodular(padded)
    # With b0 = 0 the bump is the unit, so the padding is u itself.
    for uk, yk in zip(u.entries, padded.entries[1:]):
        assert (uk - yk).norm() < 1e-12


def test_hv_pad_vanishes_on_large_tuples():
    space = scalar_space()
    t = ModuleTuple((scalar(space, 3.0),))  # b0 = 9 >= eps = 1
    u = ModuleTuple((scalar(space, 1.0),))
    padded = hv_pad(t, u, 1.0)
    assert is_unimodular(padded)
    assert padded[1].norm() == 0.0


def test_hv_pad_rejects_unnormalized_padding():
    space = scalar_space()
    t = ModuleTuple((scalar(space, 0.0),))
    u = ModuleTuple((scalar(space, 2.0),))
    with pytest.raises(DomainError):
        hv_pad(t, u, 1.0)


def test_hv_pad_sweep():
    rng = np.random.default_rng(7)
    for base, rows, cols, n in [((1,), 1, 1, 1), ((2,), 1, 2, 2), ((1, 2), 2, 2, 1)]:
        space = ModuleSpace(Algebra(base), rows, cols)
        r = space.predicted_stable_rank()
        for eps in (0.1, 1.0, 10.0):
            for _ in range(20):
                t = random_tuple(space, rng, n)
                u = normalize_tuple(random_unimodular(space, rng, r))
                assert is_unimodular(hv_pad(t, u, eps))


# -- the perturbation pipeline -------------------------------------------------------------


def test_hv_perturb_zero_scalar():
    space = scalar_space()
    t = ModuleTuple((space.zero(),))
    moved = hv_perturb(t, PerturbationParams(eps=0.01, seed=1))
    assert is_unimodular(moved)
    assert moved.norm() < math.sqrt(0.01) + 0.01


def test_hv_perturb_postconditions_random():
    rng = np.random.default_rng(8)
    cases = [((1,), 1, 1, 1), ((2,), 1, 2, 2), ((1, 2), 2, 2, 1), ((2, 3), 2, 3, 2)]
    for base, rows, cols, n in cases:
        space = ModuleSpace(Algebra(base), rows, cols)
        for eps in (0.01, 0.1, 1.0):
            bound = math.sqrt(eps) + eps
            for i in range(10):
                t = random_tuple(space, rng, n)
                moved = hv_perturb(t, PerturbationParams(eps=eps, seed=i))
                assert is_unimodular(moved)
                assert (t - moved).norm() < bound


def test_hv_perturb_already_unimodular_stays_close():
    rng = np.random.default_rng(9)
    space = ModuleSpace(Algebra((2,)), 2, 2)
    t = random_unimodular(space, rng, 1)
    moved = hv_perturb(t, PerturbationParams(eps=0.25, seed=0))
    assert is_unimodular(moved)
    assert (t - moved).norm() < math.sqrt(0.25) + 0.25


def test_hv_perturb_fails_below_stable_rank():
    space = ModuleSpace(Algebra((1,)), 1, 2)
    rng = np.random.default_rng(10)
    t = ModuleTuple((space.random_element(rng),))
    with pytest.raises(ReductionFailedError):
        hv_perturb(t, PerturbationParams(eps=0.1, seed=0, max_retries=10))


def test_hv_perturb_rejects_non_full_corner():
    alg = Algebra((1,))
    big = alg.matrix_algebra(2)
    q = big.element([np.diag([1.0, 0.0])])
    dead = corner_space(alg, 2, big.zero(), q)
    t = ModuleTuple((dead.zero(),))
    with pytest.raises(ModuleNotFullError):
        hv_perturb(t, PerturbationParams(eps=0.1, seed=0))


def test_hv_perturb_works_on_corners():
    alg = Algebra((1,))
    big = alg.matrix_algebra(4)
    p = big.element([np.diag([1.0, 1, 0, 0])])
    q = big.element([np.diag([1.0, 1, 1, 0])])
    corner = corner_space(alg, 4, p, q)
    rng = np.random.default_rng(11)
    t = ModuleTuple(tuple(corner.random_element(rng) for _ in range(2)))
    moved = hv_perturb(t, PerturbationParams(eps=0.1, seed=3))
    assert is_unimodular(moved)
    assert (t - moved).norm() < math.sqrt(0.1) + 0.1


# -- density experiments ----------------------------------------------------------------------


def test_density_obstructed_case():
    space = ModuleSpace(Algebra((1,)), 1, 2)
    report = density_experiment(space, k=1, trials=200, seed=0)
    assert report.unimodular_fraction == 0.0
    assert report.exact_obstruction
    assert report.predicted_sr == 2


def test_density_generic_case():
    space = ModuleSpace(Algebra((1,)), 1, 2)
    report = density_experiment(space, k=2, trials=1000, seed=7)
    assert report.unimodular_fraction == 1.0
    assert not report.exact_obstruction


def test_density_block_case():
    space = ModuleSpace(Algebra((2, 3)), 2, 3)
    report = density_experiment(space, k=2, trials=300, seed=11)
    assert report.unimodular_fraction == 1.0
    assert report.predicted_sr == 2


def test_density_reports_are_reproducible():
    space = ModuleSpace(Algebra((1, 2)), 2, 3)
    a = density_experiment(space, 2, 150, 99)
    b = density_experiment(space, 2, 150, 99)
    assert a == b
    assert a.to_json_dict() == b.to_json_dict()


def test_density_validates_arguments():
    space = scalar_space()
    with pytest.raises(ValueError):
        density_experiment(space, 0, 10, 0)
    with pytest.raises(ValueError):
        density_experiment(space, 1, 0, 0)


def test_params_validation():
    with pytest.raises(ValueError):
        PerturbationParams(eps=0.0)
    with pytest.raises(ValueError):
        PerturbationParams(eps=0.1, tol=-1.0)
    with pytest.raises(ValueError):
        PerturbationParams(eps=0.1, max_retries=0)
