import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from llcorr.bethe import BetheNumbers, BetheState, ModelParams, solve_bethe
from llcorr.pfd import (ExtrapolationError, ReducedFormFactor, combinatorial_factor,
                        count_pole_assignments, density_vanishing_probe, pfd_coeff_density_leading,
                        pfd_coeff_field_leading, residue_probe, richardson, verify_table)


def _state(numbers, L=40.0, c=1.0):
    return solve_bethe(ModelParams(L, c, len(numbers)), BetheNumbers.from_values(numbers))


def test_leading_field_coefficient_by_hand():
    st0 = BetheState(ModelParams(10, 2, 2), BetheNumbers.from_values([-0.5, 0.5]),
                     np.array([-1.0, 1.0]))
    # 4c^2/((2)^2 + c^2) = 16/8
    assert pfd_coeff_field_leading(st0, 0) == pytest.approx(2.0, rel=1e-15)
    assert pfd_coeff_field_leading(st0, 1) == pytest.approx(2.0, rel=1e-15)


def test_leading_density_coefficient_by_hand():
    st0 = BetheState(ModelParams(10, 1, 2), BetheNumbers.from_values([-0.5, 0.5]),
                     np.array([0.0, 1.0]))
    # a=0, mu_a=2: 4 * 4 / ((1+1)(1+1))
    assert pfd_coeff_density_leading(st0, 0, 2.0) == pytest.approx(4.0, rel=1e-15)
    # coefficient vanishes when mu_a sits on lam_a
    assert pfd_coeff_density_leading(st0, 0, 0.0) == 0.0


def test_single_particle_field_coefficient_is_one():
    st0 = _state([0.0])
    assert pfd_coeff_field_leading(st0, 0) == 1.0
    with pytest.raises(IndexError):
        pfd_coeff_field_leading(st0, 1)


@pytest.mark.parametrize("numbers", [[-0.5, 0.5], [-2.0, 0.0, 3.0], [-4.5, -1.5, 1.5, 4.5]])
def test_field_residue_matches_closed_form(numbers):
    st0 = _state(numbers)
    rf = ReducedFormFactor("field", st0.params.c)
    for a in range(st0.N):
        r = residue_probe(rf, st0, a)
        assert r.value == pytest.approx(pfd_coeff_field_leading(st0, a), rel=1e-6)


@pytest.mark.parametrize("numbers", [[-0.5, 0.5], [-3.0, 0.0, 3.0]])
def test_density_residue_matches_closed_form(numbers):
    st0 = _state(numbers, c=2.0)
    rf = ReducedFormFactor("density", 2.0)
    for a in range(st0.N):
        for shift in (0.3, -1.1, 2.5):
            mu_a = float(st0.roots[a]) + shift
            r = residue_probe(rf, st0, a, mu_a)
            assert r.value == pytest.approx(pfd_coeff_density_leading(st0, a, mu_a), rel=1e-6)


@settings(max_examples=15)
@given(st.lists(st.floats(0.3, 3.0), min_size=2, max_size=2))
def test_residue_independent_of_direction(d):
    st0 = _state([-3.0, 0.0, 3.0])
    rf = ReducedFormFactor("field", 1.0)
    ref = residue_probe(rf, st0, 1).value
    assert residue_probe(rf, st0, 1, direction=d).value == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("numbers", [[-0.5, 0.5], [-3.0, 0.0, 3.0]])
def test_density_vanishing_coefficients(numbers):
    st0 = _state(numbers)
    for a in range(st0.N):
        v = density_vanishing_probe(st0, a)
        assert abs(v["double"]) / v["scale"] < 1e-8
        assert abs(v["simple"]) / v["scale"] < 1e-8


def test_probe_argument_checks():
    st0 = _state([-0.5, 0.5])
    with pytest.raises(ValueError):
        residue_probe(ReducedFormFactor("density", 1.0), st0, 0)
    with pytest.raises(ValueError):
        residue_probe(ReducedFormFactor("field", 3.0), st0, 0)
    with pytest.raises(ValueError):
        residue_probe(ReducedFormFactor("field", 1.0), _state([-2.0, -1.0, 0.0, 1.0, 2.0]), 0)
    with pytest.raises(ValueError):
        ReducedFormFactor("field", 1.0)([0.0, 1.0], [0.0, 1.0])


@pytest.mark.parametrize("N", range(1, 6))
def test_counting_reproduces_factor(N):
    for n in range(0, 3):
        for p in range(0, 3):
            m = N - 2 * n - p - 1
            if 0 <= m <= 2:
                assert count_pole_assignments(N, n, m, p) == combinatorial_factor(N, n, p)


def test_counting_depends_only_on_sizes():
    a = count_pole_assignments(4, 1, 0, 1)
    b = count_pole_assignments(4, 1, 0, 1, sets=(frozenset({0, 1, 3}), frozenset(), frozenset({2})))
    assert a == b == combinatorial_factor(4, 1, 1)


def test_combinatorial_factor_values():
    assert combinatorial_factor(3, 1, 0) == 1
    assert combinatorial_factor(5, 2, 0) == 6
    assert combinatorial_factor(4, 0, 2) == 3


def test_richardson_exact_for_polynomials():
    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    r = richardson(eps, 3.0 + 2 * eps - 5 * eps ** 2)
    assert r.value == pytest.approx(3.0, abs=1e-13)


def test_richardson_rejects_divergence():
    eps = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    with pytest.raises(ExtrapolationError):
        richardson(eps, 1 / eps)
    with pytest.raises(ValueError):
        richardson([0.1], [1.0])


@pytest.mark.parametrize("N", [1, 2, 3])
def test_verify_table_passes(N):
    rows = verify_table(N=N)
    assert rows and all(r["pass"] for r in rows), [r for r in rows if not r["pass"]]
    assert {r["check"] for r in rows} >= {f"field_residue_a{a}" for a in range(N)}
