import math

import numpy as np
import pytest

from llcorr.bethe import BetheNumbers, ModelParams, solve_bethe
from llcorr.oracle import (DensityLehmann, FieldLehmann, LehmannConfig, SaturationError,
                           density_states, density_taper, density_window_stability, dilute_state,
                           ff_ratio_study, field_states, fit_exponent, lehmann_density,
                           lehmann_field, lowdensity_convergence_study)
from llcorr.rootdensity import gaussian


def _state(numbers, L=20.0, c=1.0):
    return solve_bethe(ModelParams(L, c, len(numbers)), BetheNumbers.from_values(numbers))


def test_single_particle_is_plane_wave():
    st0 = _state([2.0], L=15.0)
    lam = st0.roots[0]
    r = lehmann_field(st0, 0.7, 0.3)
    assert r.value == pytest.approx(np.exp(1j * (0.3 * lam * lam - 0.7 * lam)) / 15.0, rel=1e-14)
    assert r.saturation == pytest.approx(1.0)


@pytest.mark.parametrize("numbers,c", [([-0.5, 0.5], 1.0), ([-1.5, 2.5], 4.0)])
def test_pair_completeness(numbers, c):
    st0 = _state(numbers, L=10.0, c=c)
    r = lehmann_field(st0, 0.0, 0.0, LehmannConfig(number_window=200))
    assert r.saturation == pytest.approx(1.0, abs=1e-3)
    assert r.value == pytest.approx(2 / 10.0, rel=1e-3)


def test_saturation_grows_with_window():
    st0 = _state([-1.0, 0.0, 1.0], L=30.0)
    s = [FieldLehmann(st0, LehmannConfig(number_window=W)).saturation for W in (5, 10, 20)]
    assert s[0] < s[1] < s[2] <= 1 + 1e-9
    assert s[2] > 0.99


def test_strict_window_raises():
    st0 = _state([-1.0, 0.0, 1.0], L=30.0)
    with pytest.raises(SaturationError):
        FieldLehmann(st0, LehmannConfig(number_window=1, strict=True))
    # a window too small for any state gives an empty, unsaturated sum
    empty = FieldLehmann(st0, LehmannConfig(number_window=0.5))
    assert empty.saturation == 0.0 and empty(0.0, 0.0).value == 0


def test_field_hermiticity_termwise():
    orc = FieldLehmann(_state([-1.5, 0.5]), LehmannConfig(number_window=20))
    for x, t in [(0.5, 0.2), (1.7, -0.4), (0.0, 1.0)]:
        a, b = orc(x, t).value, orc(-x, -t).value
        assert a == b.conjugate()


def test_density_hermiticity_termwise():
    orc = DensityLehmann(_state([-0.5, 0.5]), LehmannConfig(number_window=6, mu_window=10, taper=3))
    for x, t in [(0.5, 0.2), (1.0, -0.5)]:
        assert orc(x, t).value == orc(-x, -t).value.conjugate()


def test_thread_count_does_not_change_sum():
    st0 = _state([-1.0, 0.0, 2.0], L=25.0)
    one = FieldLehmann(st0, LehmannConfig(number_window=12, workers=1, chunk=997))(0.5, 0.2).value
    two = FieldLehmann(st0, LehmannConfig(number_window=12, workers=2, chunk=1500))(0.5, 0.2).value
    assert abs(one - two) <= 1e-14 * abs(one)


def test_enumeration_is_deterministic_and_unique():
    st0 = _state([-1.0, 0.0, 2.0], L=25.0)
    cfg = LehmannConfig(number_window=8)
    a, b = field_states(st0, cfg), field_states(st0, cfg)
    assert np.array_equal(a, b)
    assert len(np.unique(a, axis=0)) == len(a)
    assert np.all(np.diff(a, axis=1) > 0)
    # two bra particles carry half-odd numbers: odd when doubled
    assert np.all(a % 2 == 1)


def test_enumeration_cap_keeps_closest_states():
    st0 = _state([-1.0, 0.0, 2.0], L=25.0)
    full = field_states(st0, LehmannConfig(number_window=8))
    capped = field_states(st0, LehmannConfig(number_window=8, max_states=50))
    assert len(capped) == 50
    full_set = {tuple(r) for r in full}
    assert all(tuple(r) in full_set for r in capped)


def test_density_states_exclude_ket():
    st0 = _state([-0.5, 0.5])
    Jd = density_states(st0, LehmannConfig(number_window=4, mu_window=5))
    ket = np.asarray(st0.numbers.doubled)
    assert not np.any(np.all(Jd == ket, axis=1))
    assert len(np.unique(Jd, axis=0)) == len(Jd)


def test_density_taper_shape():
    mu = np.array([0.0, 5.0, 9.99, 10.0, 12.0])
    w = density_taper(mu, 10.0, 4.0)
    assert w[0] == 1.0 and w[-1] == 0.0
    assert np.all(np.diff(w) <= 0)


def test_density_diagonal_and_window_stability():
    st0 = _state([-0.5, 0.5], L=20.0)
    cfg = LehmannConfig(number_window=8, mu_window=15, taper=5)
    r = lehmann_density(st0, 1.0, 0.0, cfg)
    assert r.meta["diagonal"] == pytest.approx((2 / 20.0) ** 2)
    no_diag = lehmann_density(st0, 1.0, 0.0, cfg, include_diagonal=False)
    assert r.value - no_diag.value == pytest.approx(r.meta["diagonal"], rel=1e-12)
    a, b, gap = density_window_stability(st0, 1.0, 0.3, cfg)
    assert gap < 0.02 * abs(b)


def test_chirp_window_cap():
    orc = DensityLehmann(_state([-0.5, 0.5], L=20.0), LehmannConfig(number_window=4, mu_window=30))
    assert orc.window(0.0) == 30
    assert orc.window(0.5) == pytest.approx(10.0)


def test_dilute_state_density():
    st0 = dilute_state(gaussian(1.0, 2.0), 0.05, 1.0, N=3)
    assert st0.N == 3 and st0.params.L == pytest.approx(60.0)
    with pytest.raises(ValueError):
        dilute_state(gaussian(1.0, 2.0), 0.05, 1.0)


def test_fit_exponent_recovers_power():
    D = np.array([0.1, 0.05, 0.025])
    assert fit_exponent(D, 3 * D ** 1.3) == pytest.approx(1.3)


def test_small_field_convergence_study():
    rows = lowdensity_convergence_study(gaussian(1.0, 2.0), [0.1, 0.05, 0.025], 1.0, 0.5, 0.2,
                                        N=2, cfg=LehmannConfig(number_window=100))
    errs = [r.rel_err for r in rows]
    assert errs[0] > errs[1] > errs[2]
    assert 0.5 <= fit_exponent([r.D for r in rows], errs) <= 1.5
    assert all(r.saturation > 0.999 for r in rows)
    rec = rows[0].to_record()
    assert {"D", "N", "L", "rel_err", "formula_abs", "oracle_abs"} <= rec.keys()


def test_study_rejects_increasing_densities():
    with pytest.raises(ValueError):
        lowdensity_convergence_study(gaussian(1.0, 2.0), [0.05, 0.1], 1.0, 0.5, 0.2, N=2)


def test_density_study_reports_both_variants():
    rows = lowdensity_convergence_study(gaussian(1.0, 2.0), [0.1, 0.05], 1.0, 0.5, 0.2, N=2,
                                        kind="density",
                                        cfg=LehmannConfig(number_window=6, mu_window=20, taper=6))
    for r in rows:
        assert {"rel_err_incl_vs_incl", "rel_err_excl_vs_incl", "rel_err_incl_vs_excl"} <= r.extra.keys()
        assert math.isfinite(r.rel_err)


def test_ff_ratio_trend():
    rows = ff_ratio_study([-2.0, 0.0, 2.0], [50, 100, 200, 400], 1.0, a=1)
    r = [row["ratio_minus_one"] for row in rows]
    assert r[-1] < r[0]
    assert rows[-1]["inv_L_gap"] < rows[0]["inv_L_gap"]
