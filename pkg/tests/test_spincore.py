import numpy as np
import pytest

from odmrkit.params import default_params
from odmrkit.spincore import (
    ground_levels,
    mw_transition_frequencies,
    nuclear_larmor_khz,
    spin1_operators,
)


def test_sz_is_diagonal():
    ops = spin1_operators()
    assert np.allclose(ops.sz, np.diag([1, 0, -1]))


def test_commutators_and_casimir():
    ops = spin1_operators()
    for a, b, c in [(ops.sx, ops.sy, ops.sz), (ops.sy, ops.sz, ops.sx), (ops.sz, ops.sx, ops.sy)]:
        comm = a @ b - b @ a - 1j * c
        assert np.max(np.abs(comm)) < 1e-12
    casimir = ops.sx @ ops.sx + ops.sy @ ops.sy + ops.sz @ ops.sz
    assert np.max(np.abs(casimir - 2 * np.eye(3))) < 1e-12


def test_hermiticity():
    ops = spin1_operators()
    for m in (ops.sx, ops.sy, ops.sz):
        assert np.max(np.abs(m - m.conj().T)) < 1e-15


def test_zero_field_degenerate_at_d():
    p = default_params()
    d = ground_levels(p, 0.0)
    assert d.f_plus_mhz == pytest.approx(1063.11)
    assert d.f_minus_mhz == pytest.approx(1063.11)
    fm, fp = mw_transition_frequencies(d)
    assert fm == fp


def test_zeeman_separation_at_158_gauss():
    # oracle: independent constant lookup, 2 * g * (mu_B/h) * B
    p = default_params()
    d = ground_levels(p, 158.0)
    sep = d.f_plus_mhz - d.f_minus_mhz
    oracle = 2 * 2.00 * 13.996244936e3 / 1e4 * 158.0
    assert sep == pytest.approx(oracle, rel=1e-12)
    assert sep == pytest.approx(884.6, abs=0.1)


def test_separation_at_27p5_gauss():
    p = default_params()
    d = ground_levels(p, 27.5)
    fm, fp = mw_transition_frequencies(d)
    assert fp - fm == pytest.approx(2 * 2.0 * 1.3996244936 * 27.5, rel=1e-12)
    assert fp - fm == pytest.approx(154.0, abs=0.1)


def test_shift_convention_halves_separation():
    p = default_params()
    sep_default = np.diff(mw_transition_frequencies(ground_levels(p, 50.0)))[0]
    sep_shift = np.diff(mw_transition_frequencies(ground_levels(p, 50.0, "shift")))[0]
    assert sep_shift == pytest.approx(0.5 * sep_default, rel=1e-12)
    with pytest.raises(ValueError):
        ground_levels(p, 50.0, "bogus")


def test_linearity_in_field():
    p = default_params()
    rng = np.random.default_rng(3)
    for b in rng.uniform(0.1, 400.0, 20):
        f1 = ground_levels(p, b).f_plus_mhz - p.d_splitting_mhz
        f2 = ground_levels(p, 2 * b).f_plus_mhz - p.d_splitting_mhz
        assert f2 == pytest.approx(2 * f1, rel=1e-9)


def test_optical_offsets_follow_levels():
    p = default_params()
    d = ground_levels(p, 100.0)
    assert d.optical_offsets[0] == 0.0
    assert d.optical_offsets[1] == -d.f_minus_mhz
    assert d.optical_offsets[2] == -d.f_plus_mhz


def test_nuclear_larmor_values():
    assert nuclear_larmor_khz("13C", 0.0) == 0.0
    # oracle: gamma * B by direct multiplication
    assert nuclear_larmor_khz("13C", 158.0) == pytest.approx(10.7084 * 158e-4 * 1e3, rel=1e-12)
    assert nuclear_larmor_khz("13C", 158.0) == pytest.approx(169.2, abs=0.05)
    assert nuclear_larmor_khz("29Si", 158.0) == pytest.approx(133.75, abs=0.05)


def test_nuclear_larmor_homogeneous_degree_one():
    rng = np.random.default_rng(11)
    for b in rng.uniform(1.0, 500.0, 10):
        assert nuclear_larmor_khz("29Si", 3 * b) == pytest.approx(
            3 * nuclear_larmor_khz("29Si", b), rel=1e-12
        )


def test_unknown_isotope():
    with pytest.raises(ValueError, match="unknown isotope"):
        nuclear_larmor_khz("1H", 10.0)
    with pytest.raises(ValueError):
        ground_levels(default_params(), -1.0)
