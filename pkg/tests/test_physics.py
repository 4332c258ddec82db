import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfsqueeze.physics import (
    EmitterParams,
    PhysicsWarning,
    PulseDrive,
    cw_efficiency,
    cw_rate,
    excited_population,
    extraction_efficiency,
    fourier_fraction,
    max_cw_flux,
    purcell_factor,
    rabi_population,
    t2_from_linewidth,
)


class TestExcitedPopulation:
    def test_pi_pulse_inverts(self):
        assert excited_population(PulseDrive(math.pi, 0.0)) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("gamma", [0.0, 0.05, 3.0])
    def test_no_drive(self, gamma):
        assert excited_population(PulseDrive(0.0, gamma)) == 0.0

    def test_damped_pi_pulse(self):
        expected = 0.5 * (1 + math.exp(-0.05 * math.pi))
        assert excited_population(PulseDrive(math.pi, 0.05)) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(0.92731, abs=1e-5)

    @given(st.floats(0, 200), st.floats(0, 10))
    def test_bounded(self, area, gamma):
        assert 0.0 <= rabi_population(area, gamma) <= 1.0

    @given(st.floats(0, 100))
    def test_undamped_is_sin_squared(self, area):
        assert rabi_population(area, 0.0) == pytest.approx(math.sin(area / 2) ** 2, abs=1e-12)

    def test_damped_toward_half(self):
        assert rabi_population(200.0, 0.5) == pytest.approx(0.5, abs=1e-12)

    def test_array_input(self):
        out = rabi_population(np.array([0.0, math.pi]))
        np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-15)

    def test_invalid_drive(self):
        with pytest.raises(ValueError, match="area"):
            PulseDrive(-1.0)
        with pytest.raises(ValueError, match="rep_rate"):
            PulseDrive(1.0, 0.0, 0.0)


class TestSaturation:
    def test_half_saturation(self):
        assert cw_rate(4.9e-9, 4.9e-9, 1.87e9) == pytest.approx(0.935e9)

    def test_zero_power(self):
        assert cw_rate(0.0, 4.9e-9, 1.87e9) == 0.0

    def test_hundredfold(self):
        assert cw_rate(490e-9, 4.9e-9, 1.87e9) == pytest.approx(1.87e9 * 100 / 101)
        assert cw_rate(490e-9, 4.9e-9, 1.87e9) == pytest.approx(1.8515e9, rel=1e-4)

    def test_rejects_bad_p_sat(self):
        with pytest.raises(ValueError, match="p_sat"):
            cw_rate(1.0, 0.0, 1.0)

    @given(st.floats(1e-12, 1e-6), st.floats(1e-12, 1e-6))
    def test_increasing(self, p, dp):
        assert cw_rate(p + dp, 4.9e-9, 1.87e9) > cw_rate(p, 4.9e-9, 1.87e9)

    @given(st.floats(1e-12, 1e-3), st.floats(1.0, 1e12))
    def test_exact_half_at_p_sat(self, p_sat, i_inf):
        assert cw_rate(p_sat, p_sat, i_inf) == pytest.approx(i_inf / 2, rel=4e-16)


class TestFluxAndEfficiency:
    def test_max_flux(self):
        assert max_cw_flux(58.60e-12) == pytest.approx(1 / (2 * 58.60e-12))
        assert max_cw_flux(58.60e-12) == pytest.approx(8.532e9, rel=1e-4)
        assert max_cw_flux(1.0) == 0.5

    def test_cw_efficiency(self):
        assert cw_efficiency(1.87e9, 58.60e-12) == pytest.approx(0.219, abs=1e-3)

    def test_purcell(self):
        assert purcell_factor(1.08e-9, 58.60e-12) == pytest.approx(18.43, abs=0.01)
        assert purcell_factor(3e-10, 3e-10) == 1.0
        assert purcell_factor(2.16e-9, 58.60e-12) == pytest.approx(36.86, abs=0.01)

    @given(st.floats(1e-12, 1e-6), st.floats(1e-12, 1e-6))
    def test_purcell_round_trip(self, t_slab, t1):
        assert purcell_factor(t_slab, t1) * t1 == pytest.approx(t_slab, rel=1e-15)

    def test_extraction(self):
        assert extraction_efficiency(18.4, 6800, 7600) == pytest.approx(0.8486, abs=1e-4)
        assert extraction_efficiency(math.inf, 7600, 7600) == 1.0
        assert extraction_efficiency(0.0, 6800, 7600) == 0.0

    def test_extraction_warns_above_planar_q(self):
        with pytest.warns(PhysicsWarning):
            extraction_efficiency(10.0, 8000, 7600)

    @given(st.floats(1e-6, 1e3), st.floats(0.01, 10), st.floats(1, 7000), st.floats(1, 500))
    def test_extraction_monotone(self, fp, dfp, q, dq):
        base = extraction_efficiency(fp, q, 7600)
        assert extraction_efficiency(fp + dfp, q, 7600) > base
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PhysicsWarning)
            if fp > 0:
                assert extraction_efficiency(fp, q + dq, 7600) > base


class TestCoherence:
    def test_fourier_fraction(self):
        assert fourier_fraction(108.8e-12, 58.60e-12) == pytest.approx(0.9283, abs=1e-4)
        assert fourier_fraction(2e-10, 1e-10) == 1.0
        assert fourier_fraction(54.4e-12, 58.60e-12) == pytest.approx(0.4642, abs=1e-4)

    def test_fourier_fraction_warns(self):
        with pytest.warns(PhysicsWarning):
            fourier_fraction(3e-10, 1e-10)

    def test_t2(self):
        assert t2_from_linewidth(2.925e9) == pytest.approx(108.8e-12, rel=1e-3)
        assert t2_from_linewidth(1 / math.pi) == pytest.approx(1.0)

    def test_raw_voigt_width_is_flagged(self):
        with pytest.warns(PhysicsWarning):
            t2 = t2_from_linewidth(2.74e9, deconvolved=False)
        assert t2 == pytest.approx(116.2e-12, rel=1e-3)


class TestEmitterParams:
    def test_derived_fields(self):
        e = EmitterParams(t1=58.6e-12, t2=108.8e-12, t_slab=1.08e-9, q=6800, q0=7600, qe_espe=0.92)
        assert e.purcell == pytest.approx(18.43, abs=0.01)
        assert e.pee == pytest.approx(extraction_efficiency(e.purcell, 6800, 7600))
        assert e.internal_efficiency == pytest.approx(0.92 * e.pee)

    def test_t2_bound(self):
        with pytest.raises(ValueError, match="t2"):
            EmitterParams(t1=1e-10, t2=3e-10, t_slab=1e-9, q=1, q0=1, qe_espe=1)

    @pytest.mark.parametrize("field", ["qe_espe", "pee"])
    def test_probabilities(self, field):
        kw = dict(t1=1e-10, t2=1e-10, t_slab=1e-9, q=1, q0=1, qe_espe=0.5, pee=0.5)
        kw[field] = 1.5
        with pytest.raises(ValueError, match=field):
            EmitterParams(**kw)
