import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raymap.errors import DegeneratePath, InvalidAngle, NonPositiveInput, UnknownMaterial
from raymap.materials import BACKGROUND, CONCRETE, get_material
from raymap.propagation import (
    SPEED_OF_LIGHT,
    ComplexPermittivity,
    PathLossParams,
    ci_path_loss,
    complex_permittivity,
    diffraction_spreading,
    fresnel_reflection,
    fspl,
    transition_function,
    utd_diffraction,
)


class TestFspl:
    def test_reference_1m_24ghz(self):
        # hand evaluation of 20*log10(4*pi*1*2.4e9/c) = 40.0520...
        assert fspl(2.4e9, 1.0) == pytest.approx(40.052008, abs=1e-4)

    def test_doubling_distance_adds_6db(self):
        for f, d in [(1e9, 0.5), (2.4e9, 3.0), (60e9, 12.0)]:
            assert fspl(f, 2 * d) - fspl(f, d) == pytest.approx(20 * np.log10(2), abs=1e-9)

    def test_rejects_nonpositive(self):
        with pytest.raises(NonPositiveInput):
            fspl(2.4e9, 0.0)
        with pytest.raises(NonPositiveInput):
            fspl(-1.0, 1.0)

    @given(
        st.floats(0.01, 100.0),
        st.floats(0.01, 100.0),
        st.floats(1e8, 1e11),
    )
    def test_monotone_in_distance(self, d1, d2, f):
        lo, hi = sorted([d1, d2])
        if hi - lo < 1e-9:
            return
        assert fspl(f, lo) < fspl(f, hi)


class TestCiPathLoss:
    def test_at_one_meter_log_term_vanishes(self):
        p = PathLossParams(2.4e9, 1.0, exponent=3.7, atmospheric_attenuation=2.5)
        assert ci_path_loss(p) == pytest.approx(fspl(2.4e9, 1.0) + 2.5, abs=1e-12)

    def test_ten_meters_n2(self):
        p = PathLossParams(2.4e9, 10.0, exponent=2.0)
        assert ci_path_loss(p) == pytest.approx(60.052008, abs=1e-4)

    def test_literal_equation_uses_n1(self):
        # with n=1 the model reduces to FSPL(1m) + 10*log10(d) + AT
        p = PathLossParams(2.4e9, 10.0, exponent=1.0)
        assert ci_path_loss(p) == pytest.approx(fspl(2.4e9, 1.0) + 10.0, abs=1e-12)

    def test_rejects_negative_distance(self):
        with pytest.raises(NonPositiveInput):
            PathLossParams(2.4e9, -3.0)

    @given(st.floats(0.1, 50.0), st.floats(0.1, 50.0))
    def test_monotone_in_distance(self, d1, d2):
        lo, hi = sorted([d1, d2])
        if hi - lo < 1e-9:
            return
        a = ci_path_loss(PathLossParams(2.4e9, lo))
        b = ci_path_loss(PathLossParams(2.4e9, hi))
        assert a < b


class TestComplexPermittivity:
    def test_concrete_at_24ghz(self):
        # sigma = 0.0326 * 2.4^0.8095 = 0.06622 S/m; imag = sigma/(2 pi f eps0)
        eta = complex_permittivity(CONCRETE, 2.4e9)
        assert eta.real_part == pytest.approx(5.31)
        assert CONCRETE.conductivity(2.4e9) == pytest.approx(0.0662, abs=2e-4)
        assert eta.imag_part == pytest.approx(0.496, abs=2e-3)

    def test_background_is_vacuum(self):
        eta = complex_permittivity(BACKGROUND, 5e9)
        assert eta.real_part == 1.0
        assert eta.imag_part == 0.0

    def test_unknown_material(self):
        with pytest.raises(UnknownMaterial):
            get_material("steel")

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(NonPositiveInput):
            complex_permittivity(CONCRETE, 0.0)


class TestFresnel:
    def test_air_interface_reflects_nothing(self):
        for theta in (0.0, 0.4, 1.2):
            for pol in ("TE", "TM"):
                assert abs(fresnel_reflection(ComplexPermittivity(1.0), theta, pol)) < 1e-12

    def test_normal_incidence_eps4(self):
        g = fresnel_reflection(ComplexPermittivity(4.0), 0.0, "TE")
        assert g.real == pytest.approx(-1.0 / 3.0, abs=1e-12)
        assert g.imag == pytest.approx(0.0, abs=1e-12)

    def test_grazing_limit(self):
        g = fresnel_reflection(ComplexPermittivity(4.0, 0.5), np.pi / 2 - 1e-6, "TE")
        assert abs(g) > 0.999

    def test_normal_incidence_pol_degeneracy(self):
        eta = ComplexPermittivity(5.31, 0.5)
        te = fresnel_reflection(eta, 0.0, "TE")
        tm = fresnel_reflection(eta, 0.0, "TM")
        assert abs(te) == pytest.approx(abs(tm), abs=1e-12)

    def test_rejects_bad_angle(self):
        with pytest.raises(InvalidAngle):
            fresnel_reflection(ComplexPermittivity(4.0), np.pi / 2)

    @given(
        st.floats(1.0, 20.0),
        st.floats(0.0, 10.0),
        st.floats(0.0, np.pi / 2 - 1e-9),
        st.sampled_from(["TE", "TM"]),
    )
    @settings(max_examples=300)
    def test_passive_media_magnitude_bound(self, real, imag, theta, pol):
        g = fresnel_reflection(ComplexPermittivity(real, imag), theta, pol)
        assert abs(g) <= 1.0 + 1e-12


class TestUtd:
    F = 2.4e9

    def test_transition_function_limits(self):
        assert abs(transition_function(10.0)) == pytest.approx(1.0, abs=0.03)
        assert abs(transition_function(0.0)) == 0.0
        # oracle: tail of int exp(-j t^2) dt from the cumulative Fresnel
        # integrals, int_a^inf = sqrt(pi/2) * [(1/2 - C) - j(1/2 - S)]
        import scipy.special

        x = 2.0
        s_val, c_val = scipy.special.fresnel(np.sqrt(x) * np.sqrt(2.0 / np.pi))
        tail = np.sqrt(np.pi / 2.0) * ((0.5 - c_val) - 1j * (0.5 - s_val))
        expected = 2j * np.sqrt(x) * np.exp(1j * x) * tail
        assert transition_function(x) == pytest.approx(expected, abs=1e-9)

    def test_decay_into_shadow(self):
        phip = np.deg2rad(40.0)
        d5 = abs(utd_diffraction(0.0, 3.0, 2.0, phip, np.deg2rad(225.0), self.F))
        d25 = abs(utd_diffraction(0.0, 3.0, 2.0, phip, np.deg2rad(245.0), self.F))
        assert d5 > d25

    def test_reciprocity_of_total_diffracted_field(self):
        phip = np.deg2rad(35.0)
        phi = np.deg2rad(230.0)
        eta = ComplexPermittivity(5.31, 0.5)
        for s_i, s_d in [(3.0, 2.0), (1.0, 4.5), (0.7, 0.7)]:
            spread = 1.0 / np.sqrt(s_i * s_d * (s_i + s_d))
            fwd = utd_diffraction(0.0, s_i, s_d, phip, phi, self.F, (eta, eta)) * spread
            rev = utd_diffraction(0.0, s_d, s_i, phi, phip, self.F, (eta, eta)) * spread
            assert abs(fwd - rev) <= 1e-9 * abs(fwd)

    def test_shadow_boundary_continuity(self):
        # total field (direct + diffracted) 0.1 deg either side of the
        # incident shadow boundary differs by < 1%
        f = self.F
        k = 2 * np.pi * f / SPEED_OF_LIGHT
        phip = np.deg2rad(40.0)
        s_i, s_d = 1.0, 0.5
        sb = np.deg2rad(40.0 + 180.0)

        def total(phi):
            d = utd_diffraction(0.0, s_i, s_d, phip, phi, f)
            diff = (
                np.exp(-1j * k * s_i)
                / s_i
                * d
                * np.sqrt(s_i / (s_d * (s_i + s_d)))
                * np.exp(-1j * k * s_d)
            )
            if phi < sb:
                tx = s_i * np.array([np.cos(phip), np.sin(phip)])
                rx = s_d * np.array([np.cos(phi), np.sin(phi)])
                dist = np.linalg.norm(tx - rx)
                direct = np.exp(-1j * k * dist) / dist
            else:
                direct = 0.0
            return abs(direct + diff)

        lit = total(sb - np.deg2rad(0.1))
        shadow = total(sb + np.deg2rad(0.1))
        assert abs(lit - shadow) / shadow < 0.01

    def test_finite_on_shadow_boundary(self):
        phip = np.deg2rad(40.0)
        d = utd_diffraction(0.0, 2.0, 1.0, phip, phip + np.pi, self.F)
        assert np.isfinite(d.real) and np.isfinite(d.imag)

    def test_rejects_degenerate_legs(self):
        with pytest.raises(DegeneratePath):
            utd_diffraction(0.0, 0.0, 1.0, 0.5, 2.0, self.F)

    def test_spreading_symmetry(self):
        assert diffraction_spreading(2.0, 5.0) == pytest.approx(diffraction_spreading(5.0, 2.0))
