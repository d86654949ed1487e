import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from slqns import noise
from slqns.noise import TWO_PI, ShotNoiseParams, SpectrumVector


def fourier_quadrature(p, omega, j=0, k=0):
    """Integrate exp(-i w t) C_jk(t) over [-40/kappa, 40/kappa] with adaptive quadrature."""
    T = 40 / p.kappa
    f = lambda t: np.exp(-1j * omega * t) * noise.correlation_function(p, t)[j, k]  # noqa: E731
    tol = 1e-10 * abs(noise.correlation_function(p, 0.0)[j, k]) * T
    re = quad(lambda t: f(t).real, -T, T, limit=2000, points=[0.0], epsabs=tol, epsrel=1e-10)[0]
    im = quad(lambda t: f(t).imag, -T, T, limit=2000, points=[0.0], epsabs=tol, epsrel=1e-10)[0]
    return re + 1j * im


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            ShotNoiseParams(1.0, 1.0, 0.0, 0.0, 0.1)
        with pytest.raises(ValueError):
            ShotNoiseParams(1.0, 1.0, 1.0, 0.0, -0.1)

    def test_steady_state_nbar(self):
        assert noise.steady_state_nbar(0.0, 1e6, 3e6) == 0.0
        kappa = 2e6
        assert noise.steady_state_nbar(kappa / 2, kappa, 0.0) == pytest.approx(1.0)

    def test_drive_for_spectroscopy_nbar(self, shot_params):
        eps = noise.drive_for_nbar(0.127, shot_params.kappa, shot_params.delta_c)
        # independent inversion of nbar = eps^2 / ((kappa/2)^2 + dc^2)
        want = np.sqrt(0.127 * ((TWO_PI * 198e3 / 2) ** 2 + (shot_params.delta_c) ** 2))
        assert eps == pytest.approx(want, rel=1e-12)
        assert eps == pytest.approx(4.396e6, rel=1e-3)
        assert noise.steady_state_nbar(eps, shot_params.kappa, shot_params.delta_c) == pytest.approx(0.127)


class TestSpectrum:
    def test_no_photons_no_noise(self, shot_params):
        p = ShotNoiseParams(shot_params.chi1, shot_params.chi2, shot_params.kappa, shot_params.delta_c, 0.0)
        assert np.all(noise.shot_noise_spectrum(p, np.linspace(-1e7, 1e7, 11)) == 0)

    def test_peak_values(self, shot_params):
        s = noise.shot_noise_spectrum(shot_params, -shot_params.delta_c)
        chi1, chi2, kappa = TWO_PI * -29.1e3, TWO_PI * -59.5e3, TWO_PI * 198e3
        assert s[0, 0] == pytest.approx(4 * chi1**2 * 0.127 / kappa, rel=1e-12)
        assert s[0, 0] == pytest.approx(1.365e4, rel=1e-3)
        assert s[0, 1] == pytest.approx(4 * chi1 * chi2 * 0.127 / kappa, rel=1e-12)
        assert s[0, 1] == pytest.approx(2.791e4, rel=1e-3)

    def test_im_s12_vanishes(self, shot_params):
        w = np.linspace(-5e7, 5e7, 101)
        sv = [SpectrumVector.from_shot_noise(shot_params, x) for x in np.abs(w)]
        assert all(v.im_s12_plus == 0 and v.im_s12_minus == 0 for v in sv)

    def test_peak_location(self, shot_params):
        w = np.linspace(-3e7, 3e7, 600001)
        s = noise.shot_noise_spectrum(shot_params, w)[:, 1, 1]
        assert abs(w[np.argmax(s)] + shot_params.delta_c) <= (w[1] - w[0])

    def test_rank_one(self, shot_params):
        s = noise.shot_noise_spectrum(shot_params, np.linspace(-2e7, 2e7, 51))
        det = s[:, 0, 0] * s[:, 1, 1] - np.abs(s[:, 0, 1]) ** 2
        assert np.max(np.abs(det) / (s[:, 0, 0] * s[:, 1, 1])) < 1e-8

    def test_asymmetry(self, shot_params):
        dc = abs(shot_params.delta_c)
        s_plus = noise.shot_noise_spectrum(shot_params, dc)
        s_minus = noise.shot_noise_spectrum(shot_params, -dc)
        assert s_minus[0, 0] > 100 * s_plus[0, 0]

    def test_both_detuning_signs(self, shot_params):
        mirrored = ShotNoiseParams(shot_params.chi1, shot_params.chi2, shot_params.kappa, -shot_params.delta_c, 0.127)
        a = SpectrumVector.from_shot_noise(shot_params, 2e7)
        b = SpectrumVector.from_shot_noise(mirrored, 2e7)
        assert a.s11_minus == pytest.approx(b.s11_plus)


class TestCorrelation:
    def test_zero_lag(self, shot_params):
        c0 = noise.correlation_function(shot_params, 0.0)
        assert np.allclose(c0, shot_params.nbar * np.outer(shot_params.chi, shot_params.chi))

    def test_stationarity(self, shot_params):
        t = np.linspace(0, 5e-5, 17)
        assert np.allclose(np.conj(noise.correlation_function(shot_params, t)),
                           noise.correlation_function(shot_params, -t))

    def test_fourier_duality_peak(self, shot_params):
        w = -shot_params.delta_c
        for j, k in ((0, 0), (1, 1), (0, 1)):
            num = fourier_quadrature(shot_params, w, j, k)
            ana = noise.shot_noise_spectrum(shot_params, w)[j, k]
            assert abs(num - ana) / abs(ana) < 1e-4

    @pytest.mark.parametrize("offset", [-3.0, -1.0, 1.0, 3.0, 10.0])
    def test_fourier_duality_tails(self, shot_params, offset):
        w = -shot_params.delta_c + offset * shot_params.kappa
        num = fourier_quadrature(shot_params, w)
        ana = noise.shot_noise_spectrum(shot_params, w)[0, 0]
        assert abs(num - ana) / ana < 1e-3


class TestSpectrumVector:
    def test_ordering_pinned(self):
        x = np.arange(9.0)
        assert noise.unpack(x).re_s12_plus == 2.0
        assert noise.PARAM_NAMES[2] == "re_s12_plus"
        assert noise.PARAM_NAMES[-1] == "delta_omega"

    def test_zeros(self):
        v = noise.unpack(np.zeros(9))
        assert v == SpectrumVector()

    @given(st.lists(st.floats(-1e6, 1e6), min_size=9, max_size=9))
    def test_round_trip(self, xs):
        x = np.array(xs)
        assert np.array_equal(noise.pack(noise.unpack(x)), x)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            noise.unpack(np.zeros(8))

    def test_physicality(self, shot_params):
        assert SpectrumVector.from_shot_noise(shot_params, 1.2e7).is_physical()
        assert not SpectrumVector(1.0, 1.0, 2.0).is_physical()
        # the uniform starting guess has |S12|^2 = 2 S11 S22, so it is not PSD
        assert not SpectrumVector.uniform(1e3).is_physical()
        assert SpectrumVector(1e3, 1e3, 1e3, 0.0, 1e3, 1e3, 1e3, 0.0).is_physical()

    def test_matrix_hermitian(self):
        v = SpectrumVector(3.0, 2.0, 1.0, 0.5)
        m = v.matrix(+1)
        assert np.allclose(m, m.conj().T)
        assert m[1, 0] == 1.0 - 0.5j
