"""Grid, stream, integrator, and transform behavior."""

import numpy as np
import pytest
import scipy.linalg

from photodyne.numerics import (
    RngStream,
    TimeGrid,
    discrete_fourier_transform,
    draw,
    integrate_linear_ode,
    inverse_fourier_transform,
    spectral_power,
)


class TestTimeGrid:
    def test_times_arithmetic(self):
        g = TimeGrid(t_start=1.0, dt=0.25, n_samples=5)
        assert np.allclose(g.times, [1.0, 1.25, 1.5, 1.75, 2.0])
        assert g.t_end == pytest.approx(2.25)
        assert g.duration == pytest.approx(1.25)

    def test_index_of_round_trip(self):
        g = TimeGrid(t_start=0.0, dt=0.02, n_samples=1000)
        for i in (0, 1, 499, 999):
            assert g.index_of(g.times[i]) == i

    def test_index_of_rejects_outside(self):
        g = TimeGrid(t_start=0.0, dt=0.1, n_samples=10)
        with pytest.raises(ValueError):
            g.index_of(-0.3)
        with pytest.raises(ValueError):
            g.index_of(1.05)

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 0.0, 10)
        with pytest.raises(ValueError):
            TimeGrid(0.0, -0.1, 10)
        with pytest.raises(ValueError):
            TimeGrid(0.0, 0.1, 0)


class TestRngStream:
    def test_same_key_replays(self):
        a = RngStream(123, 7)
        b = RngStream(123, 7)
        assert np.array_equal(a.uniform(100), b.uniform(100))
        assert np.array_equal(a.gaussian(100), b.gaussian(100))
        assert np.array_equal(a.exponential(2.0, 100), b.exponential(2.0, 100))

    def test_distinct_streams_differ(self):
        a = RngStream(123, 0).uniform(64)
        b = RngStream(123, 1).uniform(64)
        c = RngStream(124, 0).uniform(64)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_uniform_support_and_mean(self):
        u = RngStream(5, 0).uniform(200_000)
        assert u.min() >= 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 3.0 * np.sqrt(1.0 / 12.0 / u.size)

    def test_gaussian_moments(self):
        x = RngStream(6, 0).gaussian(200_000)
        assert abs(x.mean()) < 3.0 / np.sqrt(x.size)
        assert abs(x.std() - 1.0) < 0.01

    def test_exponential_mean(self):
        x = RngStream(7, 0).exponential(3.0, 200_000)
        assert abs(x.mean() - 3.0) < 3.0 * 3.0 / np.sqrt(x.size)
        with pytest.raises(ValueError):
            RngStream(7, 0).exponential(0.0)

    def test_scalar_draws(self):
        s = RngStream(8, 0)
        assert isinstance(draw(s, "uniform01"), float)
        assert isinstance(draw(s, "standard_gaussian"), float)
        assert isinstance(draw(s, "exponential", mean=2.0), float)
        with pytest.raises(ValueError):
            draw(s, "cauchy")

    def test_negative_key_rejected(self):
        with pytest.raises(ValueError):
            RngStream(-1, 0)
        with pytest.raises(ValueError):
            RngStream(0, -1)


class TestIntegrateLinearOde:
    def test_scalar_decay(self):
        out = integrate_linear_ode(np.array([[-1.0 + 0j]]), np.array([1.0 + 0j]), 0.01, 100)
        assert out[0] == pytest.approx(np.exp(-1.0), rel=1e-9)

    def test_rotation_returns_to_start(self):
        w = 2.0
        g = np.array([[0.0, -w], [w, 0.0]], dtype=complex)
        psi0 = np.array([1.0, 0.0], dtype=complex)
        n = 2000
        out = integrate_linear_ode(g, psi0, 2.0 * np.pi / w / n, n)
        assert np.allclose(out, psi0, atol=1e-8)

    def test_matches_expm(self):
        rng = np.random.default_rng(42)
        g = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        g = 0.5 * (g - g.conj().T)  # skew-hermitian keeps the norm bounded
        psi0 = rng.normal(size=6) + 1j * rng.normal(size=6)
        out = integrate_linear_ode(g, psi0, 0.005, 200)
        ref = scipy.linalg.expm(g * 1.0) @ psi0
        assert np.allclose(out, ref, atol=1e-8)

    def test_shape_and_step_validation(self):
        g = np.eye(2, dtype=complex)
        with pytest.raises(ValueError):
            integrate_linear_ode(g, np.ones(3, dtype=complex), 0.1, 1)
        with pytest.raises(ValueError):
            integrate_linear_ode(np.ones((2, 3)), np.ones(2), 0.1, 1)
        with pytest.raises(ValueError):
            integrate_linear_ode(g, np.ones(2, dtype=complex), -0.1, 1)

    def test_blowup_raises(self):
        g = np.array([[1e8 + 0j]])
        with pytest.raises(FloatingPointError):
            integrate_linear_ode(g, np.array([1.0 + 0j]), 1.0, 400)


class TestTransforms:
    def test_single_tone_lands_in_one_bin(self):
        dt = 0.01
        n = 1000
        t = dt * np.arange(n)
        f0 = 7.0  # cycles per unit time, exactly k=70
        x = np.cos(2.0 * np.pi * f0 * t)
        freqs, spec = discrete_fourier_transform(x, dt)
        k = np.argmax(np.abs(spec))
        assert freqs[k] == pytest.approx(f0)

    def test_round_trip(self):
        x = RngStream(11, 0).gaussian(257)
        _, spec = discrete_fourier_transform(x, 0.1)
        back = inverse_fourier_transform(spec, x.size)
        assert np.allclose(back, x, atol=1e-12)

    def test_parseval(self):
        for n in (256, 257):
            x = RngStream(12, n).gaussian(n)
            _, spec = discrete_fourier_transform(x, 1.0)
            assert spectral_power(spec, n) == pytest.approx(float(np.sum(x * x)), rel=1e-12)

    def test_rejects_degenerate_input(self):
        with pytest.raises(ValueError):
            discrete_fourier_transform([1.0], 0.1)
        with pytest.raises(ValueError):
            discrete_fourier_transform([1.0, 2.0], 0.0)
