import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qst_sim.dynamics import Generator, Protocol, SystemConfig, build_generator
from qst_sim.integrator import (
    IntegrationError,
    IntegratorSettings,
    Method,
    default_steps,
    expm_propagate,
    integrate,
    oracle_settings,
    propagate,
)
from qst_sim.pulses import TWO_PI, PulseParams


def constant_generator(M, duration):
    M = np.asarray(M, dtype=complex)
    rows, cols = np.nonzero(M)
    return Generator(
        dim=M.shape[0],
        duration=duration,
        rows=rows.astype(np.int64),
        cols=cols.astype(np.int64),
        values=M[rows, cols],
        term=np.zeros(rows.size, dtype=np.int64),
        n_terms=0,
        coefficients=None,
        rate_scale=max(np.abs(M).max(), 1.0 / duration),
    )


def lossless_ap(T_over_t0=20.0, n_pairs=0, protocol=Protocol.AP, delta_hz=10e6):
    lam = TWO_PI * 10e6
    T = T_over_t0 * np.sqrt(2) * np.pi / lam
    c = SystemConfig(delta_fsr=TWO_PI * delta_hz if n_pairs else np.inf, n_pairs=n_pairs, protocol=protocol)
    return build_generator(PulseParams(lam, T, T / 8), c)


def unit(dim):
    v = np.zeros(dim, complex)
    v[0] = 1
    return v


class TestSettings:
    def test_default_step_rule(self):
        gen = lossless_ap()
        steps, stride = IntegratorSettings().resolve(gen)
        h = gen.duration / steps
        assert h <= gen.duration / 4096 and h <= 0.01 / gen.rate_scale
        assert steps % stride == 0

    def test_multimode_rate(self):
        gen = lossless_ap(n_pairs=9)
        steps, _ = IntegratorSettings().resolve(gen)
        assert gen.duration / steps <= 0.01 / (9 * TWO_PI * 10e6)

    def test_minimum_steps(self):
        assert default_steps(1.0, 1e-3) == 4096

    @pytest.mark.parametrize("kwargs", [dict(steps=8), dict(record_stride=0), dict(substeps=0)])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            IntegratorSettings(**kwargs)


class TestConstantGenerators:
    @pytest.mark.parametrize("method", list(Method))
    def test_rabi(self, method):
        g, T = 2.0, 3.0
        gen = constant_generator([[0, g], [g, 0]], T)
        traj = integrate(gen, [1, 0], IntegratorSettings(method=method, steps=4096, record_stride=64))
        expected = np.stack([np.cos(g * traj.times), -1j * np.sin(g * traj.times)], axis=1)
        tol = 1e-13 if method is Method.PIECEWISE_EXPM else 1e-10
        np.testing.assert_allclose(traj.states, expected, atol=tol)

    @pytest.mark.parametrize("method", list(Method))
    def test_zero_generator(self, method):
        gen = constant_generator(np.zeros((3, 3)), 1.0)
        gen = Generator(**{**gen.__dict__, "rate_scale": 1.0})
        v0 = np.array([0.3, 1j, -2.0])
        traj = integrate(gen, v0, IntegratorSettings(method=method, steps=64))
        np.testing.assert_array_equal(traj.final, v0)

    def test_snapshot_grid(self):
        gen = constant_generator([[0, 1], [1, 0]], 2.0)
        traj = propagate(gen, [1, 0], IntegratorSettings(steps=1000, record_stride=10))
        assert traj.states.shape == (1000 // 10 + 1, 2)
        assert traj.times[-1] == 2.0
        assert traj.steps == 1000

    def test_stride_rounds_steps_up(self):
        gen = constant_generator([[0, 1], [1, 0]], 2.0)
        traj = propagate(gen, [1, 0], IntegratorSettings(steps=1001, record_stride=10))
        assert traj.steps == 1010 and traj.times[-1] == pytest.approx(2.0, rel=1e-15)

    def test_dimension_mismatch(self):
        gen = constant_generator([[0, 1], [1, 0]], 1.0)
        with pytest.raises(ValueError, match="dimension"):
            propagate(gen, [1, 0, 0])
        with pytest.raises(ValueError, match="dimension"):
            expm_propagate(gen, [1])

    def test_non_finite_input(self):
        gen = constant_generator([[0, 1], [1, 0]], 1.0)
        with pytest.raises(ValueError, match="finite"):
            propagate(gen, [np.nan, 0])

    def test_unstable_step_detected(self):
        gen = constant_generator([[-1e9j, 0], [0, 0]], 1.0)
        gen = Generator(**{**gen.__dict__, "rate_scale": 1.0})
        with pytest.raises(IntegrationError):
            propagate(gen, [1, 0], IntegratorSettings(steps=16))

    def test_finite_blowup_detected(self):
        # lossless but 60 rad per step: RK4 amplifies without ever overflowing
        gen = constant_generator([[0, 1e3], [1e3, 0]], 1.0)
        gen = Generator(**{**gen.__dict__, "rate_scale": 1.0})
        with pytest.raises(IntegrationError, match="norm grew"):
            propagate(gen, [1, 0], IntegratorSettings(steps=16))


class TestPulsedDynamics:
    def test_adiabatic_limit(self):
        traj = propagate(lossless_ap(), unit(3))
        assert abs(traj.final[-1]) ** 2 >= 0.99

    @pytest.mark.parametrize(
        "gen",
        [
            lossless_ap(),
            lossless_ap(1.0, protocol=Protocol.STAP_CD),
            lossless_ap(2.0, protocol=Protocol.STAP_MOD),
            lossless_ap(20.0, n_pairs=1),
        ],
        ids=["AP", "STAP_CD", "STAP_MOD", "N1"],
    )
    def test_oracle_agreement(self, gen):
        rk4 = propagate(gen, unit(gen.dim))
        ref = expm_propagate(gen, unit(gen.dim), oracle_settings(gen))
        assert np.max(np.abs(rk4.final - ref.final)) <= 1e-7

    def test_norm_conservation(self):
        for gen in (lossless_ap(), lossless_ap(1.0, protocol=Protocol.STAP_CD), lossless_ap(20.0, n_pairs=1)):
            traj = propagate(gen, unit(gen.dim))
            assert np.max(np.abs(traj.norms**2 - 1.0)) <= 1e-8

    def test_lossy_contraction(self):
        lam = TWO_PI * 10e6
        p = PulseParams(lam, 250e-9, 250e-9 / 8)
        c = SystemConfig(gamma_fib=TWO_PI * 2e6, gamma_m=TWO_PI * 50e3)
        traj = propagate(build_generator(p, c), unit(3), IntegratorSettings(record_stride=1))
        assert np.all(np.diff(traj.norms) <= 1e-10)
        assert traj.norms[-1] < 1.0

    @given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
    @settings(max_examples=20, deadline=None)
    def test_linearity(self, alpha):
        gen = lossless_ap(2.0)
        base = propagate(gen, unit(3), IntegratorSettings(steps=4096)).final
        scaled = propagate(gen, alpha * unit(3), IntegratorSettings(steps=4096)).final
        np.testing.assert_allclose(scaled, alpha * base, rtol=1e-12, atol=1e-15 * abs(alpha))

    def test_convergence_order(self):
        gen = lossless_ap(2.0, protocol=Protocol.STAP_CD)
        finals = [
            expm_propagate(gen, unit(3), IntegratorSettings(method=Method.PIECEWISE_EXPM, steps=n)).final
            for n in (256, 512, 1024, 2048)
        ]
        diffs = [np.max(np.abs(a - b)) for a, b in zip(finals, finals[1:])]
        orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
        assert np.all(orders >= 1.9)

    def test_rk4_convergence_order(self):
        gen = lossless_ap(2.0, protocol=Protocol.STAP_CD)
        finals = [propagate(gen, unit(3), IntegratorSettings(steps=n)).final for n in (64, 128, 256, 512)]
        diffs = [np.max(np.abs(a - b)) for a, b in zip(finals, finals[1:])]
        orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
        assert np.all(orders >= 3.5)

    def test_bit_identical_reruns(self):
        gen = lossless_ap(20.0, n_pairs=1)
        a = propagate(gen, unit(gen.dim))
        b = propagate(gen, unit(gen.dim))
        assert np.array_equal(a.states, b.states)
