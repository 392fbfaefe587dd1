import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hinfspline.bspline import evaluate, make_basis
from hinfspline.closed_form import noncausal_inverse, optimal_cubic, optimal_value
from hinfspline.fir_lmi import FirDesignProblem, design_fir
from hinfspline.lti import RationalFilter
from hinfspline.reconstruct import (DenseSignal, SimulationConfig, butterworth_magnitude,
                                    butterworth_source, hold, nsr_bound_check,
                                    reconstruct_signal, run_pipeline, sample, spline_signal,
                                    square_wave)

CUBIC = make_basis(3)
CLSD = RationalFilter([0.0991561, -0.4599156, 1.7215190, -0.4599156, 0.0991561])


def on_grid(fun, R, n_units, t0=0.0):
    t = t0 + np.arange(n_units * R + 1) / R
    return DenseSignal(1.0 / R, fun(t), t0)


class TestDenseSignal:
    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            DenseSignal(0.0, [1.0])
        with pytest.raises(ValueError):
            DenseSignal(0.1, [1.0, np.nan])

    def test_delay_zero_fills(self):
        s = DenseSignal(0.5, [1.0, 2.0, 3.0]).delayed(1)
        assert s.samples.tolist() == [0.0, 1.0, 2.0]


class TestSample:
    def test_constant(self):
        np.testing.assert_array_equal(sample(on_grid(np.ones_like, 64, 10)), np.ones(11))

    def test_sine(self):
        xs = sample(on_grid(lambda t: np.sin(2 * np.pi * t / 8), 64, 20))
        np.testing.assert_allclose(xs, np.sin(2 * np.pi * np.arange(21) / 8), atol=1e-12)

    def test_needs_integer_start(self):
        with pytest.raises(ValueError):
            sample(DenseSignal(1 / 64, np.ones(100), 0.5))

    def test_needs_integer_oversampling(self):
        with pytest.raises(ValueError):
            sample(DenseSignal(0.3, np.ones(100)))


class TestHold:
    def test_impulse_gives_basis(self):
        R = 64
        y = hold([1.0], CUBIC, R)
        np.testing.assert_allclose(y.samples, evaluate(CUBIC, np.arange(4 * R) / R), atol=1e-15)

    @pytest.mark.parametrize("N", range(0, 6))
    def test_partition_of_unity(self, N):
        R = 32
        b = make_basis(N)
        y = hold(np.ones(30), b, R)
        interior = (y.t >= N) & (y.t <= 30)
        np.testing.assert_allclose(y.samples[interior], 1.0, atol=1e-12)

    def test_length(self):
        assert len(hold(np.ones(5), CUBIC, 32, length=10)) == 10
        assert len(hold(np.ones(5), CUBIC, 32, length=1000)) == 1000

    def test_spline_space_signal_reconstructed_by_noncausal_inverse(self):
        # the two-sided inverse is centred, so the output lags by (N+1)/2 = 2
        R = 32
        rng = np.random.default_rng(0)
        c = np.concatenate([np.zeros(20), rng.standard_normal(40), np.zeros(20)])
        x = hold(c, CUBIC, R)
        y = hold(noncausal_inverse().filter(sample(x)), CUBIC, R, len(x))
        err = x.delayed(2 * R).samples - y.samples
        interior = (x.t > 25) & (x.t < 60)
        assert np.abs(err[interior]).max() < 1e-6


class TestButterworth:
    def test_dc_settles_to_one(self):
        x = butterworth_source(SimulationConfig(square_wave_freq=0.0, duration=80, oversampling=32))
        assert np.abs(x.samples[x.t >= 60] - 1).max() < 1e-6

    def test_cutoff_magnitude(self):
        cfg = SimulationConfig()
        assert 20 * np.log10(butterworth_magnitude(cfg, 1.5)[0]) == pytest.approx(-3.01, abs=0.05)
        assert butterworth_magnitude(cfg, 0.0)[0] == pytest.approx(1.0, abs=1e-12)

    def test_square_wave_sign(self):
        cfg = SimulationConfig()
        t = np.array([1e-9, np.pi - 1e-6, np.pi + 1e-6, 2 * np.pi - 1e-6])
        assert square_wave(cfg, t).tolist() == [1.0, 1.0, -1.0, -1.0]

    def test_source_shape(self):
        cfg = SimulationConfig()
        x = butterworth_source(cfg)
        assert len(x) == round(cfg.duration * cfg.oversampling) + 1
        assert x.samples[0] == 0.0
        steady = x.samples[x.t > cfg.window_start]
        assert 1.0 < steady.max() < 1.5 and -1.5 < steady.min() < -1.0


class TestConfig:
    def test_defaults(self):
        cfg = SimulationConfig()
        assert (cfg.square_wave_freq, cfg.butterworth_order, cfg.butterworth_cutoff) == (1.0, 8, 1.5)
        assert cfg.oversampling == 256 and cfg.delay == 3

    @pytest.mark.parametrize("kw", [dict(oversampling=16), dict(duration=-1.0),
                                    dict(butterworth_cutoff=0.0), dict(delay=-1),
                                    dict(window_start=100.0), dict(butterworth_order=2.5)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SimulationConfig(**kw)

    def test_load(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"duration": 30.0, "oversampling": 64}))
        cfg = SimulationConfig.load(tmp_path / "c.json")
        assert cfg.duration == 30.0 and cfg.oversampling == 64

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown"):
            SimulationConfig.from_dict({"durration": 3})


class TestPipeline:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(-2, 2))
    def test_linear(self, seed, a, b):
        rng = np.random.default_rng(seed)
        R = 32
        x1 = DenseSignal(1 / R, rng.standard_normal(20 * R + 1))
        x2 = DenseSignal(1 / R, rng.standard_normal(20 * R + 1))
        mix = DenseSignal(1 / R, a * x1.samples + b * x2.samples)
        psi = optimal_cubic(3)
        e = [reconstruct_signal(s, psi, CUBIC, 3).error.samples for s in (x1, x2, mix)]
        np.testing.assert_allclose(e[2], a * e[0] + b * e[1], atol=1e-10)

    def test_metrics_and_csv(self, tmp_path):
        res = run_pipeline(SimulationConfig(duration=20.0, window_start=5.0, oversampling=32),
                           optimal_cubic(3), CUBIC)
        m = res.metrics
        assert m["nsr"] == pytest.approx(m["l2_error"] / m["l2_signal"])
        assert m["total_delay"] == 4
        res.to_csv(tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "t,x,x_delayed,y,e"
        assert len(lines) == len(res.x) + 1

    def test_fine_step_convergence(self):
        psi = optimal_cubic(3)
        e1 = run_pipeline(SimulationConfig(oversampling=256), psi, CUBIC).metrics["l2_error"]
        e2 = run_pipeline(SimulationConfig(oversampling=512), psi, CUBIC).metrics["l2_error"]
        assert abs(e2 - e1) / e2 < 5e-3

    def test_error_ordering(self):
        cfg = SimulationConfig()
        wfir = design_fir(FirDesignProblem(3, 5, 3, weight=RationalFilter([0.5, 0.5]))).psi
        e = [run_pipeline(cfg, psi, CUBIC).metrics["l2_error"]
             for psi in (wfir, optimal_cubic(3), CLSD)]
        assert e[0] < e[1] < e[2]


class TestNsrBound:
    def test_closed_form_delay_three(self):
        rep = nsr_bound_check(CUBIC, optimal_cubic(3), 3, trials=100)
        assert rep.passed
        assert rep.worst_nsr <= rep.bound
        assert rep.J == pytest.approx(optimal_value(3), rel=1e-7)
        assert rep.worst_ratio <= rep.lam

    def test_exact_inverse_has_zero_error(self):
        rep = nsr_bound_check(make_basis(0), RationalFilter.delay(2), 2, trials=5)
        assert rep.worst_nsr == 0.0 and rep.passed

    def test_longer_delay_shrinks_error(self):
        r3 = nsr_bound_check(CUBIC, optimal_cubic(3), 3, trials=20)
        r8 = nsr_bound_check(CUBIC, optimal_cubic(8), 8, trials=20)
        assert r8.worst_nsr < r3.worst_nsr

    def test_fir_design(self):
        psi = design_fir(FirDesignProblem(3, 5, 3)).psi
        assert nsr_bound_check(CUBIC, psi, 3, trials=20).passed

    def test_needs_a_trial(self):
        with pytest.raises(ValueError):
            nsr_bound_check(CUBIC, optimal_cubic(3), 3, trials=0)

    def test_spline_signal_padding(self):
        x = spline_signal(np.ones(3), CUBIC, 16, pad=2)
        assert np.all(x.samples[: 2 * 16 + 1] == 0)
