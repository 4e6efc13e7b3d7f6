import warnings

import numpy as np
import pytest

from ktula import (ChainConfig, ConfigurationError, DimensionError,
                   DivergenceError, ParameterError, TamingParams,
                   build_model, ktula_step, make_double_well, make_quadratic,
                   run_chains, ula_step)
from ktula._kernels import NOISE_BLOCK, chain_rng


def _quiet_run(config, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_chains(config, **kw)


class TestSingleSteps:
    def test_ktula_quadratic_exact(self):
        m = make_quadratic(2, 1.0)
        tp = TamingParams.for_model(m, 0.1, 0.5)
        out = ktula_step(np.array([1.0, 0.0]), m, tp, 1.0, np.zeros(2))
        assert np.array_equal(out, [0.9, 0.0])

    def test_ktula_double_well_hand_value(self):
        m = make_double_well(1)
        tp = TamingParams.for_model(m, 0.1, 0.5)
        out = ktula_step(np.array([10.0]), m, tp, 1.0, np.zeros(1))
        assert out[0] == pytest.approx(9.18852, abs=5e-6)

    def test_infinite_beta_is_tamed_descent(self):
        m = make_double_well(2)
        tp = TamingParams.for_model(m, 0.05, 0.5)
        theta = np.array([1.5, -0.5])
        xi = np.array([3.0, -2.0])
        silent = ktula_step(theta, m, tp, np.inf, xi)
        assert np.array_equal(silent, ktula_step(theta, m, tp, np.inf, np.zeros(2)))

    def test_ula_double_well_blowup_step(self):
        m = make_double_well(1)
        out = ula_step(np.array([10.0]), m, 0.1, 1.0, np.zeros(1))
        assert out[0] == pytest.approx(-89.0, abs=1e-10)

    def test_ula_quadratic(self):
        m = make_quadratic(2, 1.0)
        out = ula_step(np.array([1.0, 0.0]), m, 0.1, 1.0, np.zeros(2))
        assert np.array_equal(out, [0.9, 0.0])

    def test_ula_pure_noise_step(self):
        # at the origin the drift vanishes, leaving sqrt(2 lam / beta) * xi
        m = make_quadratic(2, 1.0)
        out = ula_step(np.zeros(2), m, 0.5, 2.0, np.array([1.0, 0.0]))
        assert out[0] == pytest.approx(np.sqrt(0.5), rel=1e-15)
        assert out[1] == 0.0

    def test_dimension_checks(self):
        m = make_double_well(2)
        tp = TamingParams.for_model(m, 0.1, 0.5)
        with pytest.raises(DimensionError):
            ktula_step(np.zeros(3), m, tp, 1.0, np.zeros(3))
        with pytest.raises(DimensionError):
            ula_step(np.zeros(2), m, 0.1, 1.0, np.zeros(1))

    def test_nonfinite_is_signal_not_crash(self):
        m = make_double_well(1)
        out = ula_step(np.array([1e200]), m, 0.1, 1.0, np.zeros(1))
        assert not np.all(np.isfinite(out))


class TestChainConfig:
    def test_validation(self):
        good = dict(potential="double_well", d=1, beta=1.0, step_size=1e-3,
                    n_steps=10, seed=0)
        ChainConfig(**good)
        for bad in (dict(beta=0.0), dict(step_size=-1.0), dict(n_steps=0),
                    dict(seed=-1), dict(eps_h=0.7), dict(thinning=0),
                    dict(burn_in=10), dict(algorithm="mala"),
                    dict(potential="banana"), dict(init="cauchy")):
            with pytest.raises(ConfigurationError):
                ChainConfig(**{**good, **bad})

    def test_init_vector_broadcast(self):
        cfg = ChainConfig(potential="double_well", d=3, beta=1.0,
                          step_size=1e-3, n_steps=10, seed=0,
                          init_value=(2.0,))
        assert np.array_equal(cfg.init_vector(), [2.0, 2.0, 2.0])
        cfg2 = ChainConfig(potential="double_well", d=2, beta=1.0,
                           step_size=1e-3, n_steps=10, seed=0,
                           init_value=(1.0, -1.0))
        assert np.array_equal(cfg2.init_vector(), [1.0, -1.0])

    def test_build_model_labels(self):
        cfg = ChainConfig(potential="quadratic", d=2, beta=1.0, step_size=1e-3,
                          n_steps=10, seed=0, quadratic_a=3.0)
        m = build_model(cfg)
        assert m.label == "quadratic" and m.constants.a == 3.0
        nn_cfg = ChainConfig(potential="neural_net", d=4, beta=1.0,
                             step_size=1e-3, n_steps=10, seed=0)
        with pytest.raises(ConfigurationError):
            build_model(nn_cfg)


class TestRunChains:
    def test_bitwise_reproducibility(self):
        cfg = ChainConfig(potential="double_well", d=2, beta=1.0,
                          step_size=1e-4, n_steps=5000, n_chains=3, seed=77,
                          burn_in=1000, thinning=10, init="gaussian")
        a = _quiet_run(cfg)
        b = _quiet_run(cfg)
        for x, y in zip(a.samples, b.samples):
            assert np.array_equal(x, y)
        assert np.array_equal(a.moment_means, b.moment_means)
        assert np.array_equal(a.final_states, b.final_states)

    def test_kept_count_contract(self):
        cfg = ChainConfig(potential="double_well", d=1, beta=1.0,
                          step_size=1e-4, n_steps=1037, n_chains=2, seed=5,
                          burn_in=100, thinning=7)
        batch = _quiet_run(cfg)
        expected = (1037 - 100) // 7
        assert all(s.shape == (expected, 1) for s in batch.samples)

    def test_matches_single_step_replay(self):
        # the kernel agrees with the public step op fed the same noise stream
        d = 2
        cfg = ChainConfig(potential="double_well", d=d, beta=2.0,
                          step_size=1e-3, n_steps=500, n_chains=1, seed=123,
                          burn_in=50, thinning=9, init="gaussian",
                          init_sigma=1.5)
        batch = _quiet_run(cfg)
        m = make_double_well(d)
        tp = TamingParams.for_model(m, cfg.step_size, cfg.eps_h)
        rng = chain_rng(cfg.seed, 0)
        theta = cfg.init_sigma * rng.standard_normal(d)
        noise = rng.standard_normal((500, d))   # 500 < one noise block
        kept = []
        sums = np.zeros(4)
        for n in range(1, 501):
            theta = ktula_step(theta, m, tp, cfg.beta, noise[n - 1])
            r2 = float(theta @ theta)
            sums += [r2, r2 ** 2, r2 ** 3, r2 ** 4]
            if n > 50 and (n - 50) % 9 == 0:
                kept.append(theta.copy())
        assert np.allclose(np.stack(kept), batch.samples[0], rtol=1e-12, atol=1e-13)
        assert np.allclose(sums / 500.0, batch.moment_means[0], rtol=1e-10)
        assert np.allclose(theta, batch.final_states[0], rtol=1e-12)

    def test_replay_across_block_boundary(self):
        n = NOISE_BLOCK + 257
        cfg = ChainConfig(potential="quadratic", d=1, beta=1.0,
                          step_size=0.05, n_steps=n, n_chains=1, seed=9,
                          thinning=1)
        batch = _quiet_run(cfg)
        m = make_quadratic(1, 1.0)
        rng = chain_rng(9, 0)
        theta = np.zeros(1)
        for block in (NOISE_BLOCK, 257):
            noise = rng.standard_normal((block, 1))
            for j in range(block):
                theta = ula_step(theta, m, 0.05, 1.0, noise[j])
        assert np.allclose(theta, batch.final_states[0], rtol=1e-12)

    def test_quadratic_tamed_equals_plain(self):
        base = dict(potential="quadratic", d=2, quadratic_a=1.0, beta=1.0,
                    step_size=0.1, n_steps=4000, n_chains=2, seed=31,
                    burn_in=500, thinning=3, init="gaussian")
        tamed = _quiet_run(ChainConfig(algorithm="ktula", **base))
        plain = _quiet_run(ChainConfig(algorithm="ula", **base))
        for x, y in zip(tamed.samples, plain.samples):
            assert np.array_equal(x, y)
        assert np.array_equal(tamed.final_states, plain.final_states)

    def test_ula_divergence_flags_and_freeze(self):
        cfg = ChainConfig(potential="double_well", d=1, beta=1.0,
                          step_size=0.1, n_steps=100, n_chains=4, seed=3,
                          init="constant", init_value=(10.0,),
                          algorithm="ula")
        with pytest.raises(DivergenceError) as err:
            _quiet_run(cfg)
        batch = err.value.batch
        assert batch.diverged.all()
        assert np.all(batch.first_divergent_step <= 5)
        assert np.all(batch.first_divergent_step >= 1)
        # moments exclude the divergent step and stay finite
        assert np.all(np.isfinite(batch.moment_means))
        assert np.all(batch.n_accumulated == batch.first_divergent_step - 1)

    def test_tamed_survives_same_setting(self):
        cfg = ChainConfig(potential="double_well", d=1, beta=1.0,
                          step_size=0.1, n_steps=20_000, n_chains=4, seed=3,
                          init="constant", init_value=(10.0,))
        batch = _quiet_run(cfg)
        assert not batch.diverged.any()
        assert batch.warnings  # step above the admissible cap is recorded

    def test_strict_mode_rejects_cap_violation(self):
        cfg = ChainConfig(potential="double_well", d=1, beta=1.0,
                          step_size=0.1, n_steps=100, n_chains=1, seed=0)
        with pytest.raises(ParameterError):
            run_chains(cfg, strict=True)

    def test_partial_divergence_returns_batch(self):
        # one chain starts far out and dies, the other survives
        cfg = ChainConfig(potential="double_well", d=1, beta=1.0,
                          step_size=0.1, n_steps=3000, n_chains=2, seed=8,
                          init="gaussian", init_sigma=40.0, algorithm="ula",
                          divergence_threshold=1e6)
        batch = _quiet_run(cfg)
        assert batch.diverged.any() and not batch.diverged.all()
        pool = batch.pooled()
        assert np.all(np.abs(pool) <= 1e6)

    def test_deterministic_part_contracts(self):
        # noise-free tamed recursion obeys the squared-norm contraction
        m = make_double_well(3)
        c = m.constants
        lam = 3e-5
        tp = TamingParams.for_model(m, lam, 0.5)
        rng = np.random.default_rng(0)
        for _ in range(20):
            theta = rng.uniform(-6, 6, size=3)
            nxt = ktula_step(theta, m, tp, np.inf, np.zeros(3))
            lhs = float(nxt @ nxt)
            rhs = (1 - c.a * lam) * float(theta @ theta) \
                + lam * (2 * c.b + 8 * c.K_h ** 2)
            assert lhs <= rhs + 1e-9

    def test_moment_bound_small_run(self):
        from ktula.bounds import BoundInputs, ConstantInit, second_moment_bound
        m = make_double_well(4)
        inputs = BoundInputs(rc=m.constants, d=4, beta=1.0, eps_h=0.5,
                             init=ConstantInit(0.0))
        bound = second_moment_bound(inputs)
        cfg = ChainConfig(potential="double_well", d=4, beta=1.0,
                          step_size=3e-5, n_steps=50_000, n_chains=8, seed=12,
                          thinning=500)
        batch = run_chains(cfg)
        assert np.all(batch.max_running_mean_sq <= bound)

    def test_dimension_mismatch_with_model(self):
        cfg = ChainConfig(potential="double_well", d=2, beta=1.0,
                          step_size=1e-4, n_steps=10, seed=0)
        with pytest.raises(DimensionError):
            run_chains(cfg, model=make_double_well(3))
