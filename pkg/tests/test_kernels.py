"""Compiled-vs-fallback backend contract: identical noise streams, matching
samples over short horizons, matching divergence semantics, and the
benchmark harness."""

import os
import warnings

import numpy as np
import pytest

from ktula import ChainConfig, have_compiled, run_chains
from ktula._kernels import NOISE_BLOCK, backend_name, chain_rng
from ktula.benchmark import run_benchmark

needs_ext = pytest.mark.skipif(not have_compiled(),
                               reason="extension not built")


def _run_on(config, fallback: bool):
    old = os.environ.get("KTULA_FORCE_FALLBACK")
    os.environ["KTULA_FORCE_FALLBACK"] = "1" if fallback else "0"
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return run_chains(config)
    finally:
        if old is None:
            os.environ.pop("KTULA_FORCE_FALLBACK", None)
        else:
            os.environ["KTULA_FORCE_FALLBACK"] = old


class TestBackendSelection:
    def test_name_is_known(self):
        assert backend_name() in ("compiled", "fallback")

    @needs_ext
    def test_env_forces_fallback(self):
        old = os.environ.get("KTULA_FORCE_FALLBACK")
        os.environ["KTULA_FORCE_FALLBACK"] = "1"
        try:
            assert backend_name() == "fallback"
        finally:
            if old is None:
                os.environ.pop("KTULA_FORCE_FALLBACK", None)
            else:
                os.environ["KTULA_FORCE_FALLBACK"] = old

    def test_chain_rng_streams_are_keyed(self):
        a = chain_rng(7, 0).standard_normal(4)
        b = chain_rng(7, 1).standard_normal(4)
        c = chain_rng(7, 0).standard_normal(4)
        assert np.array_equal(a, c)
        assert not np.array_equal(a, b)


@needs_ext
class TestBackendEquivalence:
    @pytest.mark.parametrize("potential,d,algorithm", [
        ("double_well", 1, "ktula"),
        ("double_well", 3, "ktula"),
        ("double_well", 1, "ula"),
        ("quadratic", 2, "ktula"),
        ("quadratic", 2, "ula"),
    ])
    def test_short_horizon_agreement(self, potential, d, algorithm):
        cfg = ChainConfig(potential=potential, d=d, beta=2.0, step_size=1e-4,
                          n_steps=2000, n_chains=3, seed=17, thinning=1,
                          init="gaussian", algorithm=algorithm)
        compiled = _run_on(cfg, fallback=False)
        fell_back = _run_on(cfg, fallback=True)
        for x, y in zip(compiled.samples, fell_back.samples):
            assert np.allclose(x, y, rtol=1e-9, atol=1e-12)
        assert np.allclose(compiled.moment_means, fell_back.moment_means,
                           rtol=1e-9)

    def test_agreement_across_block_boundary(self):
        cfg = ChainConfig(potential="double_well", d=2, beta=1.0,
                          step_size=1e-4, n_steps=NOISE_BLOCK + 100,
                          n_chains=2, seed=23, thinning=1, init="gaussian")
        compiled = _run_on(cfg, fallback=False)
        fell_back = _run_on(cfg, fallback=True)
        for x, y in zip(compiled.samples, fell_back.samples):
            assert np.allclose(x, y, rtol=1e-8, atol=1e-11)

    def test_divergence_step_agrees(self):
        cfg = ChainConfig(potential="double_well", d=1, beta=1.0,
                          step_size=0.1, n_steps=50, n_chains=8, seed=3,
                          init="constant", init_value=(10.0,),
                          algorithm="ula", divergence_threshold=1e10)
        from ktula.errors import DivergenceError
        steps = {}
        for fallback in (False, True):
            try:
                batch = _run_on(cfg, fallback=fallback)
            except DivergenceError as err:
                batch = err.batch
            steps[fallback] = batch.first_divergent_step.copy()
        assert np.array_equal(steps[False], steps[True])

    def test_long_run_distributional_agreement(self):
        cfg = ChainConfig(potential="double_well", d=1, beta=1.0,
                          step_size=1e-4, n_steps=200_000, n_chains=2,
                          seed=29, burn_in=100_000, thinning=10,
                          init="gaussian")
        compiled = _run_on(cfg, fallback=False)
        fell_back = _run_on(cfg, fallback=True)
        m_a = float(np.mean(compiled.pooled() ** 2))
        m_b = float(np.mean(fell_back.pooled() ** 2))
        assert m_a == pytest.approx(m_b, rel=0.05)


@needs_ext
class TestThreadCap:
    def test_results_independent_of_worker_count(self):
        cfg = ChainConfig(potential="double_well", d=2, beta=1.0,
                          step_size=1e-5, n_steps=20_000, n_chains=6,
                          seed=37, thinning=100, init="gaussian")
        results = {}
        old = os.environ.get("KTULA_THREADS")
        try:
            for workers in ("1", "4"):
                os.environ["KTULA_THREADS"] = workers
                results[workers] = run_chains(cfg)
        finally:
            if old is None:
                os.environ.pop("KTULA_THREADS", None)
            else:
                os.environ["KTULA_THREADS"] = old
        for x, y in zip(results["1"].samples, results["4"].samples):
            assert np.array_equal(x, y)


class TestBenchmark:
    def test_smoke(self):
        out = run_benchmark(n_steps=2000, d=2, n_chains=2, quiet=True)
        assert out["fallback_steps_per_s"] > 0
        if out["compiled_available"]:
            assert out["compiled_steps_per_s"] > 0
            assert out["max_abs_gap_512_steps"] < 1e-9
