import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapeboot.bootstrap import (
    ResampleDegeneracyError,
    ResamplePlan,
    derive_stream,
    draw_indices,
    fit_replicate,
    percentile,
    percentile_ci,
    run,
    stream_key,
    width_ratio,
)
from shapeboot.dataset import Dataset, IndexView
from shapeboot.hypotheses import default_hypotheses, inverted_u
from shapeboot.ols import ModelSpec, build_design, fit_design

from oracles import percentile_rank_interpolation


class TestStreams:
    def test_same_inputs_same_stream(self):
        a = derive_stream(99, 3).uniform(size=1000)
        b = derive_stream(99, 3).uniform(size=1000)
        assert np.array_equal(a, b)

    def test_splitmix_keys(self):
        # frozen splitmix64 outputs; a change here breaks every seeded result
        assert stream_key(1, 0) == 10451216379200822465
        assert stream_key(1, 1) == 13757245211066428519
        assert stream_key(2, 0) == 10905525725756348110

    def test_replicates_get_distinct_streams(self):
        first = draw_indices(derive_stream(1, 0), 8)
        second = draw_indices(derive_stream(1, 1), 8)
        assert first.tolist() == [7, 5, 2, 1, 6, 1, 2, 1]
        assert second.tolist() == [0, 5, 4, 0, 3, 4, 0, 6]

    def test_seed_changes_replicate_zero(self):
        assert draw_indices(derive_stream(2, 0), 8).tolist() == [5, 2, 6, 2, 2, 1, 2, 5]

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            ResamplePlan(b=0)
        with pytest.raises(ValueError):
            ResamplePlan(b=10, seed=-1)
        with pytest.raises(ValueError):
            ResamplePlan(b=10, seed=1 << 64)

    def test_worker_env_override(self, monkeypatch):
        from shapeboot.bootstrap import WORKERS_ENV, default_workers

        monkeypatch.delenv(WORKERS_ENV, raising=False)
        assert default_workers() == 1
        monkeypatch.setenv(WORKERS_ENV, "6")
        assert default_workers() == 6


class TestDrawIndices:
    def test_single_row_sample(self):
        assert draw_indices(derive_stream(0, 0), 1).tolist() == [0]

    def test_indices_in_range(self):
        idx = draw_indices(derive_stream(3, 5), 500)
        assert idx.shape == (500,)
        assert idx.min() >= 0
        assert idx.max() < 500

    def test_distinct_fraction_matches_closed_form(self):
        n, b = 110, 400
        expected = 1.0 - (1.0 - 1.0 / n) ** n
        fractions = [
            len(set(draw_indices(derive_stream(17, i), n).tolist())) / n for i in range(b)
        ]
        assert abs(np.mean(fractions) - expected) < 0.01


class TestRun:
    def test_shapes_and_counts(self, demo_ds, demo_population):
        spec = demo_population.model_spec()
        result = run(demo_ds, spec, ResamplePlan(b=100, seed=1), default_hypotheses())
        assert result.coefficients.shape == (100, spec.p)
        assert result.predicate_outcomes.shape == (100, 5)
        assert result.degenerate_redraws == 0

    def test_rerun_is_identical(self, demo_ds, demo_population):
        spec = demo_population.model_spec()
        plan = ResamplePlan(b=60, seed=9)
        a = run(demo_ds, spec, plan, default_hypotheses())
        b = run(demo_ds, spec, plan, default_hypotheses())
        assert np.array_equal(a.coefficients, b.coefficients)
        assert np.array_equal(a.predicate_outcomes, b.predicate_outcomes)
        assert a.degenerate_redraws == b.degenerate_redraws

    def test_parallel_equals_serial(self, demo_ds, demo_population):
        spec = demo_population.model_spec()
        plan = ResamplePlan(b=80, seed=4)
        serial = run(demo_ds, spec, plan, default_hypotheses(), workers=1)
        parallel = run(demo_ds, spec, plan, default_hypotheses(), workers=4)
        assert np.array_equal(serial.coefficients, parallel.coefficients)
        assert np.array_equal(serial.predicate_outcomes, parallel.predicate_outcomes)
        assert serial.degenerate_redraws == parallel.degenerate_redraws

    def test_rows_recompute_standalone(self, demo_ds, demo_population):
        spec = demo_population.model_spec()
        plan = ResamplePlan(b=12, seed=21)
        result = run(demo_ds, spec, plan)
        for i in (0, 5, 11):
            standalone = fit_replicate(demo_ds, spec, plan, i)
            assert np.array_equal(result.coefficients[i], standalone.coefficients)
            # and through the public per-piece recipe
            idx = draw_indices(derive_stream(plan.seed, i), demo_ds.n_rows)
            view_fit = fit_design(build_design(IndexView(demo_ds, idx), spec))
            assert np.array_equal(result.coefficients[i], view_fit.coefficients)

    def test_strong_signal_confidence_with_independent_second_run(
        self, demo_ds, demo_population
    ):
        spec = demo_population.model_spec()
        for seed in (101, 202):  # two independent experiments agree
            result = run(demo_ds, spec, ResamplePlan(b=1000, seed=seed), (inverted_u(),))
            assert result.hypothesis_true_counts()[0] / 1000 > 0.99

    def test_degenerate_resamples_redraw_and_count(self):
        # the indicator control dies whenever row 0 is not drawn (~34% of resamples)
        n = 8
        rng = np.random.default_rng(0)
        ds = Dataset.from_columns(
            {
                "x": rng.uniform(1, 5, n),
                "flag": np.eye(n)[0],
                "y": rng.normal(0, 1, n),
            }
        )
        spec = ModelSpec("y", "x", 1, ("flag",))
        plan = ResamplePlan(b=100, seed=6)
        result = run(ds, spec, plan)
        assert result.degenerate_redraws > 0
        assert result.coefficients.shape == (100, 3)
        assert np.all(np.isfinite(result.coefficients))
        again = run(ds, spec, plan)
        assert np.array_equal(result.coefficients, again.coefficients)
        assert result.degenerate_redraws == again.degenerate_redraws

    def test_hopeless_sample_aborts(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 10, 12)
        ds = Dataset.from_columns({"x": x, "dup": 3.0 * x, "y": rng.normal(0, 1, 12)})
        spec = ModelSpec("y", "x", 1, ("dup",))
        from shapeboot.ols import DegenerateDesign

        with pytest.raises(DegenerateDesign):
            run(ds, spec, ResamplePlan(b=5, seed=0, max_redraws_per_replicate=3))

    def test_replicate_redraw_budget_aborts(self):
        # full sample is fine (row 2 breaks the tie) but most resamples are not
        ds = Dataset.from_columns(
            {
                "x": [1.0, 2.0, 4.0, 8.0, 16.0],
                "tied": [2.0, 4.0, 7.0, 16.0, 32.0],
                "y": [1.0, 2.0, 3.0, 4.0, 5.0],
            }
        )
        spec = ModelSpec("y", "x", 1, ("tied",))
        build_design(ds, spec)  # sanity: the full sample itself fits
        with pytest.raises(ResampleDegeneracyError, match="too degenerate"):
            run(ds, spec, ResamplePlan(b=50, seed=3, max_redraws_per_replicate=0))


class TestPercentile:
    def test_pinned_rule_on_1_to_1000(self):
        values = np.arange(1.0, 1001.0)
        assert percentile(values, 0.025) == 25.975

    def test_median_of_three(self):
        assert percentile([3.0, 1.0, 2.0], 0.5) == 2.0

    def test_extremes(self):
        values = [4.0, -2.0, 9.0]
        assert percentile(values, 0.0) == -2.0
        assert percentile(values, 1.0) == 9.0

    def test_matches_independent_implementation_exactly(self):
        rng = np.random.default_rng(23)
        values = rng.normal(0, 100, size=97)
        for q in rng.uniform(0, 1, size=200):
            assert percentile(values, float(q)) == percentile_rank_interpolation(
                values, float(q)
            )

    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60),
        st.floats(0.0, 1.0),
        st.floats(0.0, 1.0),
    )
    def test_monotone_in_q(self, values, q1, q2):
        lo, hi = sorted((q1, q2))
        assert percentile(values, lo) <= percentile(values, hi)

    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40),
        st.floats(0.0, 1.0),
        st.floats(0.01, 50.0),
        st.floats(-100.0, 100.0),
    )
    @settings(max_examples=60)
    def test_affine_equivariance(self, values, q, a, c):
        arr = np.asarray(values)
        got = percentile(a * arr + c, q)
        want = a * percentile(arr, q) + c
        assert got == pytest.approx(want, rel=1e-9, abs=1e-9)

    def test_errors(self):
        with pytest.raises(ValueError):
            percentile([], 0.5)
        with pytest.raises(ValueError):
            percentile([1.0], 1.5)


class TestPercentileCi:
    def test_95_on_1_to_1000(self):
        # (1 - 0.95) / 2 is 0.025 only up to binary rounding, hence the 1e-9
        values = np.arange(1.0, 1001.0)
        lo, hi = percentile_ci(values, 0.95)
        assert lo == pytest.approx(25.975, abs=1e-9)
        assert hi == pytest.approx(975.025, abs=1e-9)

    def test_constant_vector_zero_width(self):
        lo, hi = percentile_ci([7.0] * 50, 0.95)
        assert lo == hi == 7.0

    def test_widths_nested_in_level(self):
        rng = np.random.default_rng(31)
        values = rng.normal(0, 1, 200)
        widths = []
        for level in (0.5, 0.8, 0.9, 0.95, 0.99):
            lo, hi = percentile_ci(values, level)
            widths.append(hi - lo)
        assert all(a <= b for a, b in zip(widths, widths[1:]))

    def test_contains_median_at_half_or_more(self):
        rng = np.random.default_rng(37)
        values = rng.standard_normal(101)
        med = percentile(values, 0.5)
        for level in (0.5, 0.7, 0.95):
            lo, hi = percentile_ci(values, level)
            assert lo <= med <= hi

    def test_needs_two_values(self):
        with pytest.raises(ValueError, match="two values"):
            percentile_ci([1.0], 0.95)


class TestWidthRatio:
    def test_quadratic_curvature_intervals(self):
        assert width_ratio((-301.0, 75.0), (-230.0, 57.0)) == pytest.approx(1.310, abs=0.005)

    def test_linear_slope_intervals(self):
        assert width_ratio((-3147.0, -704.0), (-3060.0, -495.0)) == pytest.approx(
            0.952, abs=0.005
        )

    def test_identical_intervals(self):
        assert width_ratio((1.0, 3.0), (1.0, 3.0)) == 1.0

    def test_zero_width_denominator(self):
        with pytest.raises(ValueError, match="denominator"):
            width_ratio((0.0, 1.0), (2.0, 2.0))
