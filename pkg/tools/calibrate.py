"""Seed searches behind the frozen constants in tests/test_acceptance.py.

Two searches live here so the committed numbers stay reproducible:

1. Headline phenomenon: a quadratic population whose sampled dataset
   (n = 110) has both the linear and square coefficients non-significant
   (p > 0.05) while the inverted-U bootstrap confidence at b = 1000 sits
   comfortably inside (0.5, 0.95).
   Winner: noise_sd=120, data_seed=10, boot_seed=20260808
           -> p_linear=0.675, p_square=0.251, confidence=0.635.

2. Coverage study: a population and committed seed where 200-rep empirical
   coverage of the true curvature is central in [0.92, 0.98] for both the
   classical and percentile methods (true coverage ~0.947 at n = 500 over
   600 independent reps).
   Winner: n=500, noise_sd=30, seed=5 -> classical 0.94, percentile 0.95.

Run:  python3 tools/calibrate.py
"""

from __future__ import annotations

import sys

from shapeboot import ResamplePlan, build_design, coef_p_value, fit_design, inverted_u, run
from shapeboot.synth import SynthPopulation, coverage_study, synth_generate

BOOT_SEED = 20260808
B = 1000


def phenomenon_candidate(noise_sd: float, data_seed: int):
    pop = SynthPopulation(
        n=110, beta0=100.0, beta1=10.0, beta2=-0.5, noise_sd=noise_sd, x_lo=0.0, x_hi=30.0
    )
    ds = synth_generate(pop, seed=data_seed)
    spec = pop.model_spec()
    full = fit_design(build_design(ds, spec))
    p_linear = coef_p_value(full, 1)
    p_square = coef_p_value(full, 2)
    if p_linear <= 0.05 or p_square <= 0.05:
        return None
    result = run(ds, spec, ResamplePlan(b=B, seed=BOOT_SEED), (inverted_u(),))
    confidence = result.hypothesis_true_counts()[0] / B
    return p_linear, p_square, confidence


def search_phenomenon():
    for noise_sd in (90.0, 120.0):
        for data_seed in range(40):
            found = phenomenon_candidate(noise_sd, data_seed)
            if found is None:
                continue
            p_linear, p_square, confidence = found
            if 0.60 <= confidence <= 0.88:
                print(
                    f"phenomenon: noise_sd={noise_sd} data_seed={data_seed} "
                    f"boot_seed={BOOT_SEED} p_linear={p_linear:.4f} "
                    f"p_square={p_square:.4f} confidence={confidence:.3f}"
                )


def search_coverage():
    pop = SynthPopulation(
        n=500, beta0=100.0, beta1=10.0, beta2=-0.5, noise_sd=30.0, x_lo=0.0, x_hi=30.0
    )
    for seed in (5, 8, 13, 21, 55, 89):
        out = coverage_study(pop, reps=200, level=0.95, b=500, seed=seed)
        print(
            f"coverage: seed={seed} classical={out['classical']['coverage']} "
            f"percentile={out['percentile']['coverage']}"
        )


def main():
    search_phenomenon()
    search_coverage()
    return 0


if __name__ == "__main__":
    sys.exit(main())
