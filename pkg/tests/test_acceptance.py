"""Acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary.  Bounds from every run are pooled and checked by the last test.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from stochbgk.cli import default_spec
from stochbgk.harness import experiments as ex
from stochbgk.harness.config import ExperimentSpec
from stochbgk.reference import exact_square_wave_burgers, lp_error
from stochbgk.solver import BGKSolver

pytestmark = pytest.mark.slow

VERDICTS: list[str] = []
BOUNDS: dict[str, float] = {}


def verdict(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    VERDICTS.append(line)
    assert ok, line


def values(outcome: ex.Outcome) -> dict:
    return {r["assertion"]: r for r in outcome.assertions.records()}


def pool_bounds(label: str, outcome: ex.Outcome) -> None:
    a = values(outcome)
    if "bounds" in a:
        BOUNDS[label] = a["bounds"]["value"]


@pytest.fixture(scope="module")
def shock_sweep():
    out = ex.run_epsilon_sweep(default_spec("sweep"))
    pool_bounds("shock_sweep", out)
    return out


@pytest.fixture(scope="module")
def flow():
    return ex.run_flow_tests(default_spec("flow-test"))


def test_hydrodynamic_limit():
    cfg = default_spec("run").base
    start = time.perf_counter()
    res = BGKSolver(cfg).run(ex.base_path(cfg))
    runtime = time.perf_counter() - start
    BOUNDS["hydrodynamic_limit"] = float(np.max(res.diagnostics.column("bound_violation")))
    err = lp_error(res.snapshots[-1], exact_square_wave_burgers(res.final.grid.x_centers, cfg.t_end), 1)
    verdict("hydrodynamic_limit", err <= 0.02 and runtime <= 60.0,
            f"L1={err:.4g} (<= 0.02), runtime={runtime:.1f}s (<= 60s)")


def test_measure_positivity_and_uniformity(shock_sweep):
    a = values(shock_sweep)
    mmin = a["measure_nonnegative"]["value"]
    spread = a["measure_total_within_factor_2"]["value"]
    done = a["all_runs_completed"]["passed"]
    verdict("measure_positivity_uniformity", done and mmin >= -1e-12 and spread <= 2.0,
            f"min cell={mmin:.3g} (>= -1e-12), total mass spread={spread:.4g} (<= 2)")


def test_drift_cancellation(flow):
    r = values(flow)["drift_cancellation"]
    verdict("drift_cancellation", r["passed"], f"max residual={r['value']:.3g} (<= 1e-12)")


def test_indicator_invariance():
    out = ex.indicator_invariance()
    a = values(out)
    dev, ratio = a["deviation_at_base"]["value"], a["refinement_ratio"]["value"]
    verdict("indicator_invariance", a["deviation_at_base"]["passed"] and a["refinement_ratio"]["passed"],
            f"deviation={dev:.4g} (<= 2e-3), refinement ratio={ratio:.4g} (<= 0.7)")


def test_l2_transport_preservation():
    spec = default_spec("mc")
    out = ex.run_monte_carlo(spec, threads=4)
    pool_bounds("l2_ensemble", out)
    a = values(out)
    r = a["l2_preserved"]
    verdict("l2_transport_preservation", r["passed"] and a["replica_failures"]["passed"],
            f"|mean - initial|={r['value']:.4g} (<= {r['threshold']:.4g}), M={spec.replicas}")


def test_mass_martingale():
    spec = default_spec("mc")
    noisy = ex.run_monte_carlo(replace(spec, base=replace(spec.base, eps=0.05)), threads=4)
    quiet = ex.run_monte_carlo(replace(spec, replicas=2, base=replace(spec.base, eps=0.05, noise="zero",
                                                                      noise_params={})))
    pool_bounds("mass_ensemble", noisy)
    pool_bounds("mass_noise_free", quiet)
    m, q = values(noisy)["mass_martingale"], values(quiet)["mass_conserved"]
    verdict("mass_martingale", m["passed"] and q["passed"],
            f"|mean drift|={m['value']:.3g} (<= 3SE={m['threshold']:.3g}), sigma=0 drift={q['value']:.3g} (<= 1e-10)")


def test_flow_properties(flow):
    a = values(flow)
    comp = a["composition_exact"]
    rn, rz = a["round_trip_order_noise"], a["round_trip_order_zero_noise"]
    mom = a["moment_within_3x_analytic"]
    ok = all(r["passed"] for r in (comp, rn, rz, mom))
    verdict("flow_properties", ok,
            f"composition diff={comp['value']:.3g} (== 0), round-trip order noise={rn['value']:.3g} (>= 0.5), "
            f"zero noise={rz['value']:.3g} (>= 1), moment ratio={mom['value']:.3g} (<= 3)")


def test_ito_stratonovich_cross_validation(flow):
    r = values(flow)["ito_strat_ratio_per_halving"]
    verdict("ito_stratonovich", r["passed"], f"min ratio per halving={r['value']:.4g} (>= 1.3)")


def test_picard_oracle():
    out = ex.run_picard_check(default_spec("picard"))
    pool_bounds("picard", out)
    a = values(out)
    g, c = a["sup_gap_within_5dt"], a["contraction_ratio"]
    verdict("picard_oracle", a["picard_converged"]["passed"] and g["passed"] and c["passed"],
            f"sup L1 gap={g['value']:.4g} (<= {g['threshold']:.4g}), "
            f"contraction={c['value']:.4g} (<= {c['threshold']:.4g})")


def test_stochastic_eps_convergence():
    dt = 0.5 / 256
    base = replace(default_spec("sweep").base, nx=256, noise="nula", noise_params={"sigma": 0.1},
                   eps=dt, dt=dt, seed=7)
    spec = ExperimentSpec(base, axis="eps", ladder=["8dt", "4dt", "2dt", "1dt"], target="fv_reference")
    out = ex.run_epsilon_sweep(spec)
    pool_bounds("stochastic_sweep", out)
    a = values(out)
    mono, fv = a["distance_nonincreasing"], a["smallest_eps_within_2x_fv_self_error"]
    verdict("stochastic_eps_convergence", a["all_runs_completed"]["passed"] and mono["passed"] and fv["passed"],
            f"worst successive ratio={mono['value']:.4g} (<= 1.1), smallest-eps/FV self error={fv['value']:.4g} (<= 2)")


def test_weak_form_residual():
    out = ex.run_residual_study(default_spec("residual"))
    pool_bounds("weak_residual", out)
    a = values(out)
    bal, order = a["measure_term_balances"], a["residual_order"]
    verdict("weak_form_residual", bal["passed"] and order["passed"],
            f"with/without measure={bal['value']:.3g} (<= 0.25), order={order['value']:.3g} (>= 0.8)")


def test_bounds_in_every_run():
    if not BOUNDS:
        cfg = default_spec("run").base
        res = BGKSolver(cfg).run(ex.base_path(cfg))
        BOUNDS["hydrodynamic_limit"] = float(np.max(res.diagnostics.column("bound_violation")))
    label, worst = max(BOUNDS.items(), key=lambda kv: kv[1])
    verdict("bounds", math.isfinite(worst) and worst <= 1e-12,
            f"max overshoot={worst:.3g} (<= 1e-12) over {len(BOUNDS)} runs, worst in {label}")
