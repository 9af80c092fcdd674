"""
Aggregate summaries and console reports for experiment results
"""

import numpy as np
import pandas as pd

from experiment_config import COVERAGE, ESTIMATOR, INFOGAIN, REGRET
from experiments import (
    BOUND_FAMILIES, KL, SUBGAUSSIAN_CLIPPED, RUN_COLUMNS, regret_checkpoints,
)

BANNER_WIDTH = 80


def banner(title, width=BANNER_WIDTH):
    return f"\n{'=' * width}\n{title}\n{'=' * width}"


def regret_overview(summary):
    """
    Mean and spread of cumulative regret per (policy, checkpoint)

    Args:
        summary: regret summary table (one row per policy, seed, checkpoint)

    Returns:
        DataFrame with runs, mean/std of R_t, mean R_t/t and R_t/log t
    """
    grouped = summary.groupby(['policy', 't'], sort=False)
    overview = grouped.agg(
        runs=('seed', 'count'),
        mean_regret=('cumulative_regret', 'mean'),
        std_regret=('cumulative_regret', 'std'),
        regret_per_round=('regret_per_round', 'mean'),
        regret_per_log_t=('regret_per_log_t', 'mean'),
        kl_regret_constant=('kl_regret_constant', 'first'),
    ).reset_index()
    return overview


def regret_summary_from_records(frame):
    """
    Rebuild a regret overview from a stored record CSV

    Only checkpoints that were actually recorded can be reported.
    """
    missing = [column for column in RUN_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"Not a regret record table; missing columns {missing}")
    checkpoints = regret_checkpoints(int(frame['t'].max()))
    rows = frame[frame['t'].isin(checkpoints)]
    overview = rows.groupby(['policy', 't'], sort=False).agg(
        runs=('seed', 'count'),
        mean_regret=('cumulative_regret', 'mean'),
        std_regret=('cumulative_regret', 'std'),
    ).reset_index()
    overview['regret_per_round'] = overview['mean_regret'] / overview['t']
    log_t = np.log(overview['t'].where(overview['t'] > 1))
    overview['regret_per_log_t'] = overview['mean_regret'] / log_t
    return overview


def coverage_overview(summary, arm_violations):
    """
    Violation rates per bound family with binomial standard errors

    run_violation_rate is the fraction of runs with any (t, x) outside the
    interval; worst_arm_rate is the largest, over fixed arms, fraction of runs
    violated at that arm at some t.
    """
    rows = []
    for family in BOUND_FAMILIES:
        part = summary[summary['family'] == family]
        if part.empty:
            continue
        runs = len(part)
        run_rate = float(part['run_violation'].mean())
        per_arm = np.asarray(arm_violations[family], dtype=float).mean(axis=0)
        rows.append({
            'family': family,
            'runs': runs,
            'run_violation_rate': run_rate,
            'run_violation_se': float(np.sqrt(run_rate * (1.0 - run_rate) / runs)),
            'worst_arm_rate': float(per_arm.max()),
            'mean_arms_violated': float(part['arms_violated'].mean()),
            'upper_violation_rate': float(part['upper_violation'].mean()),
        })
    return pd.DataFrame(rows)


def width_comparison(frame, min_pulls=10):
    """
    Fraction of (seed, t, arm) records with at least min_pulls samples where
    the KL interval is no wider than the clipped subgaussian one

    Returns:
        (fraction, number of compared records); fraction is NaN when nothing
        qualifies
    """
    keys = ['seed', 't', 'arm']
    kl = frame[frame['family'] == KL][keys + ['width', 'pulls']]
    clipped = frame[frame['family'] == SUBGAUSSIAN_CLIPPED][keys + ['width']]
    paired = kl.merge(clipped, on=keys, suffixes=('_kl', '_clipped'))
    paired = paired[paired['pulls'] >= min_pulls]
    if paired.empty:
        return float('nan'), 0
    return float((paired['width_kl'] <= paired['width_clipped']).mean()), len(paired)


def info_gain_overview(summary):
    return pd.DataFrame([{
        'seeds': len(summary),
        'horizon': int(summary['horizon'].iloc[0]),
        'greedy_gamma': float(summary['greedy_gamma'].iloc[0]),
        'mean_observed_gain': float(summary['observed_gain'].mean()),
        'runs_with_inversions': int((summary['inversions'] > 0).sum()),
    }])


def estimator_overview(summary):
    return pd.DataFrame([{
        'seeds': len(summary),
        'gp_exit_runs': int((summary['gp_exit_rounds'] > 0).sum()),
        'beta_exit_runs': int((summary['beta_exit_rounds'] > 0).sum()),
        'gp_min': float(summary['gp_min'].min()),
        'gp_max': float(summary['gp_max'].max()),
        'beta_min': float(summary['beta_min'].min()),
        'beta_max': float(summary['beta_max'].max()),
    }])


def print_report(config, result, out_path=None):
    """Console report for a finished experiment"""
    env = config.environment
    print(banner(f"{result.kind.upper()} experiment: kernel {env.kernel.label}, "
                 f"{len(env.points)} arms, T={config.horizon}, {len(config.seeds)} seeds"))

    if result.kind == REGRET:
        print(regret_overview(result.summary).to_string(index=False))
    elif result.kind == COVERAGE:
        print(coverage_overview(result.summary, result.arm_violations).to_string(index=False))
        fraction, compared = width_comparison(result.frame())
        if compared:
            print(f"\nKL width <= clipped subgaussian width in {fraction:.1%} "
                  f"of {compared} recorded (seed, t, arm) triples with N >= 10")
    elif result.kind == INFOGAIN:
        print(info_gain_overview(result.summary).to_string(index=False))
    elif result.kind == ESTIMATOR:
        print(estimator_overview(result.summary).to_string(index=False))

    print(f"{'=' * BANNER_WIDTH}")
    if out_path:
        print(f"Records: {out_path}")
    print()
