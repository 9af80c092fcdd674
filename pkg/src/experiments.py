"""
Experiment engines: regret, coverage, information-gain and estimator range

Each engine fans out over independent (policy, seed) or seed tasks, runs them
serially or on a process pool, and merges the results in task order so both
paths produce identical tables.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field
from typing import List

import numpy as np
import pandas as pd

from bernoulli_estimation import ArmStats, BetaField
from confidence_bounds import (
    KlThresholdParams, kl_lower_indices, kl_threshold, kl_upper_indices,
    subgaussian_bounds, subgaussian_width,
)
from experiment_config import COVERAGE, ESTIMATOR, INFOGAIN, REGRET
from errors import MalformedInputError
from gp_posterior import ArmPosterior, GpState, greedy_info_gain_curve
from policies import ARM_COUNTS, make_policy
from rkhs_env import igp_ucb_regret_scale, kl_regret_constant
from rng import ENVIRONMENT_STREAM, TRAJECTORY_STREAM, make_rng

logger = logging.getLogger(__name__)

RUN_COLUMNS = ['policy', 'seed', 't', 'arm', 'reward', 'instant_regret', 'cumulative_regret']
COVERAGE_COLUMNS = ['family', 'seed', 't', 'arm', 'lower', 'upper', 'contains_f', 'width', 'pulls']
INFOGAIN_COLUMNS = ['seed', 't', 'greedy_gamma', 'observed_gain', 'inversion', 'igp_ucb_scale']
ESTIMATOR_COLUMNS = ['seed', 't', 'arm', 'reward', 'gp_min', 'gp_max', 'gp_in_range',
                     'beta_min', 'beta_max', 'beta_in_range']

REGRET_SUMMARY_COLUMNS = ['policy', 'seed', 't', 'cumulative_regret', 'regret_per_round',
                          'regret_per_log_t', 'kl_regret_constant']
COVERAGE_SUMMARY_COLUMNS = ['family', 'seed', 'run_violation', 'arms_violated', 'upper_violation']
INFOGAIN_SUMMARY_COLUMNS = ['seed', 'horizon', 'greedy_gamma', 'observed_gain', 'inversions']
ESTIMATOR_SUMMARY_COLUMNS = ['seed', 'gp_exit_rounds', 'first_gp_exit', 'beta_exit_rounds',
                             'gp_min', 'gp_max', 'beta_min', 'beta_max']

SUBGAUSSIAN = 'subgaussian'
SUBGAUSSIAN_CLIPPED = 'subgaussian_clipped'
SUBGAUSSIAN_MAX_GAMMA = 'subgaussian_max_gamma'
KL = 'kl'
KL_UNION = 'kl_union'
KERNEL_BETA_KL = 'kernel_beta_kl'
BOUND_FAMILIES = (SUBGAUSSIAN, SUBGAUSSIAN_CLIPPED, SUBGAUSSIAN_MAX_GAMMA, KL, KL_UNION, KERNEL_BETA_KL)
KL_FAMILIES = (KL, KL_UNION, KERNEL_BETA_KL)

CSV_FLOAT_FORMAT = '%.17g'
INVERSION_TOL = 1e-12


@dataclass(frozen=True)
class RunRecord:
    policy: str
    seed: int
    t: int
    arm: int
    reward: int
    instant_regret: float
    cumulative_regret: float


@dataclass(frozen=True)
class CoverageRecord:
    family: str
    seed: int
    t: int
    arm: int
    lower: float
    upper: float
    contains_f: bool
    width: float
    pulls: int


@dataclass
class ExperimentResult:
    """
    Records of one experiment plus its per-run summary table

    arm_violations maps each coverage family to a (seeds, arms) boolean array
    of any-t violations; it stays empty for the other kinds.
    """
    kind: str
    records: List
    columns: List[str]
    summary: pd.DataFrame
    arm_violations: dict = field(default_factory=dict)

    def frame(self):
        """Records as a DataFrame in the fixed column order"""
        return pd.DataFrame.from_records(
            [record if isinstance(record, tuple) else astuple(record) for record in self.records],
            columns=self.columns)


def is_recorded(t, horizon, every):
    return t % every == 0 or t == horizon


def regret_checkpoints(horizon):
    """Decades, half the horizon and the horizon itself"""
    points = {horizon, max(horizon // 2, 1)}
    decade = 10
    while decade < horizon:
        points.add(decade)
        decade *= 10
    return sorted(points)


def _run_tasks(func, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [func(*task) for task in tasks]
    # map keeps task order, so output matches the serial run
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, *zip(*tasks)))


def _regret_run(config, policy_config, seed):
    env = config.environment.build()
    policy = make_policy(policy_config, config.environment.kernel, env.f.norm_bound, seed,
                         env.optimal_arm)
    policy.reset(env.decision_set, config.horizon, config.delta)
    rng = make_rng(seed, ENVIRONMENT_STREAM)
    gaps = env.gaps()
    checkpoints = set(regret_checkpoints(config.horizon))
    reference = kl_regret_constant(env)
    logger.info("Regret run: policy=%s seed=%d T=%d", policy.name, seed, config.horizon)

    records = []
    summary = []
    cumulative = 0.0
    for t in range(1, config.horizon + 1):
        arm = policy.select(t)
        reward = env.pull(arm, rng)
        policy.observe(arm, reward)
        instant = float(gaps[arm])
        cumulative += instant
        if is_recorded(t, config.horizon, config.record_every):
            records.append(RunRecord(policy.name, seed, t, arm, reward, instant, cumulative))
        # Summary rows only at checkpoints
        if t in checkpoints:
            per_log = cumulative / np.log(t) if t > 1 else float('nan')
            summary.append((policy.name, seed, t, cumulative, cumulative / t, per_log, reference))
    logger.debug("Regret run done: policy=%s seed=%d R_T=%.6g", policy.name, seed, cumulative)
    return records, summary


def run_regret_experiment(config, workers=None):
    """
    Play every configured policy against a fresh environment for every seed

    Args:
        config: ExperimentConfig of kind regret
        workers: process count, defaults to config.workers

    Returns:
        ExperimentResult with RunRecord rows and checkpoint summaries
    """
    if config.kind != REGRET:
        raise MalformedInputError(f"Expected a regret config, got '{config.kind}'")
    tasks = [(config, policy, seed) for policy in config.policies for seed in config.seeds]
    outputs = _run_tasks(_regret_run, tasks, workers or config.workers)
    records = [record for run_records, _ in outputs for record in run_records]
    summary = pd.DataFrame([row for _, rows in outputs for row in rows],
                           columns=REGRET_SUMMARY_COLUMNS)
    return ExperimentResult(REGRET, records, RUN_COLUMNS, summary)


def _coverage_bounds(posterior, points, stats, beta_field, t, config, width_plugin, width_greedy):
    """Lower/upper arrays over all arms for every bound family at round t"""
    if isinstance(posterior, GpState):
        means, variances = posterior.mean_and_variance(points)
    else:
        means, variances = posterior.means(), posterior.variances()
    params = KlThresholdParams(config.coverage.c1, config.coverage.c2, config.delta)
    threshold = kl_threshold(t, params)
    union_threshold = kl_threshold(t, params.union_corrected(stats.num_arms))
    empirical = np.nan_to_num(stats.empirical_means(), nan=0.0)
    beta_means = beta_field.arm_means()
    beta_counts = beta_field.arm_pseudocounts()
    return {
        SUBGAUSSIAN: subgaussian_bounds(means, variances, width_plugin),
        SUBGAUSSIAN_CLIPPED: subgaussian_bounds(means, variances, width_plugin, clipped=True),
        SUBGAUSSIAN_MAX_GAMMA: subgaussian_bounds(means, variances, width_greedy),
        KL: (kl_lower_indices(empirical, stats.counts, threshold),
             kl_upper_indices(empirical, stats.counts, threshold)),
        KL_UNION: (kl_lower_indices(empirical, stats.counts, union_threshold),
                   kl_upper_indices(empirical, stats.counts, union_threshold)),
        KERNEL_BETA_KL: (kl_lower_indices(beta_means, beta_counts, threshold),
                         kl_upper_indices(beta_means, beta_counts, threshold)),
    }


def _coverage_run(config, seed, greedy_curve):
    env = config.environment.build()
    decision_set = env.decision_set
    kernel = config.environment.kernel
    coverage = config.coverage
    collector = make_policy(coverage.collector, kernel, env.f.norm_bound, seed, env.optimal_arm)
    collector.reset(decision_set, config.horizon, config.delta)
    rng = make_rng(seed, ENVIRONMENT_STREAM)

    # Estimators behind the bound families
    if coverage.posterior == ARM_COUNTS:
        posterior = ArmPosterior(kernel, decision_set, coverage.nu2)
    else:
        posterior = GpState(kernel, coverage.nu2)
    stats = ArmStats(decision_set.size)
    beta_field = BetaField(kernel, decision_set)
    truth = env.arm_values
    B = env.f.norm_bound
    logger.info("Coverage run: seed=%d T=%d collector=%s", seed, config.horizon, collector.name)

    arm_violation = {family: np.zeros(decision_set.size, dtype=bool) for family in BOUND_FAMILIES}
    upper_violation = {family: False for family in BOUND_FAMILIES}
    records = []
    for t in range(1, config.horizon + 1):
        # Collect one reward, feed every estimator
        arm = collector.select(t)
        reward = env.pull(arm, rng)
        collector.observe(arm, reward)
        if coverage.posterior == ARM_COUNTS:
            posterior.update(arm, reward)
        else:
            posterior.update(decision_set[arm], reward)
        stats.update(arm, reward)
        beta_field.update_arm(arm, reward)

        # Plug-in gain of this history, greedy gain as the max-gamma reference
        width_plugin = subgaussian_width(B, coverage.lam, posterior.info_gain_observed(), config.delta)
        width_greedy = subgaussian_width(B, coverage.lam, greedy_curve[t - 1], config.delta)
        bounds = _coverage_bounds(posterior, decision_set.points, stats, beta_field, t, config, width_plugin, width_greedy)
        recorded = is_recorded(t, config.horizon, config.record_every)
        # Score every family at every arm
        for family in BOUND_FAMILIES:
            lower, upper = bounds[family]
            contains = (lower <= truth) & (truth <= upper)
            arm_violation[family] |= ~contains
            if family in KL_FAMILIES and np.any(truth > upper):
                upper_violation[family] = True
            if recorded:
                for x in range(decision_set.size):
                    records.append(CoverageRecord(
                        family, seed, t, x, float(lower[x]), float(upper[x]), bool(contains[x]),
                        float(upper[x] - lower[x]), int(stats.counts[x])))

    summary = [(family, seed, bool(arm_violation[family].any()), int(arm_violation[family].sum()),
                upper_violation[family]) for family in BOUND_FAMILIES]
    return records, summary, arm_violation


def run_coverage_experiment(config, workers=None):
    """
    Check every bound family against the true f along data-collection runs

    After each round every family is evaluated at every arm. Summaries carry
    the run-level indicator (any (t, x) violation), the number of arms with an
    any-t violation and, for KL families, the one-sided upper violation.

    Args:
        config: ExperimentConfig of kind coverage
        workers: process count, defaults to config.workers

    Returns:
        ExperimentResult with CoverageRecord rows, summaries and arm_violations
    """
    if config.kind != COVERAGE:
        raise MalformedInputError(f"Expected a coverage config, got '{config.kind}'")
    # Greedy curve depends on the kernel and arms only, shared by every seed
    env = config.environment.build()
    greedy_curve = greedy_info_gain_curve(
        config.environment.kernel, env.decision_set, config.horizon, config.coverage.nu2)
    tasks = [(config, seed, greedy_curve) for seed in config.seeds]
    outputs = _run_tasks(_coverage_run, tasks, workers or config.workers)

    records = [record for run_records, _, _ in outputs for record in run_records]
    summary = pd.DataFrame([row for _, rows, _ in outputs for row in rows],
                           columns=COVERAGE_SUMMARY_COLUMNS)
    summary = summary.sort_values(['family', 'seed'], kind='stable', key=_family_order).reset_index(drop=True)
    arm_violations = {family: np.array([violations[family] for _, _, violations in outputs])
                      for family in BOUND_FAMILIES}
    return ExperimentResult(COVERAGE, records, COVERAGE_COLUMNS, summary, arm_violations)


def _family_order(column):
    if column.name == 'family':
        return column.map(BOUND_FAMILIES.index)
    return column


def _info_gain_run(config, seed, greedy_curve, num_arms, kernel, decision_set, norm_bound):
    rng = make_rng(seed, TRAJECTORY_STREAM)
    posterior = ArmPosterior(kernel, decision_set, config.infogain.nu2)
    rows = [(seed, 0, 0.0, 0.0, False, 0.0)]
    inversions = 0
    for t in range(1, config.horizon + 1):
        # Observed gain ignores the rewards
        posterior.update(int(rng.integers(num_arms)), 0)
        greedy = float(greedy_curve[t - 1])
        observed = posterior.info_gain_observed()
        inversion = observed > greedy + INVERSION_TOL
        if inversion:
            inversions += 1
            logger.warning("Greedy information gain below observed gain: seed=%d t=%d (%.6g < %.6g)",
                           seed, t, greedy, observed)
        if is_recorded(t, config.horizon, config.record_every):
            scale = float(igp_ucb_regret_scale(norm_bound, greedy, t, config.delta))
            rows.append((seed, t, greedy, observed, inversion, scale))
    summary = (seed, config.horizon, float(greedy_curve[-1]), posterior.info_gain_observed(), inversions)
    return rows, summary


def run_info_gain_sweep(config, workers=None):
    """
    Greedy maximum information gain next to the gain of a uniform trajectory

    Rows run from t = 0 (both zero) to T. Observed gain above the greedy value
    is flagged as an inversion rather than raised, since greedy only
    approximates the maximum.
    """
    if config.kind != INFOGAIN:
        raise MalformedInputError(f"Expected an infogain config, got '{config.kind}'")
    env = config.environment.build()
    kernel = config.environment.kernel
    greedy_curve = greedy_info_gain_curve(kernel, env.decision_set, config.horizon, config.infogain.nu2)
    tasks = [(config, seed, greedy_curve, env.num_arms, kernel, env.decision_set, env.f.norm_bound)
             for seed in config.seeds]
    outputs = _run_tasks(_info_gain_run, tasks, workers or config.workers)
    records = [row for rows, _ in outputs for row in rows]
    summary = pd.DataFrame([row for _, row in outputs], columns=INFOGAIN_SUMMARY_COLUMNS)
    return ExperimentResult(INFOGAIN, records, INFOGAIN_COLUMNS, summary)


def _estimator_run(config, seed):
    env = config.environment.build()
    decision_set = env.decision_set
    kernel = config.environment.kernel
    settings = config.estimator
    posterior = ArmPosterior(kernel, decision_set, settings.nu2)
    beta_field = BetaField(kernel, decision_set, settings.alpha0, settings.beta0)
    env_rng = make_rng(seed, ENVIRONMENT_STREAM)
    trajectory_rng = make_rng(seed, TRAJECTORY_STREAM)

    rows = []
    gp_exits = 0
    beta_exits = 0
    first_exit = -1
    extremes = [np.inf, -np.inf, np.inf, -np.inf]
    for t in range(1, config.horizon + 1):
        # Scripted prefix first, then uniform arms
        if t <= len(settings.prefix):
            arm, reward = settings.prefix[t - 1]
        else:
            arm = int(trajectory_rng.integers(decision_set.size))
            reward = env.pull(arm, env_rng)
        posterior.update(arm, reward)
        beta_field.update_arm(arm, reward)

        # Range of each estimator over the arms
        gp_means = posterior.means()
        beta_means = beta_field.arm_means()
        gp_low, gp_high = float(gp_means.min()), float(gp_means.max())
        beta_low, beta_high = float(beta_means.min()), float(beta_means.max())
        gp_ok = 0.0 <= gp_low and gp_high <= 1.0
        beta_ok = 0.0 <= beta_low and beta_high <= 1.0
        if not gp_ok:
            gp_exits += 1
            if first_exit < 0:
                first_exit = t
        if not beta_ok:
            beta_exits += 1
        extremes = [min(extremes[0], gp_low), max(extremes[1], gp_high),
                    min(extremes[2], beta_low), max(extremes[3], beta_high)]
        if is_recorded(t, config.horizon, config.record_every):
            rows.append((seed, t, arm, reward, gp_low, gp_high, gp_ok, beta_low, beta_high, beta_ok))
    summary = (seed, gp_exits, first_exit, beta_exits, *extremes)
    return rows, summary


def run_estimator_range_experiment(config, workers=None):
    """
    Track the range of the GP mean and the Beta-field mean along a trajectory

    The configured prefix of (arm, reward) pairs is played first; after that
    arms are drawn uniformly and rewarded by the environment.
    """
    if config.kind != ESTIMATOR:
        raise MalformedInputError(f"Expected an estimator config, got '{config.kind}'")
    tasks = [(config, seed) for seed in config.seeds]
    outputs = _run_tasks(_estimator_run, tasks, workers or config.workers)
    records = [row for rows, _ in outputs for row in rows]
    summary = pd.DataFrame([row for _, row in outputs], columns=ESTIMATOR_SUMMARY_COLUMNS)
    return ExperimentResult(ESTIMATOR, records, ESTIMATOR_COLUMNS, summary)


ENGINES = {
    REGRET: run_regret_experiment,
    COVERAGE: run_coverage_experiment,
    INFOGAIN: run_info_gain_sweep,
    ESTIMATOR: run_estimator_range_experiment,
}


def run_experiment(config, workers=None):
    """Dispatch on config.kind"""
    return ENGINES[config.kind](config, workers)


def write_csv(frame, path):
    """
    Write a table with a header row, fixed columns and 17-digit floats
    """
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    logger.info("Wrote %d rows to %s", len(frame), path)
