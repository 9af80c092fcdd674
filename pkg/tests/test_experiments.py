import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from conftest import CONFIG_DIR, DELTA10_MEANS, delta_environment_dict, make_config, sqexp_environment_dict
from experiment_config import load_config
from experiments import (
    BOUND_FAMILIES, KL, run_coverage_experiment, run_estimator_range_experiment,
    run_info_gain_sweep, run_regret_experiment, write_csv,
)
from reporting import coverage_overview, regret_overview, regret_summary_from_records, width_comparison
from results_store import archive_result, load_summaries


def test_oracle_policy_has_zero_regret():
    config = make_config(policies=[{'policy': 'oracle'}], horizon=100)
    frame = run_regret_experiment(config).frame()
    assert (frame['cumulative_regret'] == 0.0).all()
    assert (frame['arm'] == 8).all()


def test_uniform_regret_two_arms():
    gap = 0.4
    config = make_config(
        environment=delta_environment_dict([0.3, 0.7]),
        horizon=200,
        seeds=list(range(50)),
        record_every=200,
    )
    final = run_regret_experiment(config).frame()
    assert len(final) == 50
    expected = 200 * gap / 2
    # per-step regret is gap with probability 1/2
    sigma = np.sqrt(200 * gap ** 2 / 4 / 50)
    assert abs(final['cumulative_regret'].mean() - expected) <= 5 * sigma


def test_regret_records_replay(delta10_env):
    config = make_config(
        policies=[{'policy': 'kl_ucb'}, {'policy': 'igp_ucb'}, {'policy': 'kernel_beta_ucb'}],
        horizon=150,
        seeds=[3],
    )
    frame = run_regret_experiment(config).frame()
    assert list(frame.columns) == ['policy', 'seed', 't', 'arm', 'reward', 'instant_regret',
                                   'cumulative_regret']
    gaps = delta10_env.gaps()
    for _, run in frame.groupby('policy'):
        assert run['cumulative_regret'].is_monotonic_increasing
        assert_allclose(run['cumulative_regret'].to_numpy(), np.cumsum(gaps[run['arm'].to_numpy()]))
        assert set(run['reward']) <= {0, 1}


def test_record_thinning_keeps_last_round():
    config = make_config(horizon=95, record_every=10)
    frame = run_regret_experiment(config).frame()
    assert sorted(set(frame['t'])) == list(range(10, 100, 10)) + [95]


def test_regret_summary_checkpoints():
    config = make_config(horizon=1000, seeds=[0, 1, 2], record_every=100)
    result = run_regret_experiment(config)
    assert sorted(set(result.summary['t'])) == [10, 100, 500, 1000]
    overview = regret_overview(result.summary)
    final = overview[overview['t'] == 1000].iloc[0]
    assert final['runs'] == 3
    assert final['regret_per_round'] == pytest.approx(final['mean_regret'] / 1000)
    rebuilt = regret_summary_from_records(result.frame())
    assert_allclose(rebuilt[rebuilt['t'] == 1000]['mean_regret'], final['mean_regret'])


def test_parallel_matches_serial(tmp_path):
    config = make_config(policies=[{'policy': 'kl_ucb'}, {'policy': 'uniform_random'}],
                         horizon=80, seeds=[0, 1, 2, 3])
    serial = run_regret_experiment(config, workers=1)
    parallel = run_regret_experiment(config, workers=2)
    write_csv(serial.frame(), tmp_path / 'serial.csv')
    write_csv(parallel.frame(), tmp_path / 'parallel.csv')
    assert (tmp_path / 'serial.csv').read_bytes() == (tmp_path / 'parallel.csv').read_bytes()


def test_regret_csv_is_deterministic(tmp_path):
    config = load_config(CONFIG_DIR / 'sqexp25_regret.json')
    config = make_config(environment=sqexp_environment_dict(),
                         policies=[{'policy': p.policy} for p in config.policies],
                         horizon=60, seeds=[4, 9])
    for name in ('a.csv', 'b.csv'):
        write_csv(run_regret_experiment(config).frame(), tmp_path / name)
    assert (tmp_path / 'a.csv').read_bytes() == (tmp_path / 'b.csv').read_bytes()


def coverage_config(**entries):
    document = dict(experiment='coverage', horizon=300, seeds=list(range(20)), record_every=1)
    document.update(entries)
    return make_config(**document)


def test_coverage_bookkeeping(delta10_env):
    result = run_coverage_experiment(coverage_config(seeds=[0, 1], horizon=120))
    frame = result.frame()
    assert set(frame['family']) == set(BOUND_FAMILIES)
    assert (frame['lower'] <= frame['upper']).all()
    truth = delta10_env.arm_values[frame['arm'].to_numpy()]
    recomputed = (frame['lower'] <= truth) & (truth <= frame['upper'])
    assert (recomputed == frame['contains_f']).all()
    assert_allclose(frame['width'], frame['upper'] - frame['lower'])


def test_kl_interval_vacuous_before_first_pull():
    frame = run_coverage_experiment(coverage_config(seeds=[0], horizon=5)).frame()
    kl = frame[(frame['family'] == KL) & (frame['pulls'] == 0)]
    assert len(kl) > 0
    assert (kl['lower'] == 0.0).all() and (kl['upper'] == 1.0).all()
    assert kl['contains_f'].all()


def test_coverage_small_scale_rates():
    result = run_coverage_experiment(coverage_config())
    overview = coverage_overview(result.summary, result.arm_violations).set_index('family')
    assert overview.loc['subgaussian', 'run_violation_rate'] <= 0.05
    assert overview.loc['kl', 'worst_arm_rate'] <= 0.05
    assert result.arm_violations['kl'].shape == (20, 10)
    assert len(result.summary) == 20 * len(BOUND_FAMILIES)


def test_kl_intervals_stay_in_unit_interval():
    frame = run_coverage_experiment(coverage_config(seeds=[2], horizon=200)).frame()
    kl = frame[frame['family'].isin(['kl', 'kl_union', 'kernel_beta_kl'])]
    assert kl['lower'].min() >= 0.0 and kl['upper'].max() <= 1.0
    subgaussian = frame[frame['family'] == 'subgaussian']
    assert subgaussian['lower'].min() < 0.0 or subgaussian['upper'].max() > 1.0


def test_width_comparison_reports_fraction():
    frame = run_coverage_experiment(coverage_config(seeds=[0, 1], horizon=300, record_every=50)).frame()
    fraction, compared = width_comparison(frame, min_pulls=10)
    assert compared > 0
    assert 0.0 <= fraction <= 1.0


def infogain_config(**entries):
    document = dict(experiment='infogain', horizon=40, seeds=[0, 1])
    document.update(entries)
    return make_config(**document)


def test_info_gain_delta_closed_form():
    config = infogain_config(environment=delta_environment_dict(DELTA10_MEANS), horizon=10,
                             infogain={'nu2': 1.0})
    frame = run_info_gain_sweep(config).frame()
    seed0 = frame[frame['seed'] == 0].set_index('t')
    assert seed0.loc[0, 'greedy_gamma'] == 0.0 and seed0.loc[0, 'observed_gain'] == 0.0
    for t in range(1, 11):
        assert seed0.loc[t, 'greedy_gamma'] == pytest.approx(t / 2 * np.log(2))
    assert (frame['observed_gain'] <= frame['greedy_gamma'] + 1e-12).all()
    assert not frame['inversion'].any()


def test_info_gain_columns_on_smooth_kernel():
    result = run_info_gain_sweep(infogain_config(environment=sqexp_environment_dict()))
    frame = result.frame()
    assert list(frame.columns) == ['seed', 't', 'greedy_gamma', 'observed_gain', 'inversion', 'igp_ucb_scale']
    assert len(frame) == 2 * 41
    assert frame.groupby('seed')['greedy_gamma'].apply(lambda s: s.is_monotonic_increasing).all()
    assert (result.summary['inversions'] == frame.groupby('seed')['inversion'].sum().to_numpy()).all()


def test_estimator_range_gp_exits_beta_does_not():
    config = load_config(CONFIG_DIR / 'sqexp25_estimator.json')
    config = make_config(environment=sqexp_environment_dict(), experiment='estimator', horizon=60,
                         seeds=list(range(20)),
                         estimator={'nu2': config.estimator.nu2,
                                    'prefix': [list(p) for p in config.estimator.prefix]})
    result = run_estimator_range_experiment(config)
    assert (result.summary['gp_exit_rounds'] > 0).all()
    assert (result.summary['beta_exit_rounds'] == 0).all()
    assert (result.summary['first_gp_exit'] == 3).all()
    frame = result.frame()
    assert frame['beta_min'].min() > 0.0 and frame['beta_max'].max() < 1.0


def test_archive_round_trip(tmp_path):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    config = make_config(horizon=100, seeds=[0, 1])
    result = run_regret_experiment(config)
    run_id = archive_result(url, config, result)
    stored = load_summaries(url, run_id)
    assert set(stored['metric']) == {'cumulative_regret', 'regret_per_round', 'regret_per_log_t',
                                     'kl_regret_constant'}
    assert len(stored) == 4 * len(result.summary)
    final = stored[(stored['metric'] == 'cumulative_regret') & (stored['t'] == 100)]
    assert_allclose(sorted(final['value']),
                    sorted(result.summary[result.summary['t'] == 100]['cumulative_regret']))


@pytest.mark.slow
def test_delta_reduction_acceptance():
    config = make_config(
        policies=[{'policy': 'kl_ucb', 'c2': 3.0}, {'policy': 'kernel_beta_ucb', 'prior': 'vanishing', 'c2': 3.0}],
        horizon=2000, seeds=list(range(20)),
    )
    frame = run_regret_experiment(config).frame()
    kl = frame[frame['policy'] == 'kl_ucb'].reset_index(drop=True)
    kb = frame[frame['policy'] == 'kernel_beta_ucb'].reset_index(drop=True)
    assert (kl['arm'] == kb['arm']).all()
    assert (kl['reward'] == kb['reward']).all()


@pytest.mark.slow
def test_coverage_acceptance():
    config = load_config(CONFIG_DIR / 'delta10_coverage.json')
    result = run_coverage_experiment(config, workers=4)
    overview = coverage_overview(result.summary, result.arm_violations).set_index('family')
    assert overview.loc['subgaussian', 'run_violation_rate'] <= 0.05
    assert overview.loc['kl', 'worst_arm_rate'] <= 0.05


@pytest.mark.slow
def test_regret_shape_acceptance():
    config = make_config(
        policies=[{'policy': 'kl_ucb', 'c2': 0.0}, {'policy': 'igp_ucb'}],
        horizon=10_000, seeds=list(range(50)), record_every=1000, workers=4,
    )
    result = run_regret_experiment(config)
    overview = regret_overview(result.summary).set_index(['policy', 't'])
    kl_final = overview.loc[('kl_ucb', 10_000)]
    igp_final = overview.loc[('igp_ucb', 10_000)]
    assert kl_final['mean_regret'] < igp_final['mean_regret']
    ratio = kl_final['regret_per_log_t'] / overview.loc[('kl_ucb', 5000), 'regret_per_log_t']
    assert 1 / 1.5 <= ratio <= 1.5
    assert kl_final['regret_per_round'] < 0.5 * overview.loc[('kl_ucb', 1000), 'regret_per_round']
