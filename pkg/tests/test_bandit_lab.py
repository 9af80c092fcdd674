import json

import pandas as pd
import pytest

import bandit_lab
from bandit_lab import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, cli_main
from conftest import CONFIG_DIR, delta_environment_dict
from errors import NumericalError


@pytest.fixture
def minimal_config(tmp_path):
    path = tmp_path / 'minimal.json'
    path.write_text(json.dumps({
        'version': 1,
        'experiment': 'regret',
        'environment': delta_environment_dict([0.2, 0.5, 0.8]),
        'policies': [{'policy': 'kl_ucb'}, {'policy': 'uniform_random'}],
        'horizon': 40,
        'seeds': [0, 1],
    }, indent=2))
    return path


def test_valid_config_writes_csv(tmp_path, minimal_config):
    out = tmp_path / 'out' / 'regret.csv'
    assert cli_main(['regret', '--config', str(minimal_config), '--out', str(out), '--quiet']) == EXIT_OK
    frame = pd.read_csv(out)
    assert len(frame) == 2 * 2 * 40
    assert (tmp_path / 'out' / 'regret_summary.csv').exists()


def test_missing_config_exit_one(tmp_path, capsys):
    code = cli_main(['regret', '--config', str(tmp_path / 'missing.json'), '--out', str(tmp_path / 'x.csv')])
    assert code == EXIT_CONFIG
    assert 'missing.json' in capsys.readouterr().err


def test_unknown_flag_prints_usage(minimal_config, capsys):
    assert cli_main(['regret', '--config', str(minimal_config), '--colour']) == EXIT_CONFIG
    assert 'usage' in capsys.readouterr().err


def test_missing_subcommand(capsys):
    assert cli_main([]) == EXIT_CONFIG
    assert 'usage' in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert cli_main(['--help']) == EXIT_OK
    assert 'regret' in capsys.readouterr().out


def test_kind_mismatch(tmp_path, minimal_config):
    assert cli_main(['coverage', '--config', str(minimal_config), '--out', str(tmp_path / 'c.csv')]) == EXIT_CONFIG


def test_no_output_path(minimal_config):
    assert cli_main(['regret', '--config', str(minimal_config), '--quiet']) == EXIT_CONFIG


def test_seed_offset_shifts_seeds(tmp_path, minimal_config):
    plain = tmp_path / 'plain.csv'
    shifted = tmp_path / 'shifted.csv'
    cli_main(['regret', '--config', str(minimal_config), '--out', str(plain), '--quiet'])
    cli_main(['regret', '--config', str(minimal_config), '--out', str(shifted), '--seed-offset', '7', '--quiet'])
    plain_frame = pd.read_csv(plain)
    shifted_frame = pd.read_csv(shifted)
    assert sorted(set(shifted_frame['seed'])) == [7, 8]
    assert list(shifted_frame.columns) == list(plain_frame.columns)


def test_same_config_same_bytes(tmp_path, minimal_config):
    first = tmp_path / 'first.csv'
    second = tmp_path / 'second.csv'
    for out in (first, second):
        assert cli_main(['regret', '--config', str(minimal_config), '--out', str(out), '--quiet']) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_numerical_failure_exit_two(tmp_path, minimal_config, monkeypatch, capsys):
    def broken(config, workers=None):
        raise NumericalError("Non-positive Cholesky pivot")

    monkeypatch.setattr(bandit_lab, 'run_experiment', broken)
    code = cli_main(['regret', '--config', str(minimal_config), '--out', str(tmp_path / 'x.csv')])
    assert code == EXIT_NUMERICAL
    assert 'Cholesky' in capsys.readouterr().err


def test_report_goes_to_stdout(tmp_path, minimal_config, capsys):
    cli_main(['regret', '--config', str(minimal_config), '--out', str(tmp_path / 'r.csv')])
    out = capsys.readouterr().out
    assert 'REGRET experiment' in out
    assert 'kl_ucb' in out


def test_summarize(tmp_path, minimal_config, capsys):
    out = tmp_path / 'r.csv'
    cli_main(['regret', '--config', str(minimal_config), '--out', str(out), '--quiet'])
    capsys.readouterr()
    assert cli_main(['summarize', '--csv', str(out)]) == EXIT_OK
    assert 'Regret summary' in capsys.readouterr().out
    assert cli_main(['summarize', '--csv', str(tmp_path / 'nope.csv')]) == EXIT_CONFIG


def test_db_archive(tmp_path, minimal_config):
    db = tmp_path / 'runs.db'
    code = cli_main(['regret', '--config', str(minimal_config), '--out', str(tmp_path / 'r.csv'),
                     '--db', f"sqlite:///{db}", '--quiet'])
    assert code == EXIT_OK
    assert db.exists()


@pytest.mark.parametrize('command, preset, entries, expected', [
    ('coverage', 'delta10_coverage.json', {'horizon': 30, 'seeds': [0, 1]},
     ['COVERAGE experiment', 'run_violation_rate', 'kernel_beta_kl']),
    ('infogain', 'sqexp25_infogain.json', {'horizon': 15},
     ['INFOGAIN experiment', 'greedy_gamma', 'runs_with_inversions']),
    ('estimate', 'sqexp25_estimator.json', {'horizon': 10, 'seeds': [0]},
     ['ESTIMATOR experiment', 'gp_exit_runs', 'beta_max']),
])
def test_other_commands_report(tmp_path, capsys, command, preset, entries, expected):
    document = json.loads((CONFIG_DIR / preset).read_text())
    document.update(entries)
    path = tmp_path / preset
    path.write_text(json.dumps(document))
    out = tmp_path / f"{command}.csv"
    assert cli_main([command, '--config', str(path), '--out', str(out)]) == EXIT_OK
    report = capsys.readouterr().out
    for fragment in expected:
        assert fragment in report
    assert f"Records: {out}" in report
    assert (tmp_path / f"{command}_summary.csv").exists()
