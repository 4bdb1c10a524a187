import csv
from dataclasses import fields
import json
from pathlib import Path

import pytest

import perclab
from perclab.bounds import expected_removed_bound
from perclab.config import ExperimentConfig, build_host, load_config
from perclab.errors import ConfigError, RegimeError
from perclab.graphs import cartesian_product, complete, cycle, hypercube
from perclab.harness import (TrialRecord, WriteResults, _num_processes, expansion_summary, format_summary,
                             run_experiment, worker_task)


def _without_runtime(records):
    return [{k: v for k, v in r.as_dict().items() if k != 'runtime_ms'} for r in records]


@pytest.mark.parametrize('changes', [
    {'host': 'torus'},
    {'algorithms': []},
    {'algorithms': ['blossom']},
    {'algorithms': ['exact', 'exact']},
    {'trials': 0},
    {'eps': 1.0},
    {'delta': 0.0},
    {'host': 'random_regular'},
    {'host': 'product'},
    {'host': 'file'},
    {'host': 'product', 'factors': [{'kind': 'torus'}]},
    {'expansion_samples': -1},
    {'expansion_samples': 2.5},
    {'expansion_threshold': -1.0},
])
def test_config_validation(changes):
    with pytest.raises(ConfigError):
        ExperimentConfig(**changes)


def test_load_config(tmp_path):
    path = tmp_path / 'exp.toml'
    path.write_text("[experiment]\nname = 'small'\ndim = 6\np = 0.5\nalgorithms = ['exact', 'prune']\ntrials = 3\n")
    cfg = load_config(path)
    assert (cfg.name, cfg.dim, cfg.p, cfg.trials) == ('small', 6, '0.5', 3)
    assert cfg.algorithms == ['exact', 'prune'] and cfg.eps == 0.1


def test_packaged_experiment_template_loads():
    cfg = load_config(Path(perclab.__file__).parent / 'experiment.toml')
    assert cfg.name == 'q12_half' and cfg.dim == 12 and cfg.oracle
    assert (cfg.expansion_samples, cfg.expansion_threshold) == (8, 4)


@pytest.mark.parametrize('text', [
    "[experiment\nname = 'x'\n",
    "[other]\nname = 'x'\n",
    "[experiment]\ncolour = 'red'\n",
    "[experiment]\ntrials = 'many'\n",
])
def test_load_config_rejects(tmp_path, text):
    path = tmp_path / 'bad.toml'
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / 'nothing.toml')


def test_build_host_product():
    cfg = ExperimentConfig(host='product', factors=[{'kind': 'cycle', 'n': 4}, {'kind': 'hypercube', 'dim': 2}])
    g = build_host(cfg)
    assert (g.n, g.d) == (16, 4)


def test_single_trial_on_full_small_hypercube():
    cfg = ExperimentConfig(dim=4, p='1', algorithms=['theorem1'], trials=1, oracle=True)
    records, summary, traces = run_experiment(cfg)
    assert len(records) == 1 and traces == []
    r = records[0]
    assert (r.trial, r.seed, r.n, r.d, r.p, r.algorithm) == (0, 0, 16, 4, '1', 'theorem1')
    assert r.covered >= 14 and r.covered >= r.guarantee
    assert r.oracle_size == 8
    assert r.coverage_fraction == r.covered / 16 and r.uncovered == 16 - r.covered
    assert summary['bounds']['theorem1']['in_regime'] is False


def test_experiment_is_deterministic():
    cfg = ExperimentConfig(dim=8, p='0.6', algorithms=['theorem1', 'karp_sipser', 'exact', 'prune'], trials=3,
                           base_seed=7, delta=0.3, oracle=True)
    first, _, _ = run_experiment(cfg)
    second, _, _ = run_experiment(cfg)
    assert _without_runtime(first) == _without_runtime(second)
    assert [r.seed for r in first if r.algorithm == 'exact'] == [7, 8, 9]


def test_every_algorithm_appears_once_per_trial():
    algorithms = ['theorem1', 'karp_sipser', 'exact', 'prune']
    cfg = ExperimentConfig(dim=8, p='0.5', algorithms=algorithms, trials=4, delta=0.3)
    records, summary, traces = run_experiment(cfg)
    assert [sum(r.algorithm == a for r in records) for a in algorithms] == [4, 4, 4, 4]
    assert [r.trial for r in records] == sorted(r.trial for r in records)
    assert len(traces) == 4
    for r in records:
        assert r.uncovered is None or r.uncovered >= r.isolated
        if r.algorithm == 'prune':
            assert r.covered is None and len(r.removed_per_round.split(';')) == 2
        else:
            assert r.survivor_fraction is None
    assert set(summary['algorithms']) == set(algorithms)
    assert summary['algorithms']['exact']['covered']['count'] == 4
    assert 'prune' in summary['bounds'] and 'defect_conjecture' in summary['bounds']
    assert all(row['uncovered_ge_isolated'] for row in summary['defect_vs_isolated'])


def test_symbolic_probability_out_of_regime():
    cfg = ExperimentConfig(dim=10, p='log^5(d)/d', trials=1)
    with pytest.raises(RegimeError, match='theorem regime unreachable'):
        run_experiment(cfg)


def test_run_on_prebuilt_host():
    cfg = ExperimentConfig(p='0.5', algorithms=['karp_sipser'], trials=2)
    records, summary, _ = run_experiment(cfg, host=hypercube(5))
    assert {r.n for r in records} == {32}
    assert summary['n'] == 32


def test_multiprocessing_matches_sequential():
    base = dict(dim=7, p='0.5', algorithms=['karp_sipser', 'exact'], trials=4, base_seed=3)
    sequential, _, _ = run_experiment(ExperimentConfig(**base))
    pooled, _, _ = run_experiment(ExperimentConfig(**base, multiprocessing_flag=True,
                                                   multiprocessing_num_processes=2))
    assert _without_runtime(sequential) == _without_runtime(pooled)


def test_worker_task_returns_trial_index():
    params = dict(trial=5, seed=12, host=hypercube(5), p=0.5, algorithms=['exact'], eps=0.1, delta=None,
                  oracle=False)
    trial, records, trace = worker_task(params)
    assert trial == 5 and trace is None
    assert records[0].seed == 12 and records[0].oracle_size == records[0].covered // 2


def test_thread_cap(monkeypatch):
    monkeypatch.delenv('PERCLAB_THREADS', raising=False)
    assert _num_processes(4) == 4
    monkeypatch.setenv('PERCLAB_THREADS', '2')
    assert _num_processes(4) == 2
    assert _num_processes(1) == 1
    monkeypatch.setenv('PERCLAB_THREADS', 'lots')
    assert _num_processes(4) == 4


def test_format_summary():
    cfg = ExperimentConfig(dim=5, p='0.5', algorithms=['exact', 'prune'], trials=2, delta=0.3)
    _, summary, _ = run_experiment(cfg)
    text = format_summary(summary)
    assert 'exact' in text and 'prune' in text and 'mean_uncovered' in text


def test_write_results(tmp_path):
    cfg = ExperimentConfig(name='q6', dim=6, p='0.5', algorithms=['exact', 'prune'], trials=3, delta=0.3,
                           save_traces=True)
    records, summary, traces = run_experiment(cfg)
    wr = WriteResults(dir_output_name=str(tmp_path / 'out'), save_traces=True)
    wr.prefix = cfg.name
    wr.write_all(records, summary, traces)
    out = tmp_path / 'out'
    with open(out / 'q6_trials.csv', newline='') as fp:
        reader = csv.DictReader(fp)
        rows = list(reader)
    assert reader.fieldnames == [f.name for f in fields(TrialRecord)]
    assert len(rows) == 6
    assert json.loads((out / 'q6_summary.json').read_text())['experiment'] == 'q6'
    assert sorted(p.name for p in (out / 'traces').iterdir()) == [f"q6_trace_{seed}.txt" for seed in (0, 1, 2)]


def test_write_results_without_records(tmp_path):
    wr = WriteResults(dir_output_name=str(tmp_path))
    assert wr.write_csv(iter([]), 'empty.csv') == 0
    assert not (tmp_path / 'empty.csv').exists()
    assert wr.write_traces([]) == 0


@pytest.mark.slow
def test_exact_coverage_on_q16():
    cfg = ExperimentConfig(dim=16, p='0.75', algorithms=['exact'], trials=20)
    records, _, _ = run_experiment(cfg)
    assert sum(r.covered >= 0.95 * 2 ** 16 for r in records) >= 19


@pytest.mark.slow
@pytest.mark.parametrize('p, expected', [('0.3', 217.8), ('0.5', 1.0)])
def test_defect_against_isolated_on_q16(p, expected):
    cfg = ExperimentConfig(dim=16, p=p, algorithms=['exact'], trials=10)
    records, summary, _ = run_experiment(cfg)
    assert all(r.uncovered >= r.isolated for r in records)
    row, = summary['defect_vs_isolated']
    assert row['mean_uncovered'] >= row['mean_isolated']
    assert row['defect_conjecture'] == pytest.approx(expected, rel=1e-3)
    assert row['uncovered_ge_isolated']


def test_expansion_block_in_summary():
    cfg = ExperimentConfig(dim=8, p='0.5', algorithms=['exact'], trials=1, expansion_samples=3,
                           expansion_threshold=2)
    _, summary, _ = run_experiment(cfg)
    block = summary['expansion']
    assert len(set(block['centres'])) == 3
    assert block['radius'] == 2
    assert block['max_per_radius'] == {'1': 1, '2': 2}
    assert block['global_max'] == 2 and block['passes'] is True
    assert 'expansion statistic' in format_summary(summary)
    assert 'expansion' not in run_experiment(ExperimentConfig(dim=8, p='0.5', algorithms=['exact'], trials=1))[1]


def test_expansion_threshold_verdicts():
    host = cartesian_product([cycle(4)] * 4)
    assert expansion_summary(host, ExperimentConfig(expansion_samples=4, expansion_threshold=4))['passes'] is True
    assert expansion_summary(host, ExperimentConfig(expansion_samples=4, expansion_threshold=1))['passes'] is False
    report_only = expansion_summary(complete(7), ExperimentConfig(expansion_samples=50))
    assert report_only['passes'] is None and report_only['global_max'] == 6
    assert len(report_only['centres']) == 7


def test_prune_bounds_block():
    cfg = ExperimentConfig(dim=12, p='0.6', algorithms=['prune'], trials=5, delta=0.3)
    records, summary, _ = run_experiment(cfg)
    block = summary['bounds']['prune']
    removed = expected_removed_bound(12, 0.6, 0.3)
    assert block['tau'] == 2 and block['delta'] == 0.3
    assert block['survivor_fraction_floor'] == pytest.approx(1 - removed.total_fraction.value)
    assert 0 < block['first_round_fraction'] <= 1
    assert all(len(r.removed_per_round.split(';')) == 2 for r in records)
