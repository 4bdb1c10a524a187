""" The experiment engine for perclab

    The main API is run_experiment(), which runs the configured algorithms on percolated samples of one host
    across a range of seeds, and summarises the measurements next to the analytic bounds.
    This module also implements class WriteResults which saves the records, the summary and the pruning
    traces into csv/json/text files.
"""

import csv
from dataclasses import asdict, dataclass
import json
import math
import multiprocessing
import os
from pathlib import Path
import time
from typing import Iterator

import numpy as np
from tabulate import tabulate

from perclab.bounds import defect_conjecture, expected_removed_bound, high_degree_edge_bound, solve_constants
from perclab.config import ExperimentConfig, build_host
from perclab.graphs import RegularGraph, check_expansion_condition
from perclab.matching import karp_sipser, max_matching_bipartite, max_matching_exhaustive, theorem1_matching
from perclab.percolation import Probability, isolated_count, resolve_p, sample
from perclab.pruning import PruneTrace, make_schedule, prune, prune_statistics, write_trace
from perclab.settings import get_logger

THREADS_ENV = 'PERCLAB_THREADS'
STAT_COLUMNS = ('covered', 'coverage_fraction', 'uncovered', 'guarantee', 'oracle_size', 'isolated',
                'survivor_fraction', 'stabilized_at', 'runtime_ms')

logger = get_logger(__name__)


@dataclass
class TrialRecord:
    """ Measurements of one algorithm on one trial; matching columns are empty for prune rows and vice versa """

    trial: int
    seed: int
    n: int
    d: int
    p: str
    algorithm: str
    covered: int | None = None
    coverage_fraction: float | None = None
    uncovered: int | None = None
    guarantee: int | None = None
    #: Size (in edges) of a maximum matching, when the oracle ran
    oracle_size: int | None = None
    isolated: int = 0
    #: |A_1|;...;|A_tau|
    removed_per_round: str = ''
    survivor_fraction: float | None = None
    stabilized_at: int | None = None
    runtime_ms: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def _exact(s):
    """ Exact maximum matching: Hopcroft-Karp on bipartite hosts, exhaustive search otherwise """
    if s.host.is_bipartite():
        return max_matching_bipartite(s)
    return max_matching_exhaustive(s)


def worker_task(params: dict) -> tuple[int, list[TrialRecord], PruneTrace | None]:
    """ A single trial specified by `params`:
        1. Draw the sample for the trial's seed.
        2. Run every configured algorithm on it, timing each one.
        3. Return the trial index, one record per algorithm, and the pruning trace (if any).

    :param params: A dictionary with keys `trial`, `seed`, `host`, `p`, `algorithms`, `eps`, `delta`
                   and `oracle`, as documented in :func:`run_experiment`.
    :type params: dict
    :return: (trial, records, trace)
    """
    trial = params['trial']
    seed = params['seed']
    host = params['host']
    p = params['p']
    algorithms = params['algorithms']
    eps = params['eps']
    delta = params['delta']
    s = sample(host, p, seed)
    isolated = isolated_count(s)
    common = dict(trial=trial, seed=seed, n=host.n, d=host.d, p=str(p), isolated=isolated)
    exact_m, exact_ms = None, 0.0
    if params['oracle'] or 'exact' in algorithms:
        start = time.perf_counter()
        exact_m = _exact(s)
        exact_ms = 1000 * (time.perf_counter() - start)
    oracle_size = exact_m.size if exact_m else None
    records, trace = [], None
    for algorithm in algorithms:
        start = time.perf_counter()
        match algorithm:
            case 'theorem1':
                m = theorem1_matching(s, eps)
            case 'karp_sipser':
                m = karp_sipser(s)
            case 'exact':
                m = exact_m
            case 'prune':
                trace = prune(s, make_schedule(host.d, delta))
                stats = prune_statistics(trace)
                records.append(TrialRecord(**common, algorithm='prune',
                                           removed_per_round=';'.join(str(x) for x in stats.removed_per_round),
                                           survivor_fraction=stats.survivor_fraction,
                                           stabilized_at=trace.stabilized_at,
                                           runtime_ms=1000 * (time.perf_counter() - start)))
                continue
        records.append(TrialRecord(**common, algorithm=algorithm, covered=m.covered,
                                   coverage_fraction=m.covered / host.n, uncovered=host.n - m.covered,
                                   guarantee=m.guarantee, oracle_size=oracle_size,
                                   runtime_ms=exact_ms if algorithm == 'exact' else 1000 * (time.perf_counter() - start)))
    logger.info(f"trial {trial} (seed {seed}) on {host.label}: {len(records)} records")
    return trial, records, trace


def _num_processes(requested: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            logger.warning(f"ignoring {THREADS_ENV}={cap!r}: not an integer")
    return requested


def run_experiment(cfg: ExperimentConfig, *, host: RegularGraph | None = None
                   ) -> tuple[list[TrialRecord], dict, list[PruneTrace]]:
    """ The top-level API for running an experiment. It performs the following:

        1. Build the host and resolve the probability specification against its degree. A symbolic
           specification resolving outside [0, 1] raises :class:`~perclab.errors.RegimeError`.
        2. For each trial i, launch :func:`worker_task` with seed ``base_seed + i``. Worker tasks run under
           a `Multiprocessing Pool <https://docs.python.org/3/library/multiprocessing.html#module-multiprocessing.pool>`_
           when ``cfg.multiprocessing_flag`` is set, sequentially otherwise.
        3. Fold the results in trial order and summarise them with :func:`summarize`.

        .. warning:: In order to use this function under the Multiprocessing Pool framework,
                     the statement: **multiprocessing.freeze_support()**
                     must be included as the first statement under *__main__* section of the calling script.

        :param cfg: experiment configuration
        :type cfg: ExperimentConfig
        :param host: a prebuilt host to use instead of the one described by `cfg`
        :type host: RegularGraph | None
        :return: (records, summary, traces); traces are empty unless ``prune`` is among the algorithms
    """
    host = host or build_host(cfg)
    p = resolve_p(cfg.p, host.d, eps=cfg.eps)
    params = dict(host=host, p=p, algorithms=list(cfg.algorithms), eps=cfg.eps, delta=cfg.delta, oracle=cfg.oracle)
    worker_params = [{'trial': i, 'seed': cfg.base_seed + i, **params} for i in range(cfg.trials)]
    logger.info(f"experiment '{cfg.name}': {cfg.trials} trials on {host.label}, p={p}, {cfg.algorithms}")
    if cfg.multiprocessing_flag:
        with multiprocessing.Pool(processes=_num_processes(cfg.multiprocessing_num_processes)) as pool:
            results = pool.map(worker_task, worker_params)
    else:
        results = list(map(worker_task, worker_params))
    results.sort(key=lambda r: r[0])
    records = [record for _, rs, _ in results for record in rs]
    traces = [trace for _, _, trace in results if trace is not None]
    return records, summarize(records, cfg, host, p), traces


def _stats(values: list[float]) -> dict:
    a = np.asarray(values, dtype=float)
    q05, q25, q50, q75, q95 = np.quantile(a, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {'count': int(a.size), 'mean': float(a.mean()), 'std': float(a.std()), 'min': float(a.min()),
            'max': float(a.max()), 'q05': float(q05), 'q25': float(q25), 'q50': float(q50),
            'q75': float(q75), 'q95': float(q95)}


def expansion_summary(host: RegularGraph, cfg: ExperimentConfig) -> dict:
    """ Neighbourhood-expansion statistic of the host on ``cfg.expansion_samples`` centres drawn with
        ``cfg.base_seed``, judged against ``cfg.expansion_threshold`` when one is set.
    """
    rng = np.random.default_rng(cfg.base_seed)
    size = min(cfg.expansion_samples, host.n)
    centres = np.sort(rng.choice(host.n, size=size, replace=False)).tolist()
    report = check_expansion_condition(host, centres)
    passes = None if cfg.expansion_threshold is None else report.passes(cfg.expansion_threshold)
    if passes is False:
        logger.warning(f"expansion statistic {report.global_max} on {host.label} exceeds the threshold "
                       f"{cfg.expansion_threshold}")
    return {'centres': centres, 'radius': report.radius,
            'max_per_radius': {str(k): report.max_for_radius(k) for k in range(1, report.radius + 1)},
            'global_max': report.global_max, 'threshold': cfg.expansion_threshold, 'passes': passes}


def summarize(records: list[TrialRecord], cfg: ExperimentConfig, host: RegularGraph, p: Probability) -> dict:
    """ Per-algorithm statistics of the numeric columns, the bound comparison block and the
        defect-vs-isolated table, plus the expansion block when ``cfg.expansion_samples`` is set.

        :return: JSON-ready dictionary
        :rtype: dict
    """
    pf = float(p)
    per_algorithm = {}
    for algorithm in cfg.algorithms:
        rows = [r for r in records if r.algorithm == algorithm]
        columns = {}
        for col in STAT_COLUMNS:
            values = [getattr(r, col) for r in rows if getattr(r, col) is not None]
            if values:
                columns[col] = _stats(values)
        per_algorithm[algorithm] = columns
    bounds = {'isolated_expectation': host.n * (1 - pf) ** host.d}
    if host.is_hypercube:
        bounds['defect_conjecture'] = defect_conjecture(host.d, pf).uncovered
    if 'prune' in cfg.algorithms and host.d >= 3:
        sched = make_schedule(host.d, cfg.delta)
        removed = expected_removed_bound(host.d, pf, sched.delta)
        first_round = removed.first_round.log_value - host.d * math.log(2)
        bounds['prune'] = {'delta': sched.delta, 'tau': sched.tau,
                           'first_round_fraction': math.exp(min(0.0, first_round)),
                           'removed_fraction': removed.total_fraction.raw,
                           'survivor_fraction_floor': 1 - removed.total_fraction.value}
    if 'theorem1' in cfg.algorithms:
        consts = solve_constants(cfg.eps)
        bounds['theorem1'] = {'eps': consts.eps, 'delta': consts.delta, 'C': consts.C, 'C_real': consts.C_real,
                              'threshold': consts.threshold,
                              'in_regime': host.d >= consts.C and host.d * pf >= consts.C,
                              'high_degree_edges_per_vertex': high_degree_edge_bound(consts.C, consts.delta).raw,
                              'eps_over_8': consts.eps / 8}
    defect_table = []
    for algorithm in cfg.algorithms:
        rows = [r for r in records if r.algorithm == algorithm and r.uncovered is not None]
        if rows:
            defect_table.append({'algorithm': algorithm,
                                 'mean_uncovered': float(np.mean([r.uncovered for r in rows])),
                                 'mean_isolated': float(np.mean([r.isolated for r in rows])),
                                 'defect_conjecture': bounds.get('defect_conjecture'),
                                 'uncovered_ge_isolated': all(r.uncovered >= r.isolated for r in rows)})
    summary = {'experiment': cfg.name, 'host': host.label, 'n': host.n, 'd': host.d, 'p': str(p),
               'trials': cfg.trials, 'base_seed': cfg.base_seed, 'algorithms': per_algorithm,
               'bounds': bounds, 'defect_vs_isolated': defect_table}
    if cfg.expansion_samples:
        summary['expansion'] = expansion_summary(host, cfg)
    return summary


def format_summary(summary: dict) -> str:
    """ Console tables of a summary produced by :func:`summarize` """
    rows = []
    for algorithm, cols in summary['algorithms'].items():
        def mean(col):
            return cols[col]['mean'] if col in cols else None
        rows.append([algorithm, mean('covered'), mean('coverage_fraction'),
                     cols['coverage_fraction']['min'] if 'coverage_fraction' in cols else None,
                     mean('isolated'), mean('oracle_size'), mean('survivor_fraction'), mean('runtime_ms')])
    text = tabulate(rows, headers=['algorithm', 'covered', 'fraction', 'min fraction', 'isolated',
                                   'oracle edges', 'survivors', 'ms'], floatfmt='.4g', missingval='-')
    if summary['defect_vs_isolated']:
        text += '\n\n' + tabulate(summary['defect_vs_isolated'], headers='keys', floatfmt='.4g', missingval='-')
    if expansion := summary.get('expansion'):
        text += (f"\n\nexpansion statistic per radius {expansion['max_per_radius']} over "
                 f"{len(expansion['centres'])} centres, passes: {expansion['passes']}")
    return text


class WriteResults:
    """ A collection of methods for saving experiment results in text files.
    """

    def __init__(self, *,
                 dir_output_name: str = 'output',
                 dir_traces_name: str = 'traces',
                 filenm_records: str = 'trials.csv',
                 filenm_summary: str = 'summary.json',
                 save_traces: bool = False,
                 ):
        """

        :param dir_output_name: Name of the directory into which results are written
        :param dir_traces_name: Name of the sub-directory for pruning traces. Applicable only if
                                `save_traces` == True.
        :param filenm_records: Output filename for trial records.
        :param filenm_summary: Output filename for the summary.
        :param save_traces: If True, write each pruning trace.
        """
        self.dirname_output = dir_output_name
        self.dirname_traces = dir_traces_name
        self.filenm_records = filenm_records
        self.filenm_summary = filenm_summary
        self.save_traces = save_traces
        self.prefix = ''
        #
        # Prepare output directories
        self.dir_output = Path(self.dirname_output)
        if not self.dir_output.is_dir():
            self.dir_output.mkdir(parents=True)
        if self.save_traces:
            self.dir_traces = self.dir_output / self.dirname_traces
            if not self.dir_traces.is_dir():
                self.dir_traces.mkdir(parents=True)

    def _path(self, filename: str) -> Path:
        return self.dir_output / (f"{self.prefix}_{filename}" if self.prefix else filename)

    def write_csv(self, records: Iterator[dict], filename: str) -> int:
        """ Write csv file `filename` where each row is an item (dictionary) in `records`

            :param records: An iterator of dictionaries, where each dictionary should have the same
                             keys. The csv header row (specifying field names) is derived from the
                             first element in `records`.
            :type records: Iterator[dict]
            :param filename: Filename for output csv file.
            :type filename: str
            :return: number of records (items) written to `filename`.
            """

        records_written = 0
        try:
            first_record = next(records)
        except StopIteration:
            return records_written
        else:
            fieldnames = first_record.keys()
            with open(self._path(filename), 'w', newline='') as csvfile:
                writer = csv.DictWriter(csvfile, fieldnames=fieldnames, extrasaction='ignore')
                writer.writeheader()
                writer.writerow(first_record)
                records_written += 1
                for record in records:
                    writer.writerow(record)
                    records_written += 1
            return records_written

    def write_summary(self, summary: dict, filename: str) -> Path:
        path = self._path(filename)
        with open(path, 'wt') as fp:
            json.dump(summary, fp, indent=2)
        return path

    def write_traces(self, traces: list[PruneTrace]) -> int:
        """ Write each trace (pruning trace export format) as '<prefix>_trace_<seed>.txt' """
        if not self.save_traces:
            return 0
        for trace in traces:
            name = f"{self.prefix}_trace_{trace.seed}.txt" if self.prefix else f"trace_{trace.seed}.txt"
            write_trace(trace, self.dir_traces / name)
        return len(traces)

    def write_all(self, records: list[TrialRecord], summary: dict, traces: list[PruneTrace]) -> None:
        self.write_csv((r.as_dict() for r in records), self.filenm_records)
        self.write_summary(summary, self.filenm_summary)
        self.write_traces(traces)
