""" A command-line script for perclab """

import argparse
import multiprocessing
from pathlib import Path
from sys import exit

from tabulate import tabulate

import perclab
from perclab import bounds
from perclab.config import FACTOR_KINDS, load_config
from perclab.errors import ConfigError, PercLabError, RegimeError
from perclab.graphs import (RegularGraph, cartesian_product, complete, cycle, hypercube, random_regular, read_graph,
                            write_graph)
from perclab.harness import WriteResults, format_summary, run_experiment
from perclab.matching import (coverage_report, karp_sipser, max_matching_bipartite, max_matching_exhaustive,
                              theorem1_matching, write_matching)
from perclab.percolation import edge_count_report, isolated_count, resolve_p, sample, write_sample
from perclab.pruning import make_schedule, prune, prune_statistics, verify_observations, write_trace

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_REGIME = 3


def _add_host_args(parser: argparse.ArgumentParser, *, seed_flag: str = '--host-seed'):
    group = parser.add_argument_group('host')
    group.add_argument('--graph', help="Read the host from a graph file instead of building one")
    group.add_argument('--host', default='hypercube',
                       choices=['hypercube', 'random_regular', 'product', 'cycle', 'complete'],
                       help="Host family (default: %(default)s)")
    group.add_argument('--dim', type=int, default=10, help="Hypercube dimension (default: %(default)s)")
    group.add_argument('--n', type=int, help="Vertex count (random_regular, cycle, complete)")
    group.add_argument('--degree', type=int, help="Degree (random_regular)")
    group.add_argument('--factors', help="Product factors, e.g. 'hypercube:3,cycle:5,complete:4'")
    group.add_argument(seed_flag, dest='host_seed', type=int, default=0,
                       help="Seed of the random regular host (default: %(default)s)")


def parse_args(argv: list[str] | None = None):
    """ Parse command-line arguments
    """

    parser = argparse.ArgumentParser(prog='perclab', formatter_class=argparse.RawTextHelpFormatter,
                                     description="Bond percolation laboratory for d-regular graphs")
    parser.add_argument('--version', action='version', version=f"%(prog)s {perclab.__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen', help="Build a host graph and write it in the graph text format")
    _add_host_args(p, seed_flag='--seed')
    p.add_argument('--out', help="Output graph file")

    for name, text in [('percolate', "Draw G_p and dump the kept edge ids"),
                       ('prune', "Run the pruning process on G_p and export the trace"),
                       ('match', "Build a matching of G_p")]:
        p = sub.add_parser(name, help=text)
        _add_host_args(p)
        p.add_argument('--p', required=True, help="Probability: '0.3', '3/4', '12/d', 'C/d' or 'log^5(d)/d'")
        p.add_argument('--seed', type=int, default=0, help="Sample seed (default: %(default)s)")
        p.add_argument('--eps', type=float, default=0.1, help="Target uncovered fraction (default: %(default)s)")
        p.add_argument('--out', help="Output file")
        match name:
            case 'prune':
                p.add_argument('--delta', type=float, help="Final slack (default: 1/ln ln d)")
                p.add_argument('--full', action='store_true', help="Also dump the members of every A_t")
            case 'match':
                p.add_argument('--algorithm', default='theorem1', choices=['theorem1', 'karp_sipser', 'exact'],
                               help="Matching algorithm (default: %(default)s)")
                p.add_argument('--oracle', action='store_true', help="Also compute the exact maximum")

    p = sub.add_parser('experiment', help="Run an experiment described by a TOML config file")
    p.add_argument('--config', required=True, help="Experiment config file")
    p.add_argument('--out', help="Output CSV file (default: '<output_directory>/<name>_trials.csv')")

    p = sub.add_parser('bounds', help="Evaluate an analytic bound")
    p.add_argument('name', choices=['chernoff', 'binomial', 'azuma', 'round', 'removed', 'defect', 'constants'])
    p.add_argument('--d', type=int)
    p.add_argument('--p', type=float)
    p.add_argument('--t', type=float)
    p.add_argument('--m', type=int)
    p.add_argument('--K', type=float)
    p.add_argument('--delta', type=float)
    p.add_argument('--eps', type=float)
    return parser.parse_args(argv)


def _host(args) -> RegularGraph:
    if args.graph:
        return read_graph(args.graph)
    match args.host:
        case 'hypercube':
            return hypercube(args.dim)
        case 'random_regular':
            if args.n is None or args.degree is None:
                raise ConfigError("--host random_regular needs --n and --degree")
            return random_regular(args.n, args.degree, args.host_seed)
        case 'cycle':
            return cycle(args.n or 3)
        case 'complete':
            return complete(args.n or 2)
        case 'product':
            if not args.factors:
                raise ConfigError("--host product needs --factors")
            factors = []
            for item in args.factors.split(','):
                kind, _, size = item.partition(':')
                if kind not in FACTOR_KINDS or not size.isdigit():
                    raise ConfigError(f"bad factor '{item}': use kind:size with kind in {', '.join(FACTOR_KINDS)}")
                factors.append({'hypercube': hypercube, 'cycle': cycle, 'complete': complete}[kind](int(size)))
            return cartesian_product(factors)


def _fmt(b: bounds.BoundValue) -> str:
    raw = b.raw
    if 1e-6 <= raw < 1e6:
        return f"{raw:.6f}"
    return str(b)


def _require(args, *names):
    if missing := [f"--{n}" for n in names if getattr(args, n) is None]:
        raise ConfigError(f"bounds {args.name} needs {', '.join(missing)}")


def cmd_bounds(args) -> None:
    match args.name:
        case 'chernoff':
            _require(args, 'd', 'p', 't')
            print(_fmt(bounds.chernoff_tail(args.d, args.p, args.t)))
        case 'binomial':
            _require(args, 'd', 'p', 't')
            dp = args.d * args.p
            print(f"{bounds.binomial_tail_exact(args.d, args.p, dp - args.t, dp + args.t):.6f}")
        case 'azuma':
            _require(args, 'm', 'p', 'K', 't')
            b = bounds.azuma_tail(args.m, args.p, args.K, args.t)
            print(f"{_fmt(b)} (clamped {b.value:.6f})")
        case 'round':
            _require(args, 'd', 'p', 'delta', 't')
            b = bounds.round_failure_bound(args.d, args.p, args.delta, int(args.t))
            print(f"{_fmt(b)} (log {b.log_value:.6g})")
        case 'removed':
            _require(args, 'd', 'p', 'delta')
            r = bounds.expected_removed_bound(args.d, args.p, args.delta)
            print(tabulate([['E|A_1| bound', str(r.first_round), f"{r.first_round.log_value:.6g}"],
                            ['E|A| bound', str(r.total), f"{r.total.log_value:.6g}"],
                            ['E|A| / 2^d', str(r.total_fraction), f"{r.total_fraction.log_value:.6g}"]],
                           headers=['bound', 'value', 'log']))
        case 'defect':
            _require(args, 'd', 'p')
            e = bounds.defect_conjecture(args.d, args.p)
            print(f"(2(1-p))^d = {e.uncovered:.6g}, 2^d (1-p)^d = {e.isolated:.6g}")
        case 'constants':
            _require(args, 'eps')
            c = bounds.solve_constants(args.eps)
            print(tabulate([['eps', c.eps], ['delta', c.delta], ['C', c.C], ['C (real root)', c.C_real],
                            ['(1+delta)C', c.threshold]], floatfmt='.6g'))


def cmd_gen(args) -> None:
    g = _host(args)
    print(f"{g}: n={g.n}, d={g.d}, m={g.m}")
    if args.out:
        write_graph(g, args.out)
        print(f"Graph written to '{args.out}'")


def cmd_percolate(args) -> None:
    g = _host(args)
    s = sample(g, resolve_p(args.p, g.d, eps=args.eps), args.seed)
    r = edge_count_report(s, args.eps)
    chernoff = '-' if r.chernoff_bound is None else f"{r.chernoff_bound:.3g}"
    print(f"{s}: {isolated_count(s)} isolated, |E(G_p)| = {r.kept} (expected {r.expected:.6g}, "
          f"target {r.target:.6g}, P[below target] <= {chernoff})")
    if args.out:
        write_sample(s, args.out)
        print(f"Sample written to '{args.out}'")


def cmd_prune(args) -> None:
    g = _host(args)
    s = sample(g, resolve_p(args.p, g.d, eps=args.eps), args.seed)
    sched = make_schedule(g.d, args.delta)
    trace = prune(s, sched)
    stats = prune_statistics(trace)
    rows = [[rd.t, f"{sched.delta_at(rd.t):.4g}", size, rd.alive, rd.min, rd.max, f"{rd.mean:.4g}"]
            for rd, size in zip(trace.round_degrees, stats.removed_per_round)]
    print(tabulate(rows, headers=['t', 'delta_t', '|A_t|', 'alive', 'min deg', 'max deg', 'mean deg']))
    verdict = verify_observations(trace, s, sched)
    print(f"Survivors: {trace.survivors.size}/{g.n} ({stats.survivor_fraction:.4%}), "
          f"stabilized at {trace.stabilized_at}, observations {'hold' if verdict.ok else 'VIOLATED'}")
    if args.out:
        write_trace(trace, args.out, full=args.full)
        print(f"Trace written to '{args.out}'")


def cmd_match(args) -> None:
    g = _host(args)
    s = sample(g, resolve_p(args.p, g.d, eps=args.eps), args.seed)

    def exact():
        return max_matching_bipartite(s) if g.is_bipartite() else max_matching_exhaustive(s)

    match args.algorithm:
        case 'theorem1':
            m = theorem1_matching(s, args.eps)
        case 'karp_sipser':
            m = karp_sipser(s)
        case 'exact':
            m = exact()
    oracle_size = exact().size if args.oracle else None
    r = coverage_report(m, g.n, args.eps)
    print(f"{m}; guarantee {m.guarantee if m.guarantee is not None else '-'}; "
          f"fraction {r.covered_fraction:.4f}, uncovered {r.uncovered}, "
          f"(1-eps)n {'met' if r.meets_target else 'not met'}")
    if oracle_size is not None:
        print(f"Exact maximum: {oracle_size} edges (gap {2 * oracle_size - m.covered} vertices)")
    if args.out:
        write_matching(m, s, args.out, oracle_size=oracle_size)
        print(f"Matching written to '{args.out}'")


def cmd_experiment(args) -> None:
    print(f"\nWelcome to {bold('perclab')} (ver {perclab.__version__}): ", end='')
    print(f"a bond percolation laboratory for d-regular graphs.")
    print(f"Author: {perclab.__author__}.\n")
    cfg = load_config(args.config)
    print(f"Updated experiment parameters from file '{args.config}'")
    if args.out:
        out = Path(args.out)
        wr = WriteResults(dir_output_name=str(out.parent), filenm_records=out.name,
                          filenm_summary=f"{out.stem}_summary.json", save_traces=cfg.save_traces)
    else:
        wr = WriteResults(dir_output_name=cfg.output_directory, save_traces=cfg.save_traces)
        wr.prefix = cfg.name
    print("Running...")
    records, summary, traces = run_experiment(cfg)
    wr.write_all(records, summary, traces)
    print(format_summary(summary))
    print(f"\nperclab terminated. Results saved in directory '{wr.dir_output}'.")


def main(argv: list[str] | None = None) -> int:
    """ A command-line launcher for ``perclab``.

        Subcommands: ``gen``, ``percolate``, ``prune``, ``match``, ``experiment`` and ``bounds``.
        Exit codes: 0 on success, 2 on configuration, graph or output errors, 3 when a symbolic
        probability leaves [0, 1] at the chosen degree.
    """
    args = parse_args(argv)
    commands = {'gen': cmd_gen, 'percolate': cmd_percolate, 'prune': cmd_prune, 'match': cmd_match,
                'experiment': cmd_experiment, 'bounds': cmd_bounds}
    try:
        commands[args.command](args)
    except RegimeError as e:
        print(f"perclab: {e}")
        return EXIT_REGIME
    except (PercLabError, OSError) as e:
        print(f"perclab: {e}")
        return EXIT_USAGE
    return EXIT_OK


def bold(txt: str) -> str:
    """ Return `txt` with ANSI escape codes for bold typeface

    """
    return f"\033[1m{txt}\033[0m"


if __name__ == '__main__':
    # Required by the Python Multiprocessing Pool framework
    multiprocessing.freeze_support()
    exit(main())
