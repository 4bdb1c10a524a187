""" Experiment configuration: a TOML file with one ``[experiment]`` table

    Example contents of file *experiment.toml*::

        [experiment]
        name = 'q12_half'
        host = 'hypercube'
        dim = 12
        p = '1/2'
        algorithms = ['theorem1', 'karp_sipser', 'exact', 'prune']
        trials = 20
        base_seed = 1000

    Here is the list of all keys and their default values:

    =============================  ===============  ============================================================
    Key                            Defaults         Meaning
    =============================  ===============  ============================================================
    name                           'experiment'     Prefix of every output file
    host                           'hypercube'      hypercube, random_regular, product or file
    dim                            10               Hypercube dimension (host = hypercube)
    n                              0                Vertex count (host = random_regular)
    degree                         0                Degree (host = random_regular)
    host_seed                      0                Seed of the random regular host
    factors                        []               Product factors, tables with 'kind' (hypercube, cycle, complete)
                                                    and 'dim' or 'n' (host = product)
    graph_file                     ''               Graph text file (host = file)
    p                              '1/2'            Retention probability: '0.3', '3/4', '12/d', 'C/d', 'log^5(d)/d'
    algorithms                     ['theorem1']     Any of theorem1, karp_sipser, exact, prune
    eps                            0.1              Target uncovered fraction (theorem1, 'C/d')
    delta                          (unset)          Pruning slack; 1/ln ln d when unset
    trials                         10               Number of trials; trial i uses seed base_seed + i
    base_seed                      0                Seed of trial 0
    oracle                         false            Record the exact maximum matching size with every trial
    output_directory               'output'         Results are written to this directory
    multiprocessing_flag           false            Run trials in a multiprocessing pool
    multiprocessing_num_processes  4                Pool size (further capped by $PERCLAB_THREADS)
    save_traces                    false            Write each pruning trace next to the results
    expansion_samples              0                Centres sampled for the neighbourhood-expansion check (0: skip)
    expansion_threshold            (unset)          Pass threshold of the expansion statistic; report only when unset
    =============================  ===============  ============================================================
"""

from dataclasses import dataclass, field, fields
import os
import tomllib

from perclab.errors import ConfigError
from perclab.graphs import RegularGraph, cartesian_product, complete, cycle, hypercube, random_regular, read_graph

ALGORITHMS = ('theorem1', 'karp_sipser', 'exact', 'prune')
HOSTS = ('hypercube', 'random_regular', 'product', 'file')
FACTOR_KINDS = ('hypercube', 'cycle', 'complete')


@dataclass
class ExperimentConfig:
    """ One experiment: host, probability, algorithms, trials and output options """

    name: str = 'experiment'
    host: str = 'hypercube'
    dim: int = 10
    n: int = 0
    degree: int = 0
    host_seed: int = 0
    factors: list[dict] = field(default_factory=list)
    graph_file: str = ''
    p: str = '1/2'
    algorithms: list[str] = field(default_factory=lambda: ['theorem1'])
    eps: float = 0.1
    delta: float | None = None
    trials: int = 10
    base_seed: int = 0
    oracle: bool = False
    output_directory: str = 'output'
    multiprocessing_flag: bool = False
    multiprocessing_num_processes: int = 4
    save_traces: bool = False
    expansion_samples: int = 0
    expansion_threshold: float | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """ Raise :class:`ConfigError` on the first invalid value """
        if self.host not in HOSTS:
            raise ConfigError(f"host must be one of {', '.join(HOSTS)}, got '{self.host}'")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if unknown := [a for a in self.algorithms if a not in ALGORITHMS]:
            raise ConfigError(f"unknown algorithms {unknown}; choose from {', '.join(ALGORITHMS)}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError(f"algorithms listed twice: {self.algorithms}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials must be an integer >= 1, got {self.trials!r}")
        if not 0 < self.eps < 1:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.multiprocessing_num_processes < 1:
            raise ConfigError("multiprocessing_num_processes must be >= 1")
        if not isinstance(self.expansion_samples, int) or self.expansion_samples < 0:
            raise ConfigError(f"expansion_samples must be an integer >= 0, got {self.expansion_samples!r}")
        if self.expansion_threshold is not None and self.expansion_threshold < 0:
            raise ConfigError(f"expansion_threshold must be >= 0, got {self.expansion_threshold}")
        match self.host:
            case 'random_regular' if self.n < 1 or self.degree < 1:
                raise ConfigError("host 'random_regular' needs positive 'n' and 'degree'")
            case 'product' if not self.factors:
                raise ConfigError("host 'product' needs a non-empty 'factors' list")
            case 'file' if not self.graph_file:
                raise ConfigError("host 'file' needs 'graph_file'")
        for f in self.factors:
            if not isinstance(f, dict) or f.get('kind') not in FACTOR_KINDS:
                raise ConfigError(f"each factor needs 'kind' in {', '.join(FACTOR_KINDS)}, got {f!r}")


def load_config(filename: str | os.PathLike) -> ExperimentConfig:
    """ Read the ``[experiment]`` table of a TOML file; keys left out keep their defaults.

        :param filename: TOML file
        :type filename: str | os.PathLike
        :return: the validated configuration
        :rtype: ExperimentConfig
    """
    try:
        with open(filename, 'rb') as fp:
            _params = tomllib.load(fp)
    except FileNotFoundError:
        raise ConfigError(f"config file '{filename}' not found") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML syntax in '{filename}':\n{e}") from None
    table = _params.get('experiment')
    if not isinstance(table, dict):
        raise ConfigError(f"'{filename}' has no [experiment] table")
    known = {f.name for f in fields(ExperimentConfig)}
    if unknown := sorted(set(table) - known):
        raise ConfigError(f"unknown keys in '{filename}': {', '.join(unknown)}")
    if 'p' in table:
        table['p'] = str(table['p'])
    try:
        return ExperimentConfig(**table)
    except TypeError as e:
        raise ConfigError(f"'{filename}': {e}") from None


def _factor(spec: dict) -> RegularGraph:
    match spec['kind']:
        case 'hypercube':
            return hypercube(int(spec.get('dim', 1)))
        case 'cycle':
            return cycle(int(spec.get('n', 3)))
        case 'complete':
            return complete(int(spec.get('n', 2)))


def build_host(cfg: ExperimentConfig) -> RegularGraph:
    """ The host graph described by `cfg` """
    match cfg.host:
        case 'hypercube':
            return hypercube(cfg.dim)
        case 'random_regular':
            return random_regular(cfg.n, cfg.degree, cfg.host_seed)
        case 'product':
            return cartesian_product([_factor(f) for f in cfg.factors])
        case 'file':
            return read_graph(cfg.graph_file)
