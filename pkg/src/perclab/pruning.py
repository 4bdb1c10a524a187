""" The degree-pruning process on a percolated sample, its trace, and checks of its structure

    Round 1 removes A_1, the vertices whose sample degree leaves the window [(1 - delta_1)dp, (1 + delta_1)dp].
    Every later round t removes A_t, the vertices still present whose degree in the remaining induced
    subgraph is below (1 - delta_t)dp, with delta_t = t * delta / tau and tau = floor(ln d).
    Rounds always run to tau, so traces have a fixed shape.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math
import os

import numpy as np

from perclab.bounds import lemma3_size_bound
from perclab.errors import ScheduleError, TraceMismatchError, WitnessError
from perclab.graphs import distances_from
from perclab.percolation import PercolatedSample, Probability
from perclab.settings import get_logger

logger = get_logger(__name__)


def default_delta(d: int) -> float:
    """ 1 / ln(ln d), clamped to (0, 0.5] """
    if d < 3:
        raise ScheduleError(f"default delta needs d >= 3, got {d}")
    return min(0.5, 1 / math.log(math.log(d)))


@dataclass(frozen=True)
class PruneSchedule:
    """ Tolerances of the pruning rounds """

    #: Degree of the host
    d: int
    #: Final slack delta, in (0, 1)
    delta: float
    #: Number of rounds, floor(ln d)
    tau: int
    #: delta_t for t = 1..tau (index 0 holds delta_1)
    delta_t: tuple[float, ...]
    #: The same tolerances as exact rationals of the decimal delta
    exact_delta_t: tuple[Fraction, ...] = field(default=(), repr=False, compare=False)

    def delta_at(self, t: int) -> float:
        return self.delta_t[t - 1]

    def exact_at(self, t: int) -> Fraction:
        return self.exact_delta_t[t - 1]


def _exact(x: float | Fraction) -> Fraction:
    """ `x` read as the decimal it prints as, so 0.3 becomes 3/10 """
    return x if isinstance(x, Fraction) else Fraction(str(x))


def make_schedule(d: int, delta: float | None = None) -> PruneSchedule:
    """ Schedule with tau = floor(ln d) rounds and delta_t = t * delta / tau.

        :param d: host degree, d >= 3
        :type d: int
        :param delta: final slack in (0, 1); :func:`default_delta` when omitted
        :type delta: float | None
        :return: the schedule
        :rtype: PruneSchedule
    """
    if d < 3:
        raise ScheduleError(f"pruning needs d >= 3 so that floor(ln d) >= 1, got d={d}")
    if delta is None:
        delta = default_delta(d)
    if not 0 < delta < 1:
        raise ScheduleError(f"delta must lie in (0, 1), got {delta}")
    tau = math.floor(math.log(d))
    exact = tuple(_exact(delta) * t / tau for t in range(1, tau + 1))
    return PruneSchedule(d, delta, tau, tuple(float(x) for x in exact), exact)


@dataclass(frozen=True)
class RoundDegrees:
    """ Induced degrees of the vertices present at the start of a round """

    t: int
    alive: int
    min: int
    max: int
    mean: float


@dataclass
class PruneTrace:
    """ Full record of one run of the pruning process """

    #: Removed sets A_1..A_tau (sorted vertex ids)
    removed: list[np.ndarray]
    #: Surviving vertices V(H)
    survivors: np.ndarray
    #: First round t with A_t empty, or None
    stabilized_at: int | None
    #: Per-round degree summaries
    round_degrees: list[RoundDegrees] = field(default_factory=list)
    #: Provenance: vertex count, degree, p, seed, delta, tau
    n: int = 0
    d: int = 0
    p: Probability = 0
    seed: int = 0
    delta: float = 0.0
    tau: int = 0

    def round_of(self) -> np.ndarray:
        """ Round in which each vertex was removed (0 for survivors) """
        rounds = np.zeros(self.n, dtype=np.int64)
        for t, a in enumerate(self.removed, start=1):
            rounds[a] = t
        return rounds

    def removed_mask(self, t: int) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.removed[t - 1]] = True
        return mask

    def survivor_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.survivors] = True
        return mask


def _cutoffs(dp: Probability, delta_t: float | Fraction, delta_1: float | Fraction) -> tuple[int, int]:
    """ Integer degree cut-offs: round-t keeps degree >= low, round 1 also needs degree <= high.

        The window is closed. With dp rational its ends are computed exactly, float tolerances being
        read as decimals; otherwise in floating point. dp = 0 gives an empty window, so round 1 removes
        every vertex.
    """
    if dp <= 0:
        return 1, 0
    if isinstance(dp, Fraction):
        low = math.ceil((1 - _exact(delta_t)) * dp)
        high = math.floor((1 + _exact(delta_1)) * dp)
    else:
        low = math.ceil((1 - delta_t) * dp)
        high = math.floor((1 + delta_1) * dp)
    return low, high


def prune(s: PercolatedSample, sched: PruneSchedule) -> PruneTrace:
    """ Run the pruning process on `s`.

        Induced degrees are maintained incrementally: removing a vertex decrements the counters of its
        kept neighbours that are still present. Decisions of round t use the counters as they stand at
        the end of round t-1.

        :param s: percolated sample
        :type s: PercolatedSample
        :param sched: schedule built for the host degree
        :type sched: PruneSchedule
        :return: the trace
        :rtype: PruneTrace
    """
    g = s.host
    if sched.d != g.d:
        raise TraceMismatchError(f"schedule built for d={sched.d}, sample host has d={g.d}")
    if s.dp <= 0:
        logger.warning(f"prune: dp = 0 on {g.label}; every vertex falls in A_1")
    kept = s.kept_mask
    degree = s.degrees.astype(np.int64)
    alive = np.ones(g.n, dtype=bool)
    removed, summaries = [], []
    stabilized_at = None
    for t in range(1, sched.tau + 1):
        low, high = _cutoffs(s.dp, sched.exact_at(t), sched.exact_at(1))
        alive_ids = np.flatnonzero(alive)
        if alive_ids.size:
            current = degree[alive_ids]
            summaries.append(RoundDegrees(t, int(alive_ids.size), int(current.min()),
                                          int(current.max()), float(current.mean())))
        else:
            summaries.append(RoundDegrees(t, 0, 0, 0, 0.0))
        if t == 1:
            out = alive & ((degree < low) | (degree > high))
        else:
            out = alive & (degree < low)
        a_t = np.flatnonzero(out)
        removed.append(a_t)
        if a_t.size == 0 and stabilized_at is None:
            stabilized_at = t
        alive[a_t] = False
        for i in range(g.d):
            nbrs, eids = g.slot(a_t, i)
            hit = nbrs[kept[eids] & alive[nbrs]]
            np.subtract.at(degree, hit, 1)
        logger.debug(f"prune {g.label} seed={s.seed}: round {t}, cut-off {low}, |A_{t}| = {a_t.size}")
    survivors = np.flatnonzero(alive)
    logger.info(f"prune {g.label}, p={s.p}, seed={s.seed}, delta={sched.delta}: "
                f"{survivors.size}/{g.n} survive, stabilized at {stabilized_at}")
    return PruneTrace(removed, survivors, stabilized_at, summaries,
                      g.n, g.d, s.p, s.seed, sched.delta, sched.tau)


def induced_degrees(s: PercolatedSample, alive: np.ndarray) -> np.ndarray:
    """ Degree of every vertex in G_p[alive] (zero outside `alive`), recounted from the kept edges """
    lo, hi = s.host.edge_arrays(s.kept_ids)
    keep = alive[lo] & alive[hi]
    return np.bincount(np.concatenate([lo[keep], hi[keep]]), minlength=s.n)


def _check_pairing(trace: PruneTrace, s: PercolatedSample, sched: PruneSchedule):
    if (trace.n, trace.d, trace.seed) != (s.n, s.d, s.seed) or trace.p != s.p:
        raise TraceMismatchError("trace was not produced from this sample")
    if (trace.delta, trace.tau) != (sched.delta, sched.tau):
        raise TraceMismatchError("trace was not produced with this schedule")


@dataclass
class ObservationVerdict:
    """ Outcome of :func:`verify_observations` """

    disjoint: bool
    survivor_identity: bool
    #: None when A_tau is non-empty (the degree window is then not claimed)
    degree_window: bool | None
    #: Survivors whose induced degree falls outside [(1 - delta)dp, (1 + delta)dp]
    violations: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.disjoint and self.survivor_identity and self.degree_window is not False


def verify_observations(trace: PruneTrace, s: PercolatedSample, sched: PruneSchedule) -> ObservationVerdict:
    """ Check pairwise disjointness of A_1..A_tau, the survivor identity, and, when A_tau is empty, that every
        survivor's induced degree lies in [(1 - delta)dp, (1 + delta)dp].

        :param trace: trace produced by :func:`prune` from (`s`, `sched`)
        :param s: the sample
        :param sched: the schedule
        :return: verdict, listing any violating vertex
        :rtype: ObservationVerdict
    """
    _check_pairing(trace, s, sched)
    counts = np.zeros(s.n, dtype=np.int64)
    for a in trace.removed:
        np.add.at(counts, a, 1)
    disjoint = bool(np.all(counts <= 1))
    expected = np.flatnonzero(counts == 0)
    identity = np.array_equal(np.sort(trace.survivors), expected)
    window = None
    violations = []
    if trace.removed[-1].size == 0:
        alive = trace.survivor_mask()
        degree = induced_degrees(s, alive)[trace.survivors]
        low, high = _cutoffs(s.dp, sched.delta, sched.delta)
        bad = (degree < low) | (degree > high)
        violations = trace.survivors[bad].tolist()
        window = not violations
    verdict = ObservationVerdict(disjoint, identity, window, violations)
    if not verdict.ok:
        logger.warning(f"verify_observations: seed={s.seed}: {verdict}")
    return verdict


@dataclass
class WitnessStep:
    """ One set S_i of a witness chain """

    #: Index i of S_i (distance of its members from v)
    i: int
    #: Round whose removed set contains S_i, namely t - i
    round: int
    #: Members of S_i
    members: list[int]
    #: Lower bound |S_{i-1}| (delta dp / ln d - (i-1)) / i implied by the previous step (None for i = 1)
    recurrence_bound: float | None = None
    #: Whether delta dp / ln d >= 2(i-1), the numeric hypothesis of the recurrence
    hypothesis_met: bool | None = None


@dataclass
class WitnessChain:
    """ Constructive replay of the witness argument for a vertex v in A_t """

    v: int
    t: int
    steps: list[WitnessStep]
    #: Degree-gap bound delta dp / floor(ln d) that |S_1| must exceed
    gap: float
    #: Power and product lower bounds on |X| (asymptotic; reported for comparison)
    size_bound_power: float
    size_bound_product: float

    @property
    def X(self) -> list[int]:
        """ Final set S_{t-1}, contained in A_1 """
        return self.steps[-1].members

    @property
    def gap_met(self) -> bool:
        """ |S_1| > delta dp / tau """
        return len(self.steps[0].members) > self.gap

    @property
    def recurrence_holds(self) -> bool:
        """ True if every step under its hypothesis meets the recurrence bound """
        return all(len(step.members) >= step.recurrence_bound for step in self.steps
                   if step.recurrence_bound is not None and step.hypothesis_met)


def lemma3_witness(trace: PruneTrace, s: PercolatedSample, sched: PruneSchedule, v: int, t: int) -> WitnessChain:
    """ Build the chain S_1, ..., S_{t-1} certifying why `v` was removed in round `t`.

        S_1 is the set of kept neighbours of v in A_{t-1} (more than delta dp / tau of them by the degree gap).
        S_{i+1} collects, for every s in S_i, the kept neighbours of s in A_{t-i-1} that lie at host distance
        i + 1 from v. The last set S_{t-1} lies in A_1, so each member's sample degree is outside
        [(1 - delta_1)dp, (1 + delta_1)dp].

        :param trace: trace produced by :func:`prune` from (`s`, `sched`)
        :param s: the sample
        :param sched: the schedule
        :param v: a vertex of A_t
        :type v: int
        :param t: round, 2 <= t <= tau
        :type t: int
        :return: the chain with the per-step recurrence bounds
        :rtype: WitnessChain
    """
    _check_pairing(trace, s, sched)
    if not 2 <= t <= trace.tau:
        raise WitnessError(f"round {t} out of range [2, {trace.tau}]")
    rounds = trace.round_of()
    if rounds[v] != t:
        raise WitnessError(f"vertex {v} is not in A_{t}")
    g = s.host
    kept = s.kept_mask
    dist = distances_from(g, v, t)
    dp = float(s.dp)
    ln_d = math.log(g.d)
    rate = sched.delta * dp / ln_d

    def _kept_neighbours_in(x: int, round_: int) -> np.ndarray:
        nbrs, eids = g.neighbors(x), g.incident_edges(x)
        return nbrs[kept[eids] & (rounds[nbrs] == round_)]

    steps = [WitnessStep(1, t - 1, sorted(_kept_neighbours_in(v, t - 1).tolist()))]
    for i in range(1, t - 1):
        prev = steps[-1].members
        found = set()
        for x in prev:
            y = _kept_neighbours_in(x, t - i - 1)
            found.update(y[dist[y] == i + 1].tolist())
        bound = len(prev) * (rate - i) / (i + 1)
        steps.append(WitnessStep(i + 1, t - i - 1, sorted(found), bound, rate >= 2 * i))
    power, product = lemma3_size_bound(g.d, float(s.p), sched.delta, t)
    chain = WitnessChain(v, t, steps, sched.delta * dp / sched.tau, power, product)
    logger.debug(f"lemma3_witness v={v} t={t}: sizes {[len(st.members) for st in steps]}")
    return chain


@dataclass
class PruneStatistics:
    """ Sizes produced by one pruning run """

    removed_per_round: list[int]
    removed_total: int
    survivor_fraction: float


def prune_statistics(trace: PruneTrace) -> PruneStatistics:
    sizes = [int(a.size) for a in trace.removed]
    return PruneStatistics(sizes, sum(sizes), trace.survivors.size / trace.n if trace.n else 0.0)


def write_trace(trace: PruneTrace, path: str | os.PathLike, *, full: bool = False) -> None:
    """ Export a trace: header ``d p delta tau seed``, lines ``t |A_t|``, then the survivor count.

        With `full`, each round line is followed by a line listing the members of A_t.
    """
    with open(path, 'wt') as fp:
        fp.write(f"{trace.d} {trace.p} {trace.delta} {trace.tau} {trace.seed}\n")
        for t, a in enumerate(trace.removed, start=1):
            fp.write(f"{t} {a.size}\n")
            if full:
                fp.write(' '.join(str(x) for x in a.tolist()) + '\n')
        fp.write(f"{trace.survivors.size}\n")
