""" Matchings in percolated samples

    * :func:`theorem1_matching` - high-degree cut, proper edge colouring of what is left, largest colour class
    * :func:`karp_sipser` - pendant-first greedy heuristic, used as an empirical comparator
    * :func:`max_matching_bipartite` - exact maximum by Hopcroft-Karp phases, with an augmenting-path certificate
    * :func:`max_matching_exhaustive` - exact maximum by bitmask search on small components
"""

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
import math
import os
from typing import Iterable

import numpy as np

from perclab.bounds import TheoremConstants, solve_constants
from perclab.errors import ComponentTooLargeError, NotBipartiteError
from perclab.graphs import bfs_components
from perclab.percolation import PercolatedSample, as_alive_mask
from perclab.settings import SETTINGS, Settings, get_logger

__all__ = ['TheoremConstants', 'solve_constants', 'HighDegreeCut', 'high_degree_cut', 'EdgeColoring',
           'misra_gries_color', 'MatchingResult', 'theorem1_matching', 'karp_sipser', 'max_matching_bipartite',
           'has_augmenting_path', 'max_matching_exhaustive', 'exhaustive_component_sizes', 'verify_matching',
           'verify_coloring', 'CoverageReport', 'coverage_report', 'write_matching']

logger = get_logger(__name__)


@dataclass
class HighDegreeCut:
    """ Vertices of sample degree at least (1 + delta)C and the kept edges touching them """

    #: Sorted ids of V0
    V0: np.ndarray
    #: Sorted ids of kept edges with an endpoint in V0
    E0: np.ndarray
    #: Real threshold (1 + delta)C
    threshold: float
    #: Integer cut-off applied to degrees, ceil(threshold)
    min_degree: int


def high_degree_cut(s: PercolatedSample, consts: TheoremConstants) -> HighDegreeCut:
    """ V0 = {v : deg(v) >= ceil((1 + delta)C)} and E0 = kept edges touching V0.

        :param s: sample
        :type s: PercolatedSample
        :param consts: constants from :func:`solve_constants` (or chosen by hand)
        :type consts: TheoremConstants
        :return: the cut
        :rtype: HighDegreeCut
    """
    threshold = (1 + consts.delta) * consts.C
    min_degree = math.ceil(threshold)
    high = s.degrees >= min_degree
    lo, hi = s.host.edge_arrays(s.kept_ids)
    E0 = s.kept_ids[high[lo] | high[hi]]
    return HighDegreeCut(np.flatnonzero(high), E0, threshold, min_degree)


@dataclass
class EdgeColoring:
    """ A proper edge colouring of an induced subgraph of a sample """

    #: Colour of each coloured edge, keyed by edge id
    color: dict[int, int]
    #: Number of distinct colours used
    num_colors: int
    #: Maximum degree of the coloured subgraph
    max_degree: int

    def classes(self) -> dict[int, list[int]]:
        """ Edge ids of each colour class, sorted """
        out: dict[int, list[int]] = {}
        for e in sorted(self.color):
            out.setdefault(self.color[e], []).append(e)
        return out


class _MisraGries:
    """ Working state of one colouring run: ``at[v][c]`` is the neighbour joined to v by colour c """

    def __init__(self, n: int, num_colors: int):
        self.num_colors = num_colors
        self.at: list[dict[int, int]] = [{} for _ in range(n)]

    def free(self, v: int, c: int) -> bool:
        return c not in self.at[v]

    def first_free(self, v: int) -> int:
        return next(c for c in range(self.num_colors) if c not in self.at[v])

    def colour_of(self, u: int, v: int) -> int | None:
        for c, w in self.at[u].items():
            if w == v:
                return c
        return None

    def set(self, u: int, v: int, c: int):
        self.at[u][c] = v
        self.at[v][c] = u

    def unset(self, u: int, v: int):
        c = self.colour_of(u, v)
        if c is not None:
            del self.at[u][c]
            del self.at[v][c]

    def fan(self, u: int, v: int) -> list[int]:
        """ Maximal fan of u starting at the uncoloured edge (u, v) """
        fan = [v]
        in_fan = {v}
        while True:
            last = fan[-1]
            for c in range(self.num_colors):
                w = self.at[u].get(c)
                if w is not None and w not in in_fan and self.free(last, c):
                    fan.append(w)
                    in_fan.add(w)
                    break
            else:
                return fan

    def invert_path(self, u: int, c: int, d: int):
        """ Swap colours c and d along the maximal cd-path starting at u (whose first edge has colour d) """
        path = []
        x, cur = u, d
        while (y := self.at[x].get(cur)) is not None:
            path.append((x, y, cur))
            x, cur = y, (c if cur == d else d)
        for x, y, col in path:
            del self.at[x][col]
            del self.at[y][col]
        for x, y, col in path:
            self.set(x, y, c if col == d else d)

    def colour_edge(self, u: int, v: int):
        fan = self.fan(u, v)
        c = self.first_free(u)
        d = self.first_free(fan[-1])
        self.invert_path(u, c, d)
        # longest prefix that is still a fan; the first of its vertices with d free ends the rotation
        k = None
        for i, w in enumerate(fan):
            if i > 0:
                col = self.colour_of(u, w)
                if col is None or not self.free(fan[i - 1], col):
                    break
            if self.free(w, d):
                k = i
                break
        if k is None:
            raise RuntimeError(f"Misra-Gries rotation failed at edge ({u}, {v})")
        for i in range(k):
            nxt = self.colour_of(u, fan[i + 1])
            self.unset(u, fan[i + 1])
            self.set(u, fan[i], nxt)
        self.set(u, fan[k], d)


def misra_gries_color(s: PercolatedSample, alive: Iterable[int] | np.ndarray | None = None) -> EdgeColoring:
    """ Properly colour the kept edges induced on `alive` with at most Delta + 1 colours.

        Edges are coloured one at a time in edge-id order; when no colour is free at both ends, a fan
        around one endpoint is rotated after inverting a two-coloured path.

        :param s: sample
        :type s: PercolatedSample
        :param alive: vertex set inducing the subgraph (default: all vertices)
        :return: the colouring
        :rtype: EdgeColoring
    """
    alive = np.ones(s.n, dtype=bool) if alive is None else as_alive_mask(alive, s.n)
    lo, hi = s.host.edge_arrays(s.kept_ids)
    keep = alive[lo] & alive[hi]
    ids, lo, hi = s.kept_ids[keep], lo[keep], hi[keep]
    degree = np.bincount(np.concatenate([lo, hi]), minlength=s.n)
    max_degree = int(degree.max()) if degree.size else 0
    state = _MisraGries(s.n, max_degree + 1)
    for u, v in zip(lo.tolist(), hi.tolist()):
        state.colour_edge(u, v)
    color = {}
    for e, u, v in zip(ids.tolist(), lo.tolist(), hi.tolist()):
        color[e] = state.colour_of(u, v)
    num_colors = len(set(color.values()))
    logger.debug(f"misra_gries_color: {len(color)} edges, max degree {max_degree}, {num_colors} colours")
    return EdgeColoring(color, num_colors, max_degree)


@dataclass
class MatchingResult:
    """ A matching of a sample and how it was obtained """

    #: Matched edge ids
    edges: frozenset[int]
    #: Algorithm tag: theorem1, karp_sipser, exact or exhaustive
    algorithm: str
    #: Analytic lower bound on the number of covered vertices, when the algorithm has one
    guarantee: int | None = None
    #: Construction details (sizes of intermediate sets, constants, phase counts)
    metadata: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.edges)

    @property
    def covered(self) -> int:
        return 2 * len(self.edges)

    def __str__(self):
        return f"{self.algorithm}: {self.size} edges, {self.covered} vertices covered"


def theorem1_matching(s: PercolatedSample, eps: float, consts: TheoremConstants | None = None) -> MatchingResult:
    """ Matching by high-degree cut, edge colouring and largest colour class.

        With H the sample induced on V \\ V0, any proper colouring of H with k colours has a class of at least
        ceil(|E(H)|/k) edges, so the result covers at least 2 ceil(|E(H)|/k) vertices.

        :param s: sample
        :type s: PercolatedSample
        :param eps: target uncovered fraction
        :type eps: float
        :param consts: constants to use instead of ``solve_constants(eps)``
        :type consts: TheoremConstants | None
        :return: the matching; ``guarantee`` holds the pigeonhole bound
        :rtype: MatchingResult
    """
    consts = consts or solve_constants(eps)
    if s.d < consts.C or float(s.dp) < consts.C:
        logger.warning(f"theorem1_matching: d={s.d}, dp={float(s.dp):.4g} below C={consts.C}; "
                       f"outside the regime of the coverage guarantee")
    cut = high_degree_cut(s, consts)
    alive = np.ones(s.n, dtype=bool)
    alive[cut.V0] = False
    coloring = misra_gries_color(s, alive)
    E_H = len(coloring.color)
    if E_H:
        classes = coloring.classes()
        best = max(sorted(classes), key=lambda c: len(classes[c]))
        edges = frozenset(classes[best])
        guarantee = 2 * math.ceil(E_H / coloring.num_colors)
    else:
        best, edges, guarantee = None, frozenset(), 0
    metadata = {'eps': eps, 'delta': consts.delta, 'C': consts.C, 'threshold': cut.threshold,
                'V0': int(cut.V0.size), 'E0': int(cut.E0.size), 'E_H': E_H, 'E_Gp': s.kept_count,
                'num_colors': coloring.num_colors, 'max_degree_H': coloring.max_degree, 'color': best,
                'guarantee_real': 2 * E_H / cut.threshold}
    m = MatchingResult(edges, 'theorem1', guarantee, metadata)
    logger.info(f"theorem1_matching seed={s.seed}: |V0|={cut.V0.size}, |E(H)|={E_H}, "
                f"{coloring.num_colors} colours, covered {m.covered} >= {guarantee}")
    return m


def karp_sipser(s: PercolatedSample, seed: int | None = None) -> MatchingResult:
    """ Karp-Sipser heuristic: match a pendant edge while one exists, otherwise a uniformly random edge.

        Random edges are drawn by scanning a seeded permutation of the kept edges for the next edge whose
        endpoints are both still present. Pendant vertices are served first-in first-out.

        :param s: sample
        :type s: PercolatedSample
        :param seed: seed of the random-edge phase (default: the sample seed)
        :type seed: int | None
        :return: the matching
        :rtype: MatchingResult
    """
    seed = s.seed if seed is None else seed
    adjacency = s.adjacency()
    degree = [len(a) for a in adjacency]
    alive = [True] * s.n
    lo, hi = s.host.edge_arrays(s.kept_ids)
    order = np.random.default_rng(seed).permutation(s.kept_count)
    order_lo, order_hi, order_ids = lo[order].tolist(), hi[order].tolist(), s.kept_ids[order].tolist()
    pendant = deque(v for v in range(s.n) if degree[v] == 1)
    matched = []
    pendant_count = random_count = 0
    pointer = 0

    def _remove(x: int):
        alive[x] = False
        for y in adjacency[x]:
            if alive[y]:
                degree[y] -= 1
                if degree[y] == 1:
                    pendant.append(y)

    while True:
        if pendant:
            v = pendant.popleft()
            if not alive[v] or degree[v] != 1:
                continue
            u = next(y for y in adjacency[v] if alive[y])
            matched.append(s.host.edge_id(u, v))
            pendant_count += 1
        else:
            while pointer < len(order_ids) and not (alive[order_lo[pointer]] and alive[order_hi[pointer]]):
                pointer += 1
            if pointer == len(order_ids):
                break
            u, v = order_lo[pointer], order_hi[pointer]
            matched.append(order_ids[pointer])
            random_count += 1
        _remove(u)
        _remove(v)
    m = MatchingResult(frozenset(matched), 'karp_sipser', None,
                       {'seed': seed, 'pendant_steps': pendant_count, 'random_steps': random_count})
    logger.info(f"karp_sipser seed={seed}: {m.size} edges ({pendant_count} pendant, {random_count} random)")
    return m


def _sides(s: PercolatedSample) -> np.ndarray:
    try:
        return s.host.bipartition()
    except NotBipartiteError:
        raise NotBipartiteError(f"exact matching needs a bipartite host; {s.host.label} has an odd cycle") from None


def _mates(m: MatchingResult, s: PercolatedSample) -> list[int]:
    mate = [-1] * s.n
    for e in m.edges:
        u, v = s.host.edge_endpoints(e)
        mate[u], mate[v] = v, u
    return mate


def has_augmenting_path(m: MatchingResult, s: PercolatedSample) -> bool:
    """ Full alternating breadth-first search from every free vertex of side 0 of a bipartite host.

        :return: True if an augmenting path exists, i.e. `m` is not maximum
        :rtype: bool
    """
    side = _sides(s).tolist()
    adjacency = s.adjacency()
    mate = _mates(m, s)
    seen = [False] * s.n
    queue = deque(v for v in range(s.n) if side[v] == 0 and mate[v] < 0)
    for v in queue:
        seen[v] = True
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if seen[v] or mate[u] == v:
                continue
            seen[v] = True
            w = mate[v]
            if w < 0:
                return True
            if not seen[w]:
                seen[w] = True
                queue.append(w)
    return False


def max_matching_bipartite(s: PercolatedSample) -> MatchingResult:
    """ Maximum matching of a sample of a bipartite host, by Hopcroft-Karp phases.

        Each phase layers the graph by breadth-first search from the free left vertices and then augments
        along vertex-disjoint shortest paths found by an iterative depth-first search. The result is
        certified by :func:`has_augmenting_path`.

        :param s: sample of a bipartite host
        :type s: PercolatedSample
        :return: a maximum matching; ``metadata['certified']`` records the certificate
        :rtype: MatchingResult
    """
    side = _sides(s).tolist()
    adjacency = s.adjacency()
    left = [u for u in range(s.n) if side[u] == 0 and adjacency[u]]
    inf = s.n + 1
    mate = [-1] * s.n
    dist = [inf] * s.n
    phases = 0

    def _layer() -> int:
        queue = deque()
        for u in left:
            if mate[u] < 0:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = inf
        free_dist = inf
        while queue:
            u = queue.popleft()
            if dist[u] >= free_dist:
                continue
            for v in adjacency[u]:
                w = mate[v]
                if w < 0:
                    if free_dist == inf:
                        free_dist = dist[u] + 1
                elif dist[w] == inf:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return free_dist

    def _augment(root: int, free_dist: int, ptr: dict[int, int]) -> bool:
        stack, via = [root], []
        while stack:
            u = stack[-1]
            pushed = False
            while ptr.get(u, 0) < len(adjacency[u]):
                v = adjacency[u][ptr.get(u, 0)]
                ptr[u] = ptr.get(u, 0) + 1
                w = mate[v]
                if w < 0:
                    if free_dist == dist[u] + 1:
                        via.append(v)
                        for x, y in zip(stack, via):
                            mate[x], mate[y] = y, x
                        return True
                elif dist[w] == dist[u] + 1:
                    via.append(v)
                    stack.append(w)
                    pushed = True
                    break
            if not pushed:
                dist[u] = inf
                stack.pop()
                if via:
                    via.pop()
        return False

    while (free_dist := _layer()) < inf:
        phases += 1
        ptr: dict[int, int] = {}
        for u in left:
            if mate[u] < 0:
                _augment(u, free_dist, ptr)
    edges = frozenset(s.host.edge_id(u, mate[u]) for u in left if mate[u] >= 0)
    m = MatchingResult(edges, 'exact', None, {'phases': phases})
    m.metadata['certified'] = not has_augmenting_path(m, s)
    logger.info(f"max_matching_bipartite seed={s.seed}: {m.size} edges after {phases} phases")
    return m


def _component_matching(vertices: list[int], adjacency: list[list[int]]) -> list[tuple[int, int]]:
    """ Maximum matching of one small component by memoised search over vertex subsets """
    index = {v: i for i, v in enumerate(vertices)}
    nbr_mask = [sum(1 << index[y] for y in adjacency[v]) for v in vertices]

    @lru_cache(maxsize=None)
    def best(mask: int) -> int:
        if mask == 0:
            return 0
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        value = best(rest)
        options = nbr_mask[i] & rest
        while options:
            j = (options & -options).bit_length() - 1
            options &= options - 1
            value = max(value, 1 + best(rest & ~(1 << j)))
        return value

    pairs = []
    mask = (1 << len(vertices)) - 1
    while mask:
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        target = best(mask)
        if best(rest) == target:
            mask = rest
            continue
        options = nbr_mask[i] & rest
        while options:
            j = (options & -options).bit_length() - 1
            options &= options - 1
            if 1 + best(rest & ~(1 << j)) == target:
                pairs.append((vertices[i], vertices[j]))
                mask = rest & ~(1 << j)
                break
    return pairs


def exhaustive_component_sizes(s: PercolatedSample) -> list[int]:
    """ Vertex counts of the components of the sample that carry at least one edge """
    adjacency = s.adjacency()
    return [len(c) for c in bfs_components(s.n, adjacency) if len(c) > 1]


def max_matching_exhaustive(s: PercolatedSample, *, settings: Settings | None = None) -> MatchingResult:
    """ Maximum matching by exhaustive search, component by component.

        Works on any host but only when every component has at most ``exhaustive_component_limit`` vertices.

        :param s: sample
        :type s: PercolatedSample
        :param settings: settings supplying the component limit (default: lab settings)
        :type settings: Settings | None
        :return: a maximum matching
        :rtype: MatchingResult
    """
    limit = (settings or SETTINGS).exhaustive_component_limit
    adjacency = s.adjacency()
    components = [c for c in bfs_components(s.n, adjacency) if len(c) > 1]
    if components and (largest := max(len(c) for c in components)) > limit:
        raise ComponentTooLargeError(f"a component has {largest} vertices, above the exhaustive limit of {limit}")
    edges = []
    for comp in components:
        edges.extend(s.host.edge_id(u, v) for u, v in _component_matching(comp, adjacency))
    return MatchingResult(frozenset(edges), 'exhaustive', None, {'components': len(components)})


@dataclass
class MatchingVerdict:
    #: No vertex is covered twice
    disjoint: bool
    #: Every matched edge is a kept edge
    within_sample: bool
    #: Offending edge ids
    bad_edges: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.disjoint and self.within_sample


def verify_matching(m: MatchingResult, s: PercolatedSample) -> MatchingVerdict:
    """ Check vertex-disjointness by marking endpoints, and that every edge is kept """
    used = np.zeros(s.n, dtype=bool)
    disjoint, within, bad = True, True, []
    for e in sorted(m.edges):
        if not 0 <= e < s.host.m or not s.contains(e):
            within = False
            bad.append(e)
            continue
        u, v = s.host.edge_endpoints(e)
        if used[u] or used[v]:
            disjoint = False
            bad.append(e)
        used[u] = used[v] = True
    return MatchingVerdict(disjoint, within, bad)


@dataclass
class ColoringVerdict:
    #: Edges sharing a vertex carry distinct colours
    proper: bool
    #: At most Delta + 1 colours
    within_bound: bool
    #: Every induced kept edge is coloured, and nothing else
    complete: bool
    #: Vertices at which two edges share a colour
    conflicts: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.proper and self.within_bound and self.complete


def verify_coloring(c: EdgeColoring, s: PercolatedSample, alive: Iterable[int] | np.ndarray | None = None) -> ColoringVerdict:
    """ Per-vertex scan for repeated colours, plus the Delta + 1 bound and completeness """
    alive = np.ones(s.n, dtype=bool) if alive is None else as_alive_mask(alive, s.n)
    lo, hi = s.host.edge_arrays(s.kept_ids)
    keep = alive[lo] & alive[hi]
    expected = set(s.kept_ids[keep].tolist())
    degree = np.bincount(np.concatenate([lo[keep], hi[keep]]), minlength=s.n)
    max_degree = int(degree.max()) if degree.size else 0
    seen: list[set[int]] = [set() for _ in range(s.n)]
    conflicts = set()
    for e, col in c.color.items():
        for x in s.host.edge_endpoints(e):
            if col in seen[x]:
                conflicts.add(x)
            seen[x].add(col)
    used = set(c.color.values())
    return ColoringVerdict(not conflicts, len(used) <= max_degree + 1 and c.num_colors == len(used),
                           set(c.color) == expected, sorted(conflicts))


@dataclass
class CoverageReport:
    covered: int
    n: int
    covered_fraction: float
    uncovered: int
    #: covered >= (1 - eps) n
    meets_target: bool


def coverage_report(m: MatchingResult | int, n: int, eps: float) -> CoverageReport:
    """ Covered fraction, uncovered count and whether at least (1 - eps)n vertices are covered.

        :param m: matching, or a covered-vertex count
        :type m: MatchingResult | int
        :param n: vertex count
        :type n: int
        :param eps: target uncovered fraction
        :type eps: float
        :return: the report
        :rtype: CoverageReport
    """
    covered = m.covered if isinstance(m, MatchingResult) else int(m)
    fraction = covered / n if n else 1.0
    return CoverageReport(covered, n, fraction, n - covered, covered >= (1 - eps) * n)


def write_matching(m: MatchingResult, s: PercolatedSample, path: str | os.PathLike, *,
                   oracle_size: int | None = None) -> None:
    """ Export `m`: one ``u v`` line per matched edge, then a ``#`` report block """
    with open(path, 'wt') as fp:
        for e in sorted(m.edges):
            u, v = s.host.edge_endpoints(e)
            fp.write(f"{u} {v}\n")
        fp.write(f"# algorithm {m.algorithm}\n")
        fp.write(f"# covered {m.covered}\n")
        fp.write(f"# guarantee {m.guarantee if m.guarantee is not None else '-'}\n")
        if oracle_size is not None:
            fp.write(f"# oracle_gap {2 * oracle_size - m.covered}\n")
