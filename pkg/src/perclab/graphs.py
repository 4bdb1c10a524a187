""" Immutable d-regular host graphs with a canonical vertex and edge indexing

    Three kinds of host are supported:

    * **hypercube**: Q^d on the integers [0, 2^d), adjacency by single-bit flips. Nothing is
      materialised: neighbours and edge ids are computed on the fly, slot ``i`` of vertex ``v``
      being the neighbour ``v ^ (1 << i)``.
    * **explicit**: any simple d-regular graph, stored as an ``(n, d)`` table of sorted neighbours
      together with the aligned table of edge ids.
    * **product**: the Cartesian product of regular factors, stored explicitly. The first factor is
      the least significant digit of the mixed-radix vertex index, so that a product of d copies
      of K2 is labelled exactly like Q^d.

    Edge ids are canonical. Explicit and product hosts number their edges in the order of
    ``(min endpoint, max endpoint)``. Hypercube edges are numbered by dimension first:
    edge ``i * 2^(d-1) + r`` joins the r-th vertex with bit i clear to its flip along bit i.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import StrEnum
from itertools import combinations
import math
import os
from typing import Iterable, Sequence

import numpy as np

from perclab.errors import (GraphError, GraphSizeError, InfeasibleGraphError, GenerationError,
                            NotBipartiteError)
from perclab.settings import SETTINGS, Settings, get_logger

logger = get_logger(__name__)


class GraphKind(StrEnum):
    HYPERCUBE = 'hypercube'
    EXPLICIT = 'explicit'
    PRODUCT = 'product'


def popcount(values: np.ndarray) -> np.ndarray:
    """ Number of set bits of each (non-negative) integer in `values` """
    values = np.asarray(values, dtype=np.uint64)
    if hasattr(np, 'bitwise_count'):
        return np.bitwise_count(values).astype(np.int64)
    v = values - ((values >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return ((v * np.uint64(0x0101010101010101)) >> np.uint64(56)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class RegularGraph:
    """ An immutable simple d-regular graph on vertices [0, n).

        Build instances with :func:`hypercube`, :func:`random_regular`, :func:`cartesian_product`,
        :func:`cycle`, :func:`complete`, :func:`from_edges` or :func:`read_graph` rather than directly.
    """

    #: Kind of host: hypercube (implicit), explicit or product
    kind: GraphKind
    #: Number of vertices
    n: int
    #: Common degree of all vertices
    d: int
    #: Human-readable label (e.g. 'Q^10', 'C4xC4')
    label: str = ''
    #: Factors of a product host (empty otherwise)
    factors: tuple['RegularGraph', ...] = ()
    _nbr: np.ndarray | None = field(default=None, repr=False)
    _eid: np.ndarray | None = field(default=None, repr=False)
    _keys: np.ndarray | None = field(default=None, repr=False)

    def __str__(self):
        return f"{self.label or self.kind} (n={self.n}, d={self.d}, m={self.m})"

    @property
    def m(self) -> int:
        """ Number of edges, nd/2 """
        return self.n * self.d // 2

    @property
    def is_hypercube(self) -> bool:
        return self.kind is GraphKind.HYPERCUBE

    @property
    def dim(self) -> int:
        """ Dimension of a hypercube host """
        if not self.is_hypercube:
            raise GraphError(f"{self.label} is not a hypercube")
        return self.d

    def _check_vertex(self, v: int) -> int:
        v = int(v)
        if not 0 <= v < self.n:
            raise GraphError(f"vertex {v} out of range [0, {self.n})")
        return v

    def slot(self, vertices: np.ndarray, i: int) -> tuple[np.ndarray, np.ndarray]:
        """ Vectorised access to neighbour slot `i` of each vertex in `vertices`.

            :param vertices: vertex ids
            :type vertices: np.ndarray
            :param i: slot index in [0, d)
            :type i: int
            :return: (neighbour ids, edge ids), both aligned with `vertices`
            :rtype: tuple[np.ndarray, np.ndarray]
        """
        vertices = np.asarray(vertices, dtype=np.int64)
        if self.is_hypercube:
            bit = np.int64(1) << np.int64(i)
            lower = vertices & ~bit
            rank = ((lower >> np.int64(i + 1)) << np.int64(i)) | (lower & (bit - 1))
            return vertices ^ bit, np.int64(i) * np.int64(self.n // 2) + rank
        return self._nbr[vertices, i], self._eid[vertices, i]

    def neighbors(self, v: int) -> np.ndarray:
        """ Neighbours of `v` in slot order (bit order for hypercubes, ascending otherwise) """
        v = self._check_vertex(v)
        if self.is_hypercube:
            return v ^ (np.int64(1) << np.arange(self.d, dtype=np.int64))
        return self._nbr[v].copy()

    def incident_edges(self, v: int) -> np.ndarray:
        """ Edge ids incident to `v`, aligned with :meth:`neighbors` """
        v = self._check_vertex(v)
        if self.is_hypercube:
            single = np.array([v], dtype=np.int64)
            return np.concatenate([self.slot(single, i)[1] for i in range(self.d)])
        return self._eid[v].copy()

    def neighbor_table(self) -> tuple[np.ndarray, np.ndarray]:
        """ Materialised ``(n, d)`` tables of neighbours and edge ids (computed for hypercubes). """
        if not self.is_hypercube:
            return self._nbr, self._eid
        vertices = np.arange(self.n, dtype=np.int64)
        nbr = np.empty((self.n, self.d), dtype=np.int64)
        eid = np.empty((self.n, self.d), dtype=np.int64)
        for i in range(self.d):
            nbr[:, i], eid[:, i] = self.slot(vertices, i)
        return nbr, eid

    def are_adjacent(self, u: int, v: int) -> bool:
        u, v = self._check_vertex(u), self._check_vertex(v)
        if self.is_hypercube:
            x = u ^ v
            return x != 0 and x & (x - 1) == 0
        return bool(np.any(self._nbr[u] == v))

    def edge_id(self, u: int, v: int) -> int:
        """ Canonical id of edge {u, v}; raises :class:`GraphError` if u, v are not adjacent """
        if not self.are_adjacent(u, v):
            raise GraphError(f"{{{u}, {v}}} is not an edge of {self.label}")
        u, v = min(u, v), max(u, v)
        if self.is_hypercube:
            i = (u ^ v).bit_length() - 1
            return int(self.slot(np.array([u]), i)[1][0])
        return int(np.searchsorted(self._keys, u * self.n + v))

    def edge_endpoints(self, e: int) -> tuple[int, int]:
        """ Endpoints (u, v) with u < v of edge id `e` """
        if not 0 <= e < self.m:
            raise GraphError(f"edge id {e} out of range [0, {self.m})")
        lo, hi = self.edge_arrays(np.array([e], dtype=np.int64))
        return int(lo[0]), int(hi[0])

    def edge_arrays(self, ids: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """ Endpoint arrays (lower, upper) for edge ids `ids` (default: all edges, in id order) """
        if ids is None:
            ids = np.arange(self.m, dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        if self.is_hypercube:
            half = np.int64(self.n // 2)
            i, r = ids // half, ids % half
            low_mask = (np.int64(1) << i) - 1
            lower = ((r >> i) << (i + 1)) | (r & low_mask)
            return lower, lower | (np.int64(1) << i)
        keys = self._keys[ids]
        return keys // self.n, keys % self.n

    def degree_audit(self) -> np.ndarray:
        """ Degrees recounted from the edge enumeration (independent of the neighbour table) """
        lo, hi = self.edge_arrays()
        return np.bincount(np.concatenate([lo, hi]), minlength=self.n)

    def distance_layers(self, v: int, radius: int) -> list[np.ndarray]:
        """ Breadth-first layers N^0(v), ..., N^radius(v) as sorted arrays (shorter if the component ends) """
        v = self._check_vertex(v)
        seen = np.zeros(self.n, dtype=bool)
        seen[v] = True
        layers = [np.array([v], dtype=np.int64)]
        for _ in range(radius):
            frontier = layers[-1]
            found = np.concatenate([self.slot(frontier, i)[0] for i in range(self.d)])
            found = np.unique(found[~seen[found]])
            if found.size == 0:
                break
            seen[found] = True
            layers.append(found)
        return layers

    def bipartition(self) -> np.ndarray:
        """ A proper 2-colouring of the vertices (0/1 array); raises :class:`NotBipartiteError` """
        if self.is_hypercube:
            return popcount(np.arange(self.n, dtype=np.int64)) & 1
        colour = np.full(self.n, -1, dtype=np.int64)
        for root in range(self.n):
            if colour[root] >= 0:
                continue
            colour[root] = 0
            frontier = np.array([root], dtype=np.int64)
            while frontier.size:
                found = np.unique(np.concatenate([self._nbr[frontier, i] for i in range(self.d)]))
                found = found[colour[found] < 0]
                colour[found] = 1 - colour[frontier[0]]
                frontier = found
        lo, hi = self.edge_arrays()
        if np.any(colour[lo] == colour[hi]):
            raise NotBipartiteError(f"{self.label} is not bipartite")
        return colour

    def is_bipartite(self) -> bool:
        try:
            self.bipartition()
        except NotBipartiteError:
            return False
        return True


def _guard(n: int, limit: int, what: str):
    if n > limit:
        raise GraphSizeError(f"{what} has {n} vertices, above the configured guard of {limit}")


def hypercube(d: int, *, settings: Settings | None = None) -> RegularGraph:
    """ The d-dimensional binary hypercube Q^d (implicit adjacency).

        :param d: dimension, 1 <= d <= ``max_hypercube_dim``
        :type d: int
        :return: host with n = 2^d and degree d
        :rtype: RegularGraph
    """
    settings = settings or SETTINGS
    if not 1 <= d <= settings.max_hypercube_dim:
        raise GraphError(f"hypercube dimension {d} outside supported range [1, {settings.max_hypercube_dim}]")
    _guard(2 ** d, settings.max_implicit_order, f"Q^{d}")
    return RegularGraph(GraphKind.HYPERCUBE, 2 ** d, d, label=f"Q^{d}")


def from_edges(n: int, edges: Iterable[tuple[int, int]] | np.ndarray, *,
               label: str = '', kind: GraphKind = GraphKind.EXPLICIT,
               factors: tuple[RegularGraph, ...] = (),
               settings: Settings | None = None) -> RegularGraph:
    """ Build an explicit host from an edge list, validating simplicity and regularity.

        :param n: number of vertices
        :type n: int
        :param edges: pairs (u, v) of vertices in [0, n)
        :return: explicit host
        :rtype: RegularGraph
    """
    settings = settings or SETTINGS
    _guard(n, settings.max_explicit_order, label or 'explicit graph')
    pairs = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if n < 1:
        raise GraphError("a graph needs at least one vertex")
    if pairs.size == 0:
        pairs = pairs.reshape(0, 2)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise GraphError("edges must be pairs of vertices")
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise GraphError(f"edge endpoint out of range [0, {n})")
    lo, hi = pairs.min(axis=1), pairs.max(axis=1)
    if np.any(lo == hi):
        raise GraphError("loops are not allowed")
    keys = np.sort(lo * n + hi)
    if np.any(np.diff(keys) == 0):
        raise GraphError("parallel edges are not allowed")
    degrees = np.bincount(np.concatenate([lo, hi]), minlength=n)
    d = int(degrees[0])
    if np.any(degrees != d):
        raise GraphError(f"graph is not regular (degrees range {degrees.min()}..{degrees.max()})")
    lo, hi = keys // n, keys % n
    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    order = np.lexsort((dst, src))
    nbr = dst[order].reshape(n, d)
    eid = np.concatenate([np.arange(keys.size), np.arange(keys.size)])[order].reshape(n, d)
    for arr in (nbr, eid, keys):
        arr.setflags(write=False)
    return RegularGraph(kind, n, d, label=label or f"G({n},{d})", factors=factors,
                        _nbr=nbr, _eid=eid, _keys=keys)


def random_regular(n: int, d: int, seed: int, *, settings: Settings | None = None) -> RegularGraph:
    """ A random simple d-regular graph on n vertices, deterministic in `seed`.

        Stubs are paired by the configuration model; pairs forming a loop or a repeated edge are put
        back and re-paired among themselves, and the whole attempt restarts when no legal pair remains.
        Re-pairing biases the result, so the output is not uniform over d-regular graphs.

        :param n: number of vertices
        :type n: int
        :param d: degree, 1 <= d < n, with nd even
        :type d: int
        :param seed: generator seed
        :type seed: int
        :return: explicit host
        :rtype: RegularGraph
    """
    settings = settings or SETTINGS
    if (n * d) % 2 != 0:
        raise InfeasibleGraphError(f"n*d = {n * d} is odd: no {d}-regular graph on {n} vertices")
    if not 1 <= d < n:
        raise InfeasibleGraphError(f"need 1 <= d < n, got n={n}, d={d}")
    _guard(n, settings.max_explicit_order, f"random {d}-regular graph")
    rng = np.random.default_rng(seed)

    def _suitable(edges: set, potential: dict) -> bool:
        if not potential:
            return True
        for s1 in potential:
            for s2 in potential:
                if s1 == s2:
                    break
                if (min(s1, s2), max(s1, s2)) not in edges:
                    return True
        return False

    def _try_creation() -> set | None:
        edges = set()
        stubs = np.repeat(np.arange(n, dtype=np.int64), d)
        while stubs.size:
            potential = {}
            stubs = rng.permutation(stubs)
            for s1, s2 in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
                pair = (s1, s2) if s1 < s2 else (s2, s1)
                if s1 != s2 and pair not in edges:
                    edges.add(pair)
                else:
                    potential[s1] = potential.get(s1, 0) + 1
                    potential[s2] = potential.get(s2, 0) + 1
            if not _suitable(edges, potential):
                return None
            stubs = np.array([node for node, count in potential.items() for _ in range(count)], dtype=np.int64)
        return edges

    for attempt in range(1, settings.random_regular_retries + 1):
        edges = _try_creation()
        if edges is not None:
            logger.debug(f"random_regular(n={n}, d={d}, seed={seed}): accepted attempt {attempt}")
            return from_edges(n, sorted(edges), label=f"RR({n},{d};{seed})", settings=settings)
    raise GenerationError(f"random_regular(n={n}, d={d}): no simple graph after "
                          f"{settings.random_regular_retries} attempts")


def cycle(n: int, *, settings: Settings | None = None) -> RegularGraph:
    """ The cycle C_n (n >= 3) """
    if n < 3:
        raise GraphError(f"a cycle needs at least 3 vertices, got {n}")
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)], label=f"C{n}", settings=settings)


def complete(n: int, *, settings: Settings | None = None) -> RegularGraph:
    """ The complete graph K_n (n >= 2) """
    if n < 2:
        raise GraphError(f"a complete graph needs at least 2 vertices, got {n}")
    return from_edges(n, list(combinations(range(n), 2)), label=f"K{n}", settings=settings)


def cartesian_product(factors: Sequence[RegularGraph], *, settings: Settings | None = None) -> RegularGraph:
    """ Cartesian product of regular factors.

        Vertex ``v`` has digits ``x_j = (v // stride_j) % n_j`` with ``stride_j`` the product of the
        orders of the factors before j; two vertices are adjacent iff they differ in exactly one digit
        and the differing digits are adjacent in that factor.

        :param factors: one or more regular graphs
        :type factors: Sequence[RegularGraph]
        :return: product host, degree = sum of factor degrees
        :rtype: RegularGraph
    """
    settings = settings or SETTINGS
    factors = tuple(factors)
    if not factors:
        raise GraphError("a product needs at least one factor")
    n = math.prod(f.n for f in factors)
    _guard(n, settings.max_explicit_order, 'product graph')
    vertices = np.arange(n, dtype=np.int64)
    pieces = []
    stride = 1
    for f in factors:
        digit = (vertices // stride) % f.n
        fnbr, _ = f.neighbor_table()
        for s in range(f.d):
            other = vertices + (fnbr[digit, s] - digit) * stride
            keep = vertices < other
            pieces.append(np.stack([vertices[keep], other[keep]], axis=1))
        stride *= f.n
    label = 'x'.join(f.label for f in factors)
    return from_edges(n, np.concatenate(pieces), label=label, kind=GraphKind.PRODUCT,
                      factors=factors, settings=settings)


def distance_shell(g: RegularGraph, v: int, k: int) -> np.ndarray:
    """ N^k(v): the vertices at distance exactly `k` from `v`, sorted.

        :param g: host graph
        :type g: RegularGraph
        :param v: centre vertex
        :type v: int
        :param k: radius, k >= 0
        :type k: int
        :return: sorted vertex ids
        :rtype: np.ndarray
    """
    if k < 0:
        raise GraphError(f"radius must be non-negative, got {k}")
    v = g._check_vertex(v)
    if g.is_hypercube:
        if k > g.d:
            return np.empty(0, dtype=np.int64)
        masks = [sum(1 << b for b in bits) for bits in combinations(range(g.d), k)]
        return np.sort(np.array(masks, dtype=np.int64) ^ v)
    layers = g.distance_layers(v, k)
    return layers[k] if k < len(layers) else np.empty(0, dtype=np.int64)


def distances_from(g: RegularGraph, v: int, radius: int) -> np.ndarray:
    """ Array of host distances from `v`, exact up to `radius`; farther vertices hold ``radius + 1`` """
    if g.is_hypercube:
        return np.minimum(popcount(np.arange(g.n, dtype=np.int64) ^ v), radius + 1)
    dist = np.full(g.n, radius + 1, dtype=np.int64)
    for k, layer in enumerate(g.distance_layers(v, radius)):
        dist[layer] = k
    return dist


@dataclass
class ExpansionReport:
    """ Result of :func:`check_expansion_condition`.

        For each sampled v and each 1 <= k <= radius, the statistic is
        max over u in N^k(v) of |N(u) ∩ (N^0(v) ∪ ... ∪ N^k(v))|.
    """

    #: Largest k examined: max(1, floor(ln d))
    radius: int
    #: Statistic per (v, k)
    per_vertex: dict[tuple[int, int], int]
    #: Maximum statistic over all (v, k)
    global_max: int

    def max_for_radius(self, k: int) -> int:
        return max((s for (_, kk), s in self.per_vertex.items() if kk == k), default=0)

    def passes(self, threshold: float) -> bool:
        """ True if every statistic is at most `threshold` (threshold chosen by the experiment) """
        return self.global_max <= threshold


def check_expansion_condition(g: RegularGraph, sample: Sequence[int], radius: int | None = None) -> ExpansionReport:
    """ Evaluate the neighbourhood-expansion statistic on the sampled centres.

        :param g: host graph
        :type g: RegularGraph
        :param sample: non-empty list of centre vertices
        :type sample: Sequence[int]
        :param radius: largest k examined (default: max(1, floor(ln d)))
        :type radius: int | None
        :return: per-(v, k) maxima and the global maximum
        :rtype: ExpansionReport
    """
    if not len(sample):
        raise GraphError("expansion check needs a non-empty sample of vertices")
    if radius is None:
        radius = max(1, math.floor(math.log(g.d))) if g.d > 1 else 1
    per_vertex = {}
    for v in sample:
        layers = g.distance_layers(int(v), radius)
        dist = np.full(g.n, radius + 1, dtype=np.int8 if radius < 126 else np.int64)
        for k, layer in enumerate(layers):
            dist[layer] = k
        for k in range(1, radius + 1):
            if k >= len(layers):
                per_vertex[(int(v), k)] = 0
                continue
            shell = layers[k]
            counts = np.zeros(shell.size, dtype=np.int64)
            for i in range(g.d):
                counts += dist[g.slot(shell, i)[0]] <= k
            per_vertex[(int(v), k)] = int(counts.max())
    report = ExpansionReport(radius, per_vertex, max(per_vertex.values()))
    logger.info(f"expansion check on {g.label}: {len(sample)} centres, radius {radius}, max {report.global_max}")
    return report


def write_graph(g: RegularGraph, path: str | os.PathLike) -> None:
    """ Write `g` in the graph text format: header ``n d``, then one ``u v`` line per edge (u < v) """
    lo, hi = g.edge_arrays()
    with open(path, 'wt') as fp:
        fp.write(f"{g.n} {g.d}\n")
        for u, v in zip(lo.tolist(), hi.tolist()):
            fp.write(f"{u} {v}\n")


def read_graph(path: str | os.PathLike, *, settings: Settings | None = None) -> RegularGraph:
    """ Read a host written by :func:`write_graph`, validating the header and regularity """
    with open(path, 'rt') as fp:
        lines = [line.strip() for line in fp if line.strip() and not line.startswith('#')]
    if not lines:
        raise GraphError(f"'{path}' is empty")
    try:
        n, d = (int(tok) for tok in lines[0].split())
        edges = [tuple(int(tok) for tok in line.split()) for line in lines[1:]]
    except ValueError as e:
        raise GraphError(f"'{path}': malformed graph file: {e}") from None
    if any(len(e) != 2 or e[0] >= e[1] for e in edges):
        raise GraphError(f"'{path}': every edge line must read 'u v' with u < v")
    if len(edges) != n * d // 2:
        raise GraphError(f"'{path}': header announces {n * d // 2} edges, found {len(edges)}")
    g = from_edges(n, edges, label=os.path.basename(str(path)), settings=settings)
    if g.d != d:
        raise GraphError(f"'{path}': header degree {d} but edges give degree {g.d}")
    return g


def bfs_components(n: int, adjacency: Sequence[Sequence[int]]) -> list[list[int]]:
    """ Connected components of an adjacency-list graph, each sorted, in order of smallest vertex """
    seen = [False] * n
    components = []
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        comp = []
        while queue:
            x = queue.popleft()
            comp.append(x)
            for y in adjacency[x]:
                if not seen[y]:
                    seen[y] = True
                    queue.append(y)
        components.append(sorted(comp))
    return components
