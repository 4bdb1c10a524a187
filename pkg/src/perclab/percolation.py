""" Seeded bond percolation G_p with a monotone coupling in p

    Every edge id e receives a uniform U(e) in [0, 1) computed statelessly from (seed, e) with a
    SplitMix64 counter hash; the edge is kept iff U(e) < p. Samples with the same seed are therefore
    nested in p, reproducible bit-for-bit, and independent of the order in which edges are visited.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
import math
import os
import re
from typing import Iterable

import numpy as np

from perclab.bounds import edge_count_tail, solve_constants
from perclab.errors import BoundDomainError, RegimeError, SampleError
from perclab.graphs import RegularGraph
from perclab.settings import get_logger

logger = get_logger(__name__)

Probability = Fraction | float

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_CHUNK = 1 << 22
_POWER_RE = re.compile(r'^log\^(\d+)\(d\)/d$')
_OVER_D_RE = re.compile(r'^(.+)/d$')


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def edge_uniforms(seed: int, ids: np.ndarray) -> np.ndarray:
    """ The 53-bit integers behind U(e) = value / 2^53 for edge ids `ids` under `seed` """
    key = _splitmix64(np.array([seed % (1 << 64)], dtype=np.uint64))[0]
    z = key + (np.asarray(ids, dtype=np.uint64) + np.uint64(1)) * _GOLDEN
    return _splitmix64(z) >> np.uint64(11)


def _threshold(p: Probability) -> int:
    """ ceil(p * 2^53): the integer cut such that U(e) < p iff value < cut """
    return math.ceil(Fraction(p) * (1 << 53))


def resolve_p(spec: str | Probability, d: int, *, eps: float | None = None) -> Probability:
    """ Resolve a probability specification against a host of degree `d`.

        Accepted forms: a number, a decimal or fraction string (``'0.3'``, ``'3/4'``, both exact),
        ``'<number>/d'`` (``'12/d'``), ``'C/d'`` with C solved from `eps`, and ``'log^k(d)/d'``.

        :param spec: probability or specification string
        :type spec: str | Fraction | float
        :param d: host degree
        :type d: int
        :param eps: target uncovered fraction, needed only by ``'C/d'``
        :type eps: float | None
        :return: the probability, exact where the input is exact
        :rtype: Fraction | float
    """
    symbolic = False
    if isinstance(spec, np.integer):
        spec = int(spec)
    match spec:
        case Fraction() | int():
            p = Fraction(spec)
        case float():
            p = spec
        case str():
            text = spec.replace(' ', '')
            try:
                if m := _POWER_RE.match(text):
                    symbolic = True
                    p = math.log(d) ** int(m[1]) / d
                elif text == 'C/d':
                    if eps is None:
                        raise SampleError("p = 'C/d' needs a target eps to solve for C")
                    symbolic = True
                    p = Fraction(solve_constants(eps).C, d)
                elif m := _OVER_D_RE.match(text):
                    symbolic = True
                    p = Fraction(m[1]) / d
                else:
                    p = Fraction(text)
            except SampleError:
                raise
            except (ValueError, ZeroDivisionError):
                raise SampleError(f"cannot parse probability specification '{spec}'") from None
        case _:
            raise SampleError(f"cannot interpret {spec!r} as a probability")
    if not 0 <= p <= 1:
        if symbolic:
            raise RegimeError(f"p = '{spec}' resolves to {float(p):.6g} at d={d}: "
                              f"theorem regime unreachable at this d")
        raise SampleError(f"p = {spec} is not in [0, 1]")
    return p


@dataclass(frozen=True, eq=False)
class PercolatedSample:
    """ An immutable bond-percolation sample of a host graph.

        The kept set is stored as a packed bit array over edge ids.
    """

    #: Host graph
    host: RegularGraph
    #: Retention probability
    p: Probability
    #: Seed of the counter hash
    seed: int
    _packed: np.ndarray = field(repr=False)

    def __repr__(self):
        return f"PercolatedSample({self.host.label}, p={self.p}, seed={self.seed}, kept={self.kept_count})"

    @cached_property
    def kept_mask(self) -> np.ndarray:
        """ Boolean membership array indexed by edge id """
        mask = np.unpackbits(self._packed, count=self.host.m, bitorder='little').astype(bool)
        mask.setflags(write=False)
        return mask

    @cached_property
    def kept_ids(self) -> np.ndarray:
        """ Sorted ids of kept edges """
        return np.flatnonzero(self.kept_mask)

    @property
    def kept_count(self) -> int:
        return int(self.kept_ids.size)

    @cached_property
    def degrees(self) -> np.ndarray:
        """ Sample degree of every vertex """
        lo, hi = self.host.edge_arrays(self.kept_ids)
        return np.bincount(np.concatenate([lo, hi]), minlength=self.host.n)

    @property
    def n(self) -> int:
        return self.host.n

    @property
    def d(self) -> int:
        return self.host.d

    @property
    def dp(self) -> Probability:
        return self.host.d * self.p

    def contains(self, e: int) -> bool:
        return bool(self.kept_mask[e])

    def adjacency(self, alive: np.ndarray | None = None) -> list[list[int]]:
        """ Adjacency lists of the kept edges, restricted to `alive` vertices if given """
        lo, hi = self.host.edge_arrays(self.kept_ids)
        if alive is not None:
            keep = alive[lo] & alive[hi]
            lo, hi = lo[keep], hi[keep]
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        bounds = np.searchsorted(src, np.arange(self.host.n + 1))
        flat = dst.tolist()
        return [flat[a:b] for a, b in zip(bounds[:-1].tolist(), bounds[1:].tolist())]


def sample(g: RegularGraph, p: str | Probability, seed: int) -> PercolatedSample:
    """ Keep each edge of `g` independently with probability `p`.

        :param g: host graph
        :type g: RegularGraph
        :param p: retention probability, or a specification understood by :func:`resolve_p`
        :type p: str | Fraction | float
        :param seed: seed of the counter hash
        :type seed: int
        :return: the sample G_p
        :rtype: PercolatedSample
    """
    p = resolve_p(p, g.d)
    cut = np.uint64(_threshold(p))
    chunks = []
    for start in range(0, g.m, _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, g.m), dtype=np.uint64)
        keep = edge_uniforms(seed, ids) < cut
        chunks.append(np.packbits(keep, bitorder='little'))
    packed = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)
    packed.setflags(write=False)
    s = PercolatedSample(g, p, int(seed), packed)
    logger.debug(f"sample {g.label}, p={p}, seed={seed}: kept {s.kept_count} of {g.m} edges")
    return s


def as_alive_mask(alive: Iterable[int] | np.ndarray, n: int) -> np.ndarray:
    """ Normalise a vertex set (boolean mask or iterable of ids) to a boolean mask of length `n` """
    if isinstance(alive, np.ndarray) and alive.dtype == bool:
        if alive.shape != (n,):
            raise SampleError(f"alive mask has shape {alive.shape}, expected ({n},)")
        return alive
    mask = np.zeros(n, dtype=bool)
    ids = np.fromiter((int(v) for v in alive), dtype=np.int64)
    mask[ids] = True
    return mask


def degree_in_sample(s: PercolatedSample, v: int) -> int:
    """ Number of kept edges incident to `v` """
    if not 0 <= v < s.n:
        raise SampleError(f"vertex {v} out of range [0, {s.n})")
    return int(s.degrees[v])


def induced_degree(s: PercolatedSample, v: int, alive: Iterable[int] | np.ndarray) -> int:
    """ Number of kept edges from `v` into the vertex set `alive` (which must contain `v`).

        :param s: sample
        :type s: PercolatedSample
        :param v: vertex
        :type v: int
        :param alive: vertex set, as a boolean mask or an iterable of ids
        :return: induced degree of `v` in G_p[alive]
        :rtype: int
    """
    mask = as_alive_mask(alive, s.n)
    if not mask[v]:
        raise SampleError(f"vertex {v} is not alive")
    nbrs = s.host.neighbors(v)
    eids = s.host.incident_edges(v)
    return int(np.count_nonzero(s.kept_mask[eids] & mask[nbrs]))


def isolated_count(s: PercolatedSample) -> int:
    """ Number of vertices with no kept edge """
    return int(np.count_nonzero(s.degrees == 0))


@dataclass
class EdgeCountReport:
    """ Measured |E(G_p)| against the target ndp/2 - eps*n/4 used by the matching argument """

    kept: int
    expected: float
    target: float
    meets_target: bool
    #: Chernoff bound on P[|E(G_p)| < target]; None where the bound does not apply (dp too small)
    chernoff_bound: float | None = None


def edge_count_report(s: PercolatedSample, eps: float) -> EdgeCountReport:
    n, dp = s.n, float(s.dp)
    expected = n * dp / 2
    target = expected - eps * n / 4
    try:
        chernoff = edge_count_tail(n, s.d, float(s.p), eps).value
    except BoundDomainError:
        chernoff = None
    return EdgeCountReport(s.kept_count, expected, target, s.kept_count >= target, chernoff)


def write_sample(s: PercolatedSample, path: str | os.PathLike) -> None:
    """ Dump `s`: header ``n d p seed``, then the kept edge ids, one per line """
    with open(path, 'wt') as fp:
        fp.write(f"{s.n} {s.d} {s.p} {s.seed}\n")
        for e in s.kept_ids.tolist():
            fp.write(f"{e}\n")


def read_sample(path: str | os.PathLike, host: RegularGraph) -> PercolatedSample:
    """ Load a dump written by :func:`write_sample` for the given `host` """
    with open(path, 'rt') as fp:
        lines = [line.strip() for line in fp if line.strip()]
    try:
        n, d, p_text, seed = lines[0].split()
        n, d, seed = int(n), int(d), int(seed)
        ids = np.array([int(line) for line in lines[1:]], dtype=np.int64)
    except (IndexError, ValueError) as e:
        raise SampleError(f"'{path}': malformed sample dump: {e}") from None
    if (n, d) != (host.n, host.d):
        raise SampleError(f"'{path}' was drawn on a host with n={n}, d={d}, not {host}")
    if ids.size and (ids.min() < 0 or ids.max() >= host.m):
        raise SampleError(f"'{path}': edge id out of range [0, {host.m})")
    p = Fraction(p_text) if '/' in p_text or '.' not in p_text else float(p_text)
    mask = np.zeros(host.m, dtype=bool)
    mask[ids] = True
    packed = np.packbits(mask, bitorder='little')
    packed.setflags(write=False)
    return PercolatedSample(host, p, seed, packed)
