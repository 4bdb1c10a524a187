""" Closed-form evaluators for the tail bounds and constants behind the matching and pruning arguments

    Every bound is computed in log-space first and returned as a :class:`BoundValue`, so that factors
    such as 2^d or exp(-ln^2 d) at large d neither overflow nor underflow. Logarithms are natural.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.stats import binom

from perclab.errors import BoundDomainError
from perclab.settings import get_logger

logger = get_logger(__name__)

# Upper end used for delta, which must stay strictly below 1
DELTA_CAP = 0.999


@dataclass(frozen=True)
class BoundValue:
    """ A bound held by its natural logarithm.

        ``raw`` is the unclamped value (``inf`` past float range), ``value`` is ``min(1, raw)``,
        the reading to compare against empirical frequencies.
    """

    #: Natural logarithm of the bound
    log_value: float

    @property
    def raw(self) -> float:
        try:
            return math.exp(self.log_value)
        except OverflowError:
            return math.inf

    @property
    def value(self) -> float:
        return math.exp(min(0.0, self.log_value))

    @property
    def log10(self) -> float:
        return self.log_value / math.log(10)

    def __str__(self):
        if -700 < self.log_value < 700:
            return f"{self.raw:.6g}"
        return f"10^{self.log10:.4f}"


def _check_probability(p: float):
    if not 0 <= p <= 1:
        raise BoundDomainError(f"p = {p} is not in [0, 1]")


def chernoff_tail(d: int, p: float, t: float) -> BoundValue:
    """ P[Bin(d, p) outside dp ± t] <= 2 exp(-t^2 / (3dp)), valid for 0 < t <= dp/2.

        :param d: number of trials
        :type d: int
        :param p: success probability
        :type p: float
        :param t: deviation
        :type t: float
        :return: the bound
        :rtype: BoundValue
    """
    _check_probability(p)
    dp = d * float(p)
    if not 0 < t <= dp / 2:
        raise BoundDomainError(f"Chernoff bound needs 0 < t <= dp/2 = {dp / 2:g}, got t = {t}")
    return BoundValue(math.log(2) - t * t / (3 * dp))


def azuma_tail(m: int, p: float, K: float, t: float) -> BoundValue:
    """ P[|f(X) - E f(X)| >= t] <= 2 exp(-t^2 / (2 K^2 m p)) for K-Lipschitz f of m Bernoulli(p) coordinates.

        :param m: number of coordinates, m >= 1
        :type m: int
        :param p: coordinate probability
        :type p: float
        :param K: Lipschitz constant, K > 0
        :type K: float
        :param t: deviation, t >= 0
        :type t: float
        :return: the bound
        :rtype: BoundValue
    """
    _check_probability(p)
    if m < 1 or K <= 0 or t < 0:
        raise BoundDomainError(f"Azuma bound needs m >= 1, K > 0, t >= 0 (got m={m}, K={K}, t={t})")
    if t == 0:
        return BoundValue(math.log(2))
    if p == 0:
        return BoundValue(-math.inf)
    return BoundValue(math.log(2) - t * t / (2 * K * K * m * float(p)))


def round_failure_bound(d: int, p: float, delta: float, t: int) -> BoundValue:
    """ P[v in A_t] <= exp(-(delta*d*p / (2t ln d))^(t-1)) for a pruning round t >= 2 """
    _check_probability(p)
    if t < 2 or d < 3:
        raise BoundDomainError(f"round bound needs t >= 2 and d >= 3 (got t={t}, d={d})")
    base = delta * d * float(p) / (2 * t * math.log(d))
    if base <= 0:
        return BoundValue(0.0)
    log_power = (t - 1) * math.log(base)
    if log_power > 709:
        return BoundValue(-math.inf)
    return BoundValue(-math.exp(log_power))


class RemovedBounds(NamedTuple):
    """ Bounds on the expected number of vertices removed by the pruning process """

    #: E|A_1| <= 2^d exp(-delta^2 dp / (4 ln^2 d))
    first_round: BoundValue
    #: E|A| <= 2^d tau exp(-ln^2 d)
    total: BoundValue
    #: E|A| / 2^d, i.e. tau exp(-ln^2 d)
    total_fraction: BoundValue


def expected_removed_bound(d: int, p: float, delta: float) -> RemovedBounds:
    """ The expectation bounds for |A_1| and |A| = |A_1 ∪ ... ∪ A_tau| on Q^d """
    _check_probability(p)
    if d < 3:
        raise BoundDomainError(f"removed-vertex bounds need d >= 3, got {d}")
    ln_d = math.log(d)
    tau = math.floor(ln_d)
    log_cube = d * math.log(2)
    first = log_cube - delta ** 2 * d * float(p) / (4 * ln_d ** 2)
    fraction = math.log(tau) - ln_d ** 2
    return RemovedBounds(BoundValue(first), BoundValue(log_cube + fraction), BoundValue(fraction))


class DefectEstimate(NamedTuple):
    """ Conjectured uncovered count and isolated-vertex expectation on Q^d_p (equal by algebra) """

    uncovered: float
    isolated: float


def defect_conjecture(d: int, p: float) -> DefectEstimate:
    """ (2(1-p))^d, the conjectured size of the defect set, and 2^d (1-p)^d, the expected isolated count """
    _check_probability(p)
    q = 1 - float(p)
    return DefectEstimate((2 * q) ** d, 2 ** d * q ** d)


def shell_size(d: int, k: int) -> int:
    """ |N^k(v)| in Q^d """
    return math.comb(d, k)


class Lemma3SizeBound(NamedTuple):
    #: (delta dp / (2t ln d))^(t-1)
    power_form: float
    #: prod_{i=1}^{t-1} delta dp / (2(i+1) ln d) = (delta dp / (2 ln d))^(t-1) / t!
    product_form: float


def lemma3_size_bound(d: int, p: float, delta: float, t: int) -> Lemma3SizeBound:
    """ Lower bounds on the witness set X for v in A_t (meaningful only when dp >= ln^5 d) """
    if t < 2 or d < 3:
        raise BoundDomainError(f"witness size bound needs t >= 2 and d >= 3 (got t={t}, d={d})")
    a = delta * d * float(p) / (2 * math.log(d))
    return Lemma3SizeBound((a / t) ** (t - 1), a ** (t - 1) / math.factorial(t))


def high_degree_edge_bound(C: float, delta: float) -> BoundValue:
    """ E|E_0| / n <= 2C exp(-delta^2 C / 4): edges touching vertices of degree >= (1+delta)C at p = C/d """
    if C <= 0:
        raise BoundDomainError(f"C must be positive, got {C}")
    return BoundValue(math.log(2 * C) - delta ** 2 * C / 4)


def e0_azuma_bound(n: int, d: int, eps: float, delta: float, C: float) -> BoundValue:
    """ Azuma bound on P[|E_0| >= eps n/4] with t = eps n/8, K = 2(1+delta)C, m = nd/2, p = C/d """
    return azuma_tail(n * d // 2, min(1.0, C / d), 2 * (1 + delta) * C, eps * n / 8)


def edge_count_tail(n: int, d: int, p: float, eps: float) -> BoundValue:
    """ Chernoff route for P[|E(G_p)| < ndp/2 - eps n/4], |E(G_p)| ~ Bin(nd/2, p) """
    return chernoff_tail(n * d // 2, p, eps * n / 4)


def binomial_tail_exact(d: int, p: float, lo: float, hi: float) -> float:
    """ Exact P[Bin(d, p) < lo or Bin(d, p) > hi] """
    _check_probability(p)
    below = binom.cdf(math.ceil(lo) - 1, d, float(p))
    above = binom.sf(math.floor(hi), d, float(p))
    return float(below + above)


@dataclass(frozen=True)
class TheoremConstants:
    """ Constants (eps, delta, C) for the matching argument.

        They satisfy C exp(-delta^2 C / 16) <= eps/4, (C - eps) / ((1+delta) C) >= 1 - eps
        and delta C >= 9.
    """

    #: Target uncovered fraction
    eps: float
    #: Degree slack
    delta: float
    #: Degree/probability constant (smallest feasible integer)
    C: int
    #: Smallest real C at which all three constraints hold with the same choice of delta
    C_real: float

    @property
    def threshold(self) -> float:
        """ (1 + delta) C """
        return (1 + self.delta) * self.C

    def residuals(self) -> tuple[float, float, float]:
        """ The three constraints as ``lhs - rhs`` (all <= 0 when satisfied) """
        r1 = math.log(self.C) - self.delta ** 2 * self.C / 16 - math.log(self.eps / 4)
        r2 = (1 - self.eps) - (self.C - self.eps) / ((1 + self.delta) * self.C)
        r3 = 9 - self.delta * self.C
        return r1, r2, r3

    def satisfied(self) -> bool:
        r1, r2, r3 = self.residuals()
        return r1 <= 0 and r2 <= 1e-12 and r3 <= 0


def _best_delta(C, eps):
    """ Largest delta allowed by (C - eps) / ((1+delta) C) >= 1 - eps, capped below 1 """
    return np.minimum((C - eps) / ((1 - eps) * C) - 1, DELTA_CAP)


def _worst_residual(C, eps):
    C = np.asarray(C, dtype=float)
    delta = _best_delta(C, eps)
    r0 = -delta
    r1 = np.log(C) - delta ** 2 * C / 16 - math.log(eps / 4)
    r3 = 9 - delta * C
    return np.maximum(np.maximum(r0, r1), r3)


def solve_constants(eps: float) -> TheoremConstants:
    """ Smallest integer C (with its best delta) satisfying the three matching constraints.

        For a fixed C every constraint other than the middle one improves as delta grows, so delta is
        taken as large as the middle constraint allows. Candidate C are scanned upward in doubling
        blocks until the first feasible one.

        :param eps: target uncovered fraction, 0 < eps < 1
        :type eps: float
        :return: the constants
        :rtype: TheoremConstants
    """
    if not 0 < eps < 1:
        raise BoundDomainError(f"eps must lie in (0, 1), got {eps}")
    start, width = 1, 1024
    while True:
        candidates = np.arange(start, start + width, dtype=float)
        feasible = np.flatnonzero(_worst_residual(candidates, eps) <= 0)
        if feasible.size:
            C = int(candidates[feasible[0]])
            break
        start += width
        width *= 2
    delta = float(_best_delta(float(C), eps))
    if C > 1 and _worst_residual(C - 1, eps) > 0 > _worst_residual(C, eps):
        C_real = brentq(lambda c: float(_worst_residual(c, eps)), C - 1, C)
    else:
        C_real = float(C)
    consts = TheoremConstants(eps, delta, C, C_real)
    logger.debug(f"solve_constants(eps={eps}): C={C}, delta={delta:.6f}, C_real={C_real:.3f}")
    return consts
