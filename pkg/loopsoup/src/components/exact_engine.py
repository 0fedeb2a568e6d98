"""Closed-form quantities of loop clusters on the complete graph K_n.

Y = exp(Z / (n + kappa)) with Z ~ Gamma(alpha, 1) has moments
m_j = (1 - j/(n+kappa))^-alpha. Partition probabilities, connectedness and the
factorial moments of the cluster-size counts are all expressed through the
moments m_j and the cumulants c_j of Y. The cumulants come out of a recursion
that cancels O(1) moments down to c_d ~ n^-d, so they are evaluated in mpmath at
a working precision that is checked against that cancellation before running.
"""

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from mpmath.ctx_mp import MPContext
from sympy.functions.combinatorial.numbers import stirling
from tenacity import Retrying, retry_if_exception, stop_after_attempt

from loopsoup.src.components.graph_model import complete_log_det_i_minus_theta_p, complete_trace_powers
from loopsoup.src.components.partition_lattice import (Partition, enumerate_refinements, mobius_weight,
                                                       enumerate_all)
from loopsoup.src.config_entity.config_params import EngineConfig, ModelParams
from loopsoup.src.constants import PRECISION_GUARD_BITS
from loopsoup.src.utils.exception import LoopSoupException, domain_error, EXIT_NUMERIC
from loopsoup.src.utils.logger import logger


@lru_cache(maxsize=32)
def _context(bits: int) -> MPContext:
    # private contexts: the global mpmath.mp precision is shared mutable state
    ctx = MPContext()
    ctx.prec = int(bits)
    return ctx


def _rational(x: Any) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def _to_mpf(ctx: MPContext, x: Any):
    q = _rational(x)
    return ctx.mpf(q.numerator) / q.denominator


def required_precision(upto: int, params: ModelParams) -> int:
    """Mantissa bits needed to keep about 19 correct digits in c_upto."""
    return int(math.ceil(upto * math.log2(params.n + params.kappa))) + PRECISION_GUARD_BITS


@dataclass(frozen=True)
class MomentTable:
    params: ModelParams
    precision_bits: int
    moments: Tuple[Any, ...]
    cumulants: Tuple[Any, ...]

    @property
    def upto(self) -> int:
        return len(self.moments) - 1

    def moment(self, j: int):
        return self.moments[j]

    def cumulant(self, j: int):
        if j < 1:
            raise domain_error("cumulants are indexed from 1", "DomainError", j=j)
        return self.cumulants[j - 1]

    def to_dict(self) -> Dict[str, Any]:
        ctx = _context(self.precision_bits)
        digits = int(self.precision_bits * math.log10(2))
        return {
            "n": self.params.n, "kappa": self.params.kappa, "alpha": self.params.alpha,
            "precision_bits": self.precision_bits,
            "moments": [ctx.nstr(m, digits) for m in self.moments],
            "cumulants": [ctx.nstr(c, digits) for c in self.cumulants],
        }


@dataclass(frozen=True)
class LimitLawParams:
    """R = exp(-Z/kappa) (d = 1) and H = exp(-Z d/kappa), Z ~ Gamma(alpha, 1)."""
    kappa: float
    alpha: float
    d: int = 1

    def moment_R(self, k: int) -> float:
        return limit_moment_R(k, self.kappa, self.alpha)

    def moment_H(self, k: int) -> float:
        return limit_moment_H(k, self.d, self.kappa, self.alpha)


@dataclass(frozen=True)
class LoopMass:
    exact: float
    closed_form: float


# --- closed forms that need no extended precision ---

def limit_moment_R(k: int, kappa: float, alpha: float) -> float:
    if k < 0:
        raise domain_error("moment order must be nonnegative", "DomainError", k=k)
    return (kappa / (k + kappa)) ** alpha


def limit_moment_H(k: int, d: int, kappa: float, alpha: float) -> float:
    if k < 0 or d < 1:
        raise domain_error("need k >= 0 and d >= 1", "DomainError", k=k, d=d)
    return (kappa / (k * d + kappa)) ** alpha


def limit_factorial_moment_size_d(d: int, k: int, kappa: float, alpha: float) -> float:
    """Large-n limit of E[(|I_d|)_k]: alpha^k d^-k (kappa/(kd+kappa))^alpha."""
    return (alpha / d) ** k * limit_moment_H(k, d, kappa, alpha)


def dgon_measure(d: int, n: int, kappa: float) -> float:
    """nu-mass (n+kappa-1)^-d of one oriented d-gon on K_n."""
    if not 2 <= d <= n:
        raise domain_error("need 2 <= d <= n", "DomainError", d=d, n=n)
    return math.exp(-d * math.log(n + kappa - 1))


def loop_mass(n: int, kappa: float) -> LoopMass:
    """Total mass of the loop measure on K_n: exact -log det(I-P) and the displayed series closed form."""
    if n < 2 or not kappa > 0:
        raise domain_error("need n >= 2 and kappa > 0", "DomainError", n=n, kappa=kappa)
    s = n - 1 + kappa
    exact = -complete_log_det_i_minus_theta_p(n, kappa, 1.0)
    closed = n / (n - 1) * (-math.log(kappa / s) - (n - 1) / s)
    return LoopMass(exact=exact, closed_form=closed)


def loop_mass_reference(n: int, kappa: float) -> float:
    """Two-term large-n behaviour of both mass expressions: log(n/kappa) - 1."""
    return math.log(n / kappa) - 1.0


def long_loop_mass(n: int, kappa: float, min_length: int) -> float:
    """nu_n mass of loops strictly longer than `min_length`."""
    ks = np.arange(2, int(min_length) + 1)
    short = float(np.sum(complete_trace_powers(n, kappa, ks) / ks)) if ks.size else 0.0
    return loop_mass(n, kappa).exact - short


def large_cluster_probability_bound(n: int, alpha: float, epsilon: float) -> float:
    """Lower bound (1 - n^(-alpha eps/2))(1 - n^-eps / eps) for a loop covering (1-eps) n^(1-eps) vertices."""
    if not 0 < epsilon < 1:
        raise domain_error("epsilon must lie in (0, 1)", "DomainError", epsilon=epsilon)
    bound = (1 - n ** (-alpha * epsilon / 2)) * (1 - n ** (-epsilon) / epsilon)
    return max(0.0, bound)


def size_gf(theta: float, params: ModelParams) -> float:
    """E[theta^M] for the total size M of the soup: (det(I-P)/det(I-theta P))^alpha."""
    n, kappa = params.n, params.kappa
    if not 0 <= theta < (n - 1 + kappa) / (n - 1):
        raise domain_error("theta outside [0, (n-1+kappa)/(n-1))", "DomainError", theta=theta)
    return math.exp(params.alpha * (complete_log_det_i_minus_theta_p(n, kappa, 1.0)
                                    - complete_log_det_i_minus_theta_p(n, kappa, theta)))


def expected_support(n: int, x: int) -> float:
    """n(1 - (1 - 1/n)^x): mean number of distinct vertices visited by a loop of length x."""
    if x < 2:
        raise domain_error("loop length must be >= 2", "DomainError", x=x)
    return -n * math.expm1(x * math.log1p(-1.0 / n))


def falling_factorial(n: int, k: int) -> int:
    return math.prod(range(n - k + 1, n + 1)) if k <= n else 0


class ExactEngine:
    """Moments, cumulants and every probability that goes through them."""

    def __init__(self, config: EngineConfig):
        if not isinstance(config, EngineConfig):
            raise TypeError("config must be an instance of EngineConfig")
        self.config = config
        logger.info(f"ExactEngine initialized at {config.precision_bits} bits "
                    f"(auto precision: {config.auto_precision})")

    # --- precision management ---

    def _bits_for(self, upto: int, params: ModelParams, precision_bits: Optional[int] = None) -> int:
        required = required_precision(upto, params)
        if precision_bits is None:
            precision_bits = self.config.precision_bits
            if self.config.auto_precision:
                return max(precision_bits, required)
        if precision_bits < required:
            raise LoopSoupException(
                ArithmeticError(f"{precision_bits} bits cannot resolve the cumulant recursion up to {upto}"),
                error_type="InsufficientPrecision",
                context={"required_bits": required, "precision_bits": precision_bits, "upto": upto, "n": params.n},
                exit_code=EXIT_NUMERIC)
        return int(precision_bits)

    def moment(self, j: int, params: ModelParams, precision_bits: Optional[int] = None):
        """m_j = (1 - j/(n+kappa))^-alpha, from the exact rational base."""
        ctx = _context(precision_bits or self.config.precision_bits)
        total = _rational(params.n) + _rational(params.kappa)
        if j < 0 or j >= total:
            raise domain_error("moment order must satisfy 0 <= j < n + kappa", "DomainError",
                               j=j, n=params.n, kappa=params.kappa)
        if j == 0:
            return ctx.mpf(1)
        return ctx.power(_to_mpf(ctx, (total - j) / total), -_to_mpf(ctx, params.alpha))

    def cumulants(self, upto: int, params: ModelParams, precision_bits: Optional[int] = None) -> MomentTable:
        """Moments m_0..m_J and cumulants c_1..c_J through c_j = m_j - sum binom(j-1,i-1) c_i m_(j-i)."""
        if upto < 1:
            raise domain_error("need at least one cumulant", "DomainError", upto=upto)
        bits = self._bits_for(upto, params, precision_bits)
        ctx = _context(bits)
        moments = [self.moment(j, params, bits) for j in range(upto + 1)]
        cumulants: List[Any] = []
        for j in range(1, upto + 1):
            acc = moments[j]
            for i in range(1, j):
                acc -= math.comb(j - 1, i - 1) * cumulants[i - 1] * moments[j - i]
            cumulants.append(+acc)
        return MomentTable(params=params, precision_bits=bits, moments=tuple(moments), cumulants=tuple(cumulants))

    # --- partition probabilities ---

    def _moment_row(self, params: ModelParams, bits: int) -> List[Any]:
        return [self.moment(j, params, bits) for j in range(params.n + 1)]

    def _check_partition(self, pi: Partition, params: ModelParams) -> None:
        if pi.ground != frozenset(range(params.n)):
            raise domain_error("partition must cover {0..n-1}", "PartitionMismatch",
                               n=params.n, ground_size=pi.ground_size)

    def prob_finer(self, pi: Partition, params: ModelParams):
        """P(C_alpha finer than pi) = prod_i m_|B_i| / m_n."""
        self._check_partition(pi, params)
        row = self._moment_row(params, self.config.precision_bits)
        return self._finer_from_row(pi, row)

    @staticmethod
    def _finer_from_row(pi: Partition, row: Sequence[Any]):
        value = 1 / row[-1]
        for size in pi.sizes:
            value *= row[size]
        return value

    def prob_exact(self, pi: Partition, params: ModelParams):
        """P(C_alpha = pi) by Moebius inversion over the refinements of pi."""
        self._check_partition(pi, params)
        bits = self._bits_for(params.n, params)
        row = self._moment_row(params, bits)
        ctx = _context(bits)
        terms = [mobius_weight(finer, pi) * self._finer_from_row(finer, row)
                 for finer in enumerate_refinements(pi, cap=self.config.refinement_cap)]
        return ctx.fsum(terms)

    def partition_sum(self, params: ModelParams):
        """Sum of prob_exact over all partitions of {0..n-1}; equals 1."""
        ctx = _context(self._bits_for(params.n, params))
        return ctx.fsum(self.prob_exact(pi, params) for pi in enumerate_all(params.n, cap=self.config.enumeration_cap))

    def prob_connected(self, params: ModelParams, precision_bits: Optional[int] = None):
        """P(C_alpha = {X}) = c_n / m_n."""
        table = self.cumulants(params.n, params, precision_bits)
        return table.cumulant(params.n) / table.moment(params.n)

    def prob_isolated_sets(self, sizes: Sequence[int], params: ModelParams):
        """P(D_1..D_k isolated) = prod m_(d_i) m_(n - sum d_i) / m_n."""
        total = sum(sizes)
        if any(d < 1 for d in sizes) or total > params.n:
            raise domain_error("set sizes must be positive and sum to at most n", "DomainError",
                               sizes=list(sizes), n=params.n)
        row = self._moment_row(params, self.config.precision_bits)
        value = row[params.n - total] / row[params.n]
        for d in sizes:
            value *= row[d]
        return value

    def prob_clusters(self, sizes: Sequence[int], params: ModelParams, precision_bits: Optional[int] = None):
        """P(D_1..D_k are clusters) = prod c_(d_i) (kappa/(sum d_i + kappa))^alpha."""
        total = sum(sizes)
        if not sizes or any(d < 1 for d in sizes) or total > params.n:
            raise domain_error("set sizes must be positive and sum to at most n", "DomainError",
                               sizes=list(sizes), n=params.n)
        table = self.cumulants(max(sizes), params, precision_bits)
        ctx = _context(table.precision_bits)
        value = ctx.power(_to_mpf(ctx, params.kappa) / (total + _to_mpf(ctx, params.kappa)),
                          _to_mpf(ctx, params.alpha))
        for d in sizes:
            value *= table.cumulant(d)
        return value

    # --- counts of isolated vertices and of clusters of size d ---

    def factorial_moment_isolated_vertices(self, k: int, params: ModelParams):
        """E[(|I_1|)_k] = n(n-1)..(n-k+1) (kappa/(k+kappa))^alpha (1 - 1/(n+kappa))^(-k alpha)."""
        if k < 0:
            raise domain_error("k must be nonnegative", "DomainError", k=k)
        ctx = _context(self.config.precision_bits)
        if k == 0:
            return ctx.mpf(1)
        falling = falling_factorial(params.n, k)
        if falling == 0:
            return ctx.mpf(0)
        kappa, alpha = _to_mpf(ctx, params.kappa), _to_mpf(ctx, params.alpha)
        return (falling * ctx.power(kappa / (k + kappa), alpha)
                * ctx.power(self.moment(1, params, self.config.precision_bits), k))

    def moment_isolated_fraction(self, k: int, params: ModelParams):
        """E[(|I_1|/n)^k] from the factorial moments with Stirling numbers of the second kind."""
        ctx = _context(self.config.precision_bits)
        total = ctx.fsum(int(stirling(k, j)) * self.factorial_moment_isolated_vertices(j, params)
                         for j in range(k + 1))
        return total / ctx.power(params.n, k)

    def factorial_moment_size_d(self, d: int, k: int, params: ModelParams, precision_bits: Optional[int] = None):
        """E[(|I_d|)_k] = prod_j binom(n - jd, d) c_d^k (kappa/(kd+kappa))^alpha."""
        if d < 1 or k < 0:
            raise domain_error("need d >= 1 and k >= 0", "DomainError", d=d, k=k)
        table = self.cumulants(d, params, precision_bits)
        ctx = _context(table.precision_bits)
        if k == 0:
            return ctx.mpf(1)
        if k * d > params.n:
            return ctx.mpf(0)
        choose = math.prod(math.comb(params.n - j * d, d) for j in range(k))
        kappa = _to_mpf(ctx, params.kappa)
        return (choose * ctx.power(table.cumulant(d), k)
                * ctx.power(kappa / (k * d + kappa), _to_mpf(ctx, params.alpha)))

    def cumulant_asymptotic_ratio(self, d: int, params: ModelParams, precision_bits: Optional[int] = None):
        """c_d / (alpha (d-1)! n^-d); tends to 1 as n grows."""
        if d < 2:
            raise domain_error("d must be at least 2", "DomainError", d=d)
        table = self.cumulants(d, params, precision_bits)
        ctx = _context(table.precision_bits)
        leading = _to_mpf(ctx, params.alpha) * math.factorial(d - 1) / ctx.power(params.n, d)
        return table.cumulant(d) / leading

    # --- the Poisson-mixture limit of |I_d| ---

    def poisson_mixture_pmf(self, k: int, d: int, kappa: float, alpha: float):
        """P(|I_d| = k) in the limit: E[H^k e^-H] / k!, by quadrature against the density of H."""
        if k < 0 or d < 1:
            raise domain_error("need k >= 0 and d >= 1", "DomainError", k=k, d=d)
        ctx = _context(self.config.quadrature_bits)
        rate = _to_mpf(ctx, kappa) / d
        a = _to_mpf(ctx, alpha)
        log_norm = ctx.loggamma(a)
        k_factorial = ctx.factorial(k)

        def integrand(x):
            if x <= 0 or x >= 1:
                return ctx.zero
            z = -rate * ctx.log(x)
            # density of H: rate z^(a-1) x^(rate-1) / Gamma(a)
            density = rate * ctx.exp((a - 1) * ctx.log(z) + (rate - 1) * ctx.log(x) - log_norm)
            return ctx.power(x, k) * ctx.exp(-x) / k_factorial * density

        retrying = Retrying(
            stop=stop_after_attempt(3),
            retry=retry_if_exception(lambda e: isinstance(e, LoopSoupException) and e.error_type == "QuadratureError"),
            reraise=True,
        )
        for attempt in retrying:
            with attempt:
                degree = 6 + 2 * attempt.retry_state.attempt_number
                value, error = ctx.quad(integrand, [0, ctx.mpf(1) / 2, 1], error=True, maxdegree=degree)
                if error > self.config.quadrature_tolerance:
                    raise LoopSoupException(
                        ArithmeticError("quadrature did not reach the requested tolerance"),
                        error_type="QuadratureError",
                        context={"k": k, "d": d, "kappa": kappa, "alpha": alpha, "error": float(error),
                                 "maxdegree": degree},
                        exit_code=EXIT_NUMERIC)
        return value

    def poisson_mixture_pmf_series(self, k: int, d: int, kappa: float, alpha: float, terms: Optional[int] = None):
        """sum_j (-1)^j / (k! j!) E[H^(k+j)]: the alternating-series evaluation of the same pmf."""
        ctx = _context(self.config.precision_bits)
        terms = terms or self.config.mixture_series_terms
        kap, a = _to_mpf(ctx, kappa), _to_mpf(ctx, alpha)
        k_factorial = ctx.factorial(k)
        return ctx.fsum((-1) ** j / (k_factorial * ctx.factorial(j)) * ctx.power(kap / ((k + j) * d + kap), a)
                        for j in range(terms))

    # --- batch entry point ---

    def evaluate_batch(self, requests: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
        """Evaluate a list of {"op": name, "args": {...}}; values become decimal strings."""
        start_time = time.time()
        results = []
        for request in requests:
            op = request.get("op")
            handler = self._handlers().get(op)
            if handler is None:
                raise domain_error(f"unknown exact-engine operation '{op}'", "InvalidConfig", op=op)
            args = dict(request.get("args", {}))
            results.append({"op": op, "args": args, "value": self.render(handler(args))})
        logger.info(f"Evaluated {len(results)} exact-engine requests in {time.time() - start_time:.2f} seconds")
        return results

    def render(self, value: Any) -> Any:
        if isinstance(value, LoopMass):
            return {"exact": repr(value.exact), "closed_form": repr(value.closed_form)}
        if isinstance(value, MomentTable):
            return value.to_dict()
        if isinstance(value, (float, int)):
            return repr(value)
        if hasattr(value, "context") and hasattr(value.context, "prec"):
            bits = value.context.prec
            return value.context.nstr(value, int(bits * math.log10(2)))
        return str(value)

    def _handlers(self) -> Dict[str, Callable[[Dict[str, Any]], Any]]:
        def params(a):
            return ModelParams(n=int(a["n"]), kappa=a["kappa"], alpha=a.get("alpha", 1.0))

        def partition(a):
            return Partition.from_json(a["partition"])

        return {
            "moment": lambda a: self.moment(int(a["j"]), params(a)),
            "cumulants": lambda a: self.cumulants(int(a["upto"]), params(a), a.get("precision_bits")),
            "prob_finer": lambda a: self.prob_finer(partition(a), params(a)),
            "prob_exact": lambda a: self.prob_exact(partition(a), params(a)),
            "prob_connected": lambda a: self.prob_connected(params(a), a.get("precision_bits")),
            "prob_isolated_sets": lambda a: self.prob_isolated_sets(a["sizes"], params(a)),
            "prob_clusters": lambda a: self.prob_clusters(a["sizes"], params(a)),
            "factorial_moment_isolated_vertices":
                lambda a: self.factorial_moment_isolated_vertices(int(a["k"]), params(a)),
            "moment_isolated_fraction": lambda a: self.moment_isolated_fraction(int(a["k"]), params(a)),
            "factorial_moment_size_d":
                lambda a: self.factorial_moment_size_d(int(a["d"]), int(a["k"]), params(a), a.get("precision_bits")),
            "cumulant_asymptotic_ratio": lambda a: self.cumulant_asymptotic_ratio(int(a["d"]), params(a)),
            "poisson_mixture_pmf":
                lambda a: self.poisson_mixture_pmf(int(a["k"]), int(a["d"]), a["kappa"], a.get("alpha", 1.0)),
            "limit_moment_R": lambda a: limit_moment_R(int(a["k"]), a["kappa"], a.get("alpha", 1.0)),
            "limit_moment_H": lambda a: limit_moment_H(int(a["k"]), int(a["d"]), a["kappa"], a.get("alpha", 1.0)),
            "limit_factorial_moment_size_d":
                lambda a: limit_factorial_moment_size_d(int(a["d"]), int(a["k"]), a["kappa"], a.get("alpha", 1.0)),
            "dgon_measure": lambda a: dgon_measure(int(a["d"]), int(a["n"]), a["kappa"]),
            "loop_mass": lambda a: loop_mass(int(a["n"]), a["kappa"]),
            "long_loop_mass": lambda a: long_loop_mass(int(a["n"]), a["kappa"], int(a["min_length"])),
            "size_gf": lambda a: size_gf(float(a["theta"]), params(a)),
            "expected_support": lambda a: expected_support(int(a["n"]), int(a["x"])),
            "large_cluster_probability_bound":
                lambda a: large_cluster_probability_bound(int(a["n"]), a.get("alpha", 1.0), a["epsilon"]),
        }
