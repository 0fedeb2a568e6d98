"""Finite weighted graphs with killing, transition matrices and Green determinants.

The general path works on dense numpy matrices. Graphs built with
`GraphSpec.complete` carry their killing constant and take the closed forms
for K_n with unit conductances, evaluated as logarithms so that det G, which
behaves like (n+kappa)^-(n-1), never underflows.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TYPE_CHECKING

import numpy as np

from loopsoup.src.utils.exception import LoopSoupException, domain_error, EXIT_NUMERIC

if TYPE_CHECKING:
    from loopsoup.src.components.partition_lattice import Partition


@dataclass(frozen=True, eq=False)
class GraphSpec:
    """Symmetric conductances C (zero diagonal) and per-vertex killing rates."""
    conductances: np.ndarray
    killing: np.ndarray
    complete_kappa: Optional[float] = None

    def __post_init__(self):
        c = np.array(self.conductances, dtype=float)
        kill = np.array(self.killing, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 2:
            raise domain_error("conductances must be a square matrix of size >= 2", "InvalidGraph",
                               shape=c.shape)
        if kill.shape != (c.shape[0],):
            raise domain_error("killing must have one entry per vertex", "InvalidGraph",
                               n=c.shape[0], killing=kill.shape)
        if not np.allclose(c, c.T, rtol=0, atol=1e-12):
            raise domain_error("conductances must be symmetric", "InvalidGraph")
        if np.any(np.diag(c) != 0):
            raise domain_error("conductances must have a zero diagonal", "InvalidGraph")
        if np.any(c < 0) or np.any(kill < 0):
            raise domain_error("conductances and killing must be nonnegative", "InvalidGraph")
        if not np.any(kill > 0):
            raise domain_error("killing vanishes everywhere; the Green matrix does not exist",
                               "InvalidGraph", n=c.shape[0])
        c.setflags(write=False)
        kill.setflags(write=False)
        object.__setattr__(self, "conductances", c)
        object.__setattr__(self, "killing", kill)

    @classmethod
    def complete(cls, n: int, kappa: float) -> "GraphSpec":
        """K_n with unit conductances and constant killing `kappa`."""
        if n < 2 or not kappa > 0:
            raise domain_error("K_n needs n >= 2 and kappa > 0", "InvalidGraph", n=n, kappa=kappa)
        c = np.ones((n, n)) - np.eye(n)
        return cls(conductances=c, killing=np.full(n, float(kappa)), complete_kappa=float(kappa))

    @classmethod
    def from_dict(cls, data: dict) -> "GraphSpec":
        """Build from the JSON config schema: n, kappa, optional conductances / killing."""
        n = int(data["n"])
        if data.get("conductances") is None and data.get("killing") is None:
            return cls.complete(n, float(data["kappa"]))
        c = np.asarray(data.get("conductances", np.ones((n, n)) - np.eye(n)), dtype=float).reshape(n, n)
        kill = data.get("killing")
        kill = np.full(n, float(data["kappa"])) if kill is None else np.asarray(kill, dtype=float)
        return cls(conductances=c, killing=kill)

    def to_dict(self) -> dict:
        out = {"n": self.n}
        if self.is_complete:
            out["kappa"] = self.complete_kappa
        else:
            out["conductances"] = self.conductances.reshape(-1).tolist()
            out["killing"] = self.killing.tolist()
        return out

    @property
    def n(self) -> int:
        return int(self.conductances.shape[0])

    @property
    def is_complete(self) -> bool:
        return self.complete_kappa is not None

    @property
    def lambdas(self) -> np.ndarray:
        return self.conductances.sum(axis=1) + self.killing

    def laplacian(self) -> np.ndarray:
        """The matrix lambda_x delta_xy - C_xy whose inverse is G."""
        return np.diag(self.lambdas) - self.conductances


@dataclass(frozen=True)
class CompleteGraphParams:
    n: int
    kappa: float

    def to_graph(self) -> GraphSpec:
        return GraphSpec.complete(self.n, self.kappa)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    entries: np.ndarray
    spectral_radius: float

    @property
    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)


def build_transition(g: GraphSpec) -> TransitionMatrix:
    """P_xy = C_xy / lambda_x together with its spectral radius."""
    lam = g.lambdas
    if np.any(lam <= 0):
        raise domain_error("some lambda_x vanishes", "InvalidGraph", vertices=np.flatnonzero(lam <= 0).tolist())
    entries = g.conductances / lam[:, None]
    entries.setflags(write=False)
    if g.is_complete:
        rho = (g.n - 1) / (g.n - 1 + g.complete_kappa)
    else:
        # P is similar to the symmetric D^-1/2 C D^-1/2
        scale = 1.0 / np.sqrt(lam)
        rho = float(np.max(np.abs(np.linalg.eigvalsh(scale[:, None] * g.conductances * scale[None, :]))))
    return TransitionMatrix(entries=entries, spectral_radius=float(rho))


def log_equicorrelated_det(a: float, b: float, m: int) -> float:
    """log det of the m x m matrix with diagonal a+b and off-diagonal b, i.e. log(a^(m-1)(a+mb))."""
    if m < 1:
        raise domain_error("matrix size must be positive", "DomainError", m=m)
    value = a + m * b
    if a <= 0 or value <= 0:
        raise domain_error("equicorrelated determinant is not positive", "DomainError", a=a, b=b, m=m)
    return (m - 1) * math.log(a) + math.log(value)


def _subset(g: GraphSpec, subset: Optional[Iterable[int]]) -> np.ndarray:
    if subset is None:
        return np.arange(g.n)
    idx = np.array(sorted(set(int(v) for v in subset)), dtype=int)
    if idx.size == 0:
        raise domain_error("vertex subset must be nonempty", "DomainError")
    if idx[0] < 0 or idx[-1] >= g.n:
        raise domain_error("vertex subset out of range", "VertexOutOfRange", n=g.n)
    return idx


def log_green_det(g: GraphSpec, subset: Optional[Iterable[int]] = None, dense: bool = False) -> float:
    """log det G^D; `subset=None` means D = X. `dense=True` forces the LU path."""
    idx = _subset(g, subset)
    d = idx.size
    if g.is_complete and not dense:
        # restriction of lambda*I - C on K_n: diagonal n-1+kappa, off-diagonal -1
        return -log_equicorrelated_det(g.n + g.complete_kappa, -1.0, d)
    sign, logdet = np.linalg.slogdet(g.laplacian()[np.ix_(idx, idx)])
    if sign <= 0 or not np.isfinite(logdet):
        raise LoopSoupException(ArithmeticError("restricted matrix is numerically singular"),
                                error_type="SingularMatrix", context={"size": d}, exit_code=EXIT_NUMERIC)
    return -float(logdet)


def green_det(g: GraphSpec, subset: Optional[Iterable[int]] = None, dense: bool = False) -> float:
    return math.exp(log_green_det(g, subset, dense=dense))


def log_det_ratio(g: GraphSpec, pi: "Partition", dense: bool = False) -> float:
    if pi.ground != frozenset(range(g.n)):
        raise domain_error("partition does not cover the vertex set", "PartitionMismatch",
                           n=g.n, ground_size=pi.ground_size)
    if g.is_complete and not dense:
        s = g.n + g.complete_kappa
        return math.log(g.complete_kappa / s) - sum(math.log1p(-len(block) / s) for block in pi.blocks)
    return sum(log_green_det(g, block, dense=True) for block in pi.blocks) - log_green_det(g, dense=True)


def det_ratio(g: GraphSpec, pi: "Partition", dense: bool = False) -> float:
    """prod_i det(G^{B_i}) / det(G), in (0, 1], equal to 1 only for the one-block partition."""
    return math.exp(log_det_ratio(g, pi, dense=dense))


def complete_log_det_i_minus_theta_p(n: int, kappa: float, theta: float = 1.0) -> float:
    """log det(I - theta P) on K_n without building P: eigenvalues (n-1)/s once and -1/s (n-1) times."""
    s = n - 1 + kappa
    top = 1.0 - theta * (n - 1) / s
    if top <= 0:
        raise domain_error("theta outside the convergence range", "DomainError", theta=theta, n=n, kappa=kappa)
    return math.log(top) + (n - 1) * math.log1p(theta / s)


def log_det_i_minus_theta_p(g: GraphSpec, theta: float = 1.0) -> float:
    """log det(I - theta P); defined while theta * spectral radius < 1."""
    if g.is_complete:
        return complete_log_det_i_minus_theta_p(g.n, g.complete_kappa, theta)
    p = build_transition(g)
    if theta * p.spectral_radius >= 1:
        raise domain_error("theta outside the convergence range", "DomainError",
                           theta=theta, spectral_radius=p.spectral_radius)
    sign, logdet = np.linalg.slogdet(np.eye(g.n) - theta * p.entries)
    if sign <= 0:
        raise LoopSoupException(ArithmeticError("I - theta P is not positive definite"),
                                error_type="SingularMatrix", context={"theta": theta}, exit_code=EXIT_NUMERIC)
    return float(logdet)


def complete_trace_powers(n: int, kappa: float, k_values: Sequence[int]) -> np.ndarray:
    """tr(P^k) = ((n-1)^k + (n-1)(-1)^k) / (n-1+kappa)^k on K_n, computed from logarithms."""
    k = np.asarray(k_values, dtype=float)
    log_s, log_b = math.log(n - 1 + kappa), math.log(n - 1)
    main = np.exp(k * (log_b - log_s))
    sign = np.where(np.asarray(k_values) % 2 == 0, 1.0, -1.0)
    correction = sign * np.exp(log_b - k * log_s)
    # on K_2 odd traces cancel exactly
    return np.maximum(main + correction, 0.0)
