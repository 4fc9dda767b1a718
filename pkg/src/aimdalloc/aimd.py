"""Per-agent AIMD transitions and the control unit's capacity test.

Everything here is a pure function of its arguments plus, for
``agent_step``, the caller's random stream. Bernoulli responses consume
exactly one ``rng.random()`` variate per signalled resource, in resource
order; a response happens when the variate is below the probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_vector
from .cost_model import CostFunction
from .exceptions import ConfigError

LAMBDA_MIN = 1e-9


def _vec(values, m=None):
    arr = np.atleast_1d(np.asarray(values, dtype=float)).copy()
    if m is not None and arr.size == 1 and m > 1:
        arr = np.full(m, arr[0])
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AimdParams:
    """Per-resource constants broadcast by the control unit.

    ``gamma_norm`` scales the response probability and must satisfy
    ``0 < gamma_norm <= delta``; it defaults to ``delta``. ``gamma_soft``
    makes the control unit signal at ``gamma_soft * C`` instead of ``C``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    gamma_norm: np.ndarray | None = None
    gamma_soft: np.ndarray | None = None

    def __post_init__(self):
        alpha = _vec(self.alpha)
        m = alpha.size
        beta = _vec(self.beta, m)
        delta = _vec(self.delta, m)
        gamma_norm = gamma_from_delta(delta) if self.gamma_norm is None else _vec(self.gamma_norm, m)
        gamma_soft = _vec(np.ones(m) if self.gamma_soft is None else self.gamma_soft, m)
        for name, value in (("alpha", alpha), ("beta", beta), ("delta", delta),
                            ("gamma_norm", gamma_norm), ("gamma_soft", gamma_soft)):
            object.__setattr__(self, name, value)
        errors = self.violations()
        if errors:
            raise ConfigError(errors)

    def __eq__(self, other):
        return isinstance(other, AimdParams) and self.to_dict() == other.to_dict()

    __hash__ = None

    @property
    def m(self) -> int:
        return self.alpha.size

    def violations(self, prefix: str = "params") -> list[str]:
        """Every broken invariant, as ``field.path: message`` strings."""
        errors = []
        m = self.m
        for name in ("beta", "delta", "gamma_norm", "gamma_soft"):
            if getattr(self, name).size != m:
                errors.append(f"{prefix}.{name}: length {getattr(self, name).size}, expected {m}")
        if errors:
            return errors
        for j in range(m):
            if not self.alpha[j] > 0:
                errors.append(f"{prefix}.alpha[{j}]: must be > 0, got {self.alpha[j]}")
            if not 0 <= self.beta[j] < 1:
                errors.append(f"{prefix}.beta[{j}]: must be in [0, 1), got {self.beta[j]}")
            if not self.delta[j] > 0:
                errors.append(f"{prefix}.delta[{j}]: must be > 0, got {self.delta[j]}")
            if not 0 < self.gamma_norm[j] <= self.delta[j]:
                errors.append(f"{prefix}.gamma_norm[{j}]/{prefix}.delta[{j}]: need 0 < gamma_norm <= delta, "
                              f"got gamma_norm={self.gamma_norm[j]}, delta={self.delta[j]}")
            if not 0 < self.gamma_soft[j] <= 1:
                errors.append(f"{prefix}.gamma_soft[{j}]: must be in (0, 1], got {self.gamma_soft[j]}")
        return errors

    def to_dict(self) -> dict:
        return {name: [float(v) for v in getattr(self, name)]
                for name in ("alpha", "beta", "gamma_norm", "delta", "gamma_soft")}

    @classmethod
    def from_dict(cls, data: dict) -> "AimdParams":
        return cls(**{k: data[k] for k in ("alpha", "beta", "delta", "gamma_norm", "gamma_soft") if k in data})


@dataclass(frozen=True)
class AgentState:
    """Instantaneous allocation ``x``, running average ``xbar``, step ``k``.

    ``clamps`` counts response probabilities that fell outside (0, 1).
    """

    x: np.ndarray
    xbar: np.ndarray
    k: int = 0
    clamps: int = 0

    @classmethod
    def initial(cls, m: int) -> "AgentState":
        return cls(np.zeros(m), np.zeros(m), 0, 0)


@dataclass(frozen=True)
class CapacitySignals:
    s: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))

    def __post_init__(self):
        s = np.asarray(self.s)
        if np.any((s != 0) & (s != 1)):
            raise ValueError("capacity signals are bits")
        object.__setattr__(self, "s", s.astype(np.uint8))

    @classmethod
    def zeros(cls, m: int) -> "CapacitySignals":
        return cls(np.zeros(m, dtype=np.uint8))

    @property
    def bits(self) -> int:
        """Broadcast cost of this signal vector."""
        return int(self.s.sum())


def gamma_from_delta(delta) -> np.ndarray:
    """Normalization factor: the infimum of ``x^j / grad_j f`` over the class.

    Inside the class ``x^j / grad_j f(x) > delta_j`` everywhere, and the
    bound is approached, so the infimum is ``delta_j`` itself.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    bad = [j for j, d in enumerate(delta) if not d > 0]
    if bad:
        raise ConfigError([f"delta[{j}]: must be > 0, got {delta[j]}" for j in bad])
    return delta.copy()


def response_probability(f: CostFunction, xbar, gamma_norm) -> tuple[np.ndarray, int]:
    """Back-off probability per resource and the number of clamped entries.

    ``gamma_norm_j * grad_j f(xbar) / xbar^j``; zero where ``xbar^j == 0``.
    Computed values outside (0, 1) are clamped into
    ``[LAMBDA_MIN, 1 - LAMBDA_MIN]`` and counted.
    """
    xbar = check_vector(xbar, f.resource_count, name="xbar", nonnegative=True)
    lam, clamped = lambda_from_gradient(f.gradient(xbar), xbar, np.asarray(gamma_norm, dtype=float))
    return lam, int(clamped.sum())


def lambda_from_gradient(grad, xbar, gamma_norm):
    """Vectorized core of :func:`response_probability`.

    Works elementwise on arrays of any matching shape and returns the
    probabilities together with the boolean mask of clamped entries.
    """
    positive = xbar > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(positive, gamma_norm * grad / xbar, 0.0)
    clamped = positive & ~((lam > 0) & (lam < 1))
    if clamped.any():
        lam = np.where(clamped, np.clip(np.nan_to_num(lam, nan=LAMBDA_MIN), LAMBDA_MIN, 1 - LAMBDA_MIN), lam)
    return lam, clamped


def update_average(xbar, x_next, k: int) -> np.ndarray:
    """Running mean after step ``k+1``: ``((k+1) xbar + x_next) / (k+2)``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return ((k + 1) * np.asarray(xbar, dtype=float) + np.asarray(x_next, dtype=float)) / (k + 2)


def agent_step(state: AgentState, signals: CapacitySignals, f: CostFunction,
               params: AimdParams, rng: np.random.Generator) -> AgentState:
    """One AIMD update of a single agent.

    Unsignalled resources grow by ``alpha``; signalled ones shrink by
    ``beta`` with the response probability, otherwise stay put.
    """
    s = np.asarray(signals.s)
    m = f.resource_count
    if s.size != m:
        raise ValueError(f"expected {m} signals, got {s.size}")
    x = state.x.astype(float, copy=True)
    clamps = state.clamps
    if s.any():
        lam, clamped = lambda_from_gradient(f.gradient(state.xbar), state.xbar, params.gamma_norm)
        # only probabilities that are actually used count as clamps
        clamps += int((clamped & (s == 1)).sum())
        for j in range(m):
            if s[j]:
                if rng.random() < lam[j]:
                    x[j] = params.beta[j] * x[j]
    x = np.where(s == 0, x + params.alpha, x)
    xbar = update_average(state.xbar, x, state.k)
    return AgentState(x, xbar, state.k + 1, clamps)


def detect_capacity_events(total_demand, capacities, gamma_soft=None) -> CapacitySignals:
    """Control unit: ``s^j = 1`` iff ``total_demand^j > gamma_soft^j * C^j`` (strict)."""
    total = np.atleast_1d(np.asarray(total_demand, dtype=float))
    capacities = np.atleast_1d(np.asarray(capacities, dtype=float))
    if np.any(capacities <= 0):
        raise ValueError("capacities must be positive")
    gamma_soft = np.ones_like(capacities) if gamma_soft is None else np.asarray(gamma_soft, dtype=float)
    return CapacitySignals((total > gamma_soft * capacities).astype(np.uint8))
