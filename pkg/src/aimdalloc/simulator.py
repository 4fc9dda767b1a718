"""Synchronous rounds between ``n`` AIMD agents and one control unit.

Randomness. Agent ``i`` owns two private streams, both PCG64 seeded from
``numpy.random.SeedSequence(seed, spawn_key=(domain, i))``: domain 0 draws
the agent's cost function (paper-camera scenario), domain 1 supplies its
Bernoulli responses. Responses are read from per-agent buffers filled by
``rng.random(size)``, which yields the same variates as repeated scalar
``rng.random()`` calls, so the vectorized round is bit-identical to
stepping every agent with :func:`aimdalloc.aimd.agent_step`.

Signal timing. In ``fresh`` mode the control unit tests the totals the
agents just produced; in ``literal`` mode it tests the totals from the
previous round, so agents react one step later.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aimd import AgentState, AimdParams, CapacitySignals, lambda_from_gradient
from .cost_model import CostFunction, CameraCostRanges, StackedCosts, sample_paper_cost
from .exceptions import ConfigError

SIGNAL_MODES = ("fresh", "literal")
COST_STREAM, RESPONSE_STREAM = 0, 1
_BUFFER_WIDTH = 1024


def agent_rng(seed: int, agent: int, domain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(domain, agent)))


@dataclass(frozen=True)
class CameraCosts:
    """Cost spec: draw each agent's cost from the three-branch camera family."""

    ranges: CameraCostRanges = field(default_factory=CameraCostRanges)

    def build(self, n: int, seed: int) -> list[CostFunction]:
        return [sample_paper_cost(agent_rng(seed, i, COST_STREAM), self.ranges) for i in range(n)]


@dataclass(frozen=True, eq=False)
class SimConfig:
    n: int
    m: int
    horizon: int
    capacities: np.ndarray
    params: AimdParams
    seed: int = 0
    costs: CameraCosts | tuple[CostFunction, ...] = field(default_factory=CameraCosts)
    signal_mode: str = "fresh"
    snapshot_stride: int = 30

    def __post_init__(self):
        caps = np.atleast_1d(np.asarray(self.capacities, dtype=float)).copy()
        caps.setflags(write=False)
        object.__setattr__(self, "capacities", caps)
        if not isinstance(self.costs, CameraCosts):
            object.__setattr__(self, "costs", tuple(self.costs))
        errors = sim_config_violations(self)
        if errors:
            raise ConfigError(errors)

    def __eq__(self, other):
        if not isinstance(other, SimConfig):
            return NotImplemented
        return (self.n, self.m, self.horizon, self.seed, self.signal_mode, self.snapshot_stride,
                self.capacities.tolist(), self.params, self.costs) == (
            other.n, other.m, other.horizon, other.seed, other.signal_mode, other.snapshot_stride,
            other.capacities.tolist(), other.params, other.costs)

    __hash__ = None

    def build_costs(self) -> list[CostFunction]:
        if isinstance(self.costs, CameraCosts):
            return self.costs.build(self.n, self.seed)
        return list(self.costs)

    def replace(self, **changes) -> "SimConfig":
        from dataclasses import replace
        return replace(self, **changes)


def sim_config_violations(cfg, prefix: str = "") -> list[str]:
    """All violated invariants of a (possibly partial) configuration."""
    errors = []
    p = prefix

    def is_int(v):
        return isinstance(v, (int, np.integer)) and not isinstance(v, bool)

    if not (is_int(cfg.n) and cfg.n >= 1):
        errors.append(f"{p}n: must be an integer >= 1, got {cfg.n!r}")
    if not (is_int(cfg.m) and cfg.m >= 1):
        errors.append(f"{p}m: must be an integer >= 1, got {cfg.m!r}")
    if not (is_int(cfg.horizon) and cfg.horizon >= 1):
        errors.append(f"{p}horizon: must be an integer >= 1, got {cfg.horizon!r}")
    caps = np.atleast_1d(np.asarray(cfg.capacities, dtype=float))
    if is_int(cfg.m) and caps.size != cfg.m:
        errors.append(f"{p}capacities: length {caps.size}, expected m={cfg.m}")
    for j, c in enumerate(caps):
        if not c > 0:
            errors.append(f"{p}capacities[{j}]: must be > 0, got {c}")
    if cfg.params is not None and is_int(cfg.m) and cfg.params.m != cfg.m:
        errors.append(f"{p}params: vectors have length {cfg.params.m}, expected m={cfg.m}")
    if cfg.signal_mode not in SIGNAL_MODES:
        errors.append(f"{p}signal_mode: must be one of {SIGNAL_MODES}, got {cfg.signal_mode!r}")
    if not (is_int(cfg.snapshot_stride) and cfg.snapshot_stride >= 1):
        errors.append(f"{p}snapshot_stride: must be an integer >= 1, got {cfg.snapshot_stride!r}")
    if not is_int(cfg.seed):
        errors.append(f"{p}seed: must be an integer, got {cfg.seed!r}")
    if isinstance(cfg.costs, CameraCosts):
        if is_int(cfg.m) and cfg.m != 3:
            errors.append(f"{p}costs: the paper-camera scenario needs m=3, got m={cfg.m}")
    else:
        costs = tuple(cfg.costs)
        if is_int(cfg.n) and len(costs) != cfg.n:
            errors.append(f"{p}costs: {len(costs)} cost functions for n={cfg.n} agents")
        for i, f in enumerate(costs):
            if is_int(cfg.m) and f.resource_count != cfg.m:
                errors.append(f"{p}costs[{i}]: defined over {f.resource_count} resources, expected m={cfg.m}")
    return errors


@dataclass
class SimState:
    """Population state between rounds.

    ``x``/``xbar`` are (n, m); ``signals`` is S(step), the vector the
    agents will read in the next round.
    """

    x: np.ndarray
    xbar: np.ndarray
    signals: np.ndarray
    step: int
    clamp_count: int
    event_counts: np.ndarray
    totals: np.ndarray
    xbar_peak: np.ndarray
    agent_clamps: np.ndarray
    lambda_min: float = np.inf
    lambda_max: float = -np.inf
    rngs: list = field(default_factory=list, repr=False)
    buffer: np.ndarray | None = field(default=None, repr=False)
    buffer_pos: int = 0

    def agent(self, i: int) -> AgentState:
        return AgentState(self.x[i].copy(), self.xbar[i].copy(), self.step, int(self.agent_clamps[i]))

    @property
    def agents(self) -> list[AgentState]:
        return [self.agent(i) for i in range(self.x.shape[0])]

    def capacity_signals(self) -> CapacitySignals:
        return CapacitySignals(self.signals.copy())

    def draw_uniforms(self, count: int) -> np.ndarray:
        """Next ``count`` response variates of every agent, shape (n, count)."""
        if self.buffer is None or self.buffer_pos + count > self.buffer.shape[1]:
            fresh = np.stack([rng.random(_BUFFER_WIDTH) for rng in self.rngs])
            rest = self.buffer[:, self.buffer_pos:] if self.buffer is not None else fresh[:, :0]
            self.buffer = np.concatenate([rest, fresh], axis=1)
            self.buffer_pos = 0
        u = self.buffer[:, self.buffer_pos:self.buffer_pos + count]
        self.buffer_pos += count
        return u


@dataclass
class Trace:
    """Everything recorded over one run.

    Row ``r`` of ``total_x``/``total_xbar``/``signals`` describes step
    ``r + 1``: the population totals after round ``r`` and the signal the
    control unit emitted at the end of that round.
    """

    total_x: np.ndarray
    total_xbar: np.ndarray
    signals: np.ndarray
    snapshot_steps: np.ndarray
    snapshot_x: np.ndarray
    snapshot_xbar: np.ndarray
    checkpoint_steps: np.ndarray
    checkpoint_events: np.ndarray
    checkpoint_xbar: np.ndarray
    final: SimState
    costs: list[CostFunction]
    capacities: np.ndarray

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, self.total_x.shape[0] + 1)

    @property
    def event_counts(self) -> np.ndarray:
        return self.final.event_counts

    @property
    def clamp_count(self) -> int:
        return self.final.clamp_count

    @property
    def xbar_final(self) -> np.ndarray:
        return self.final.xbar

    def checkpoint_xbar_at(self, step: int) -> np.ndarray:
        idx = np.flatnonzero(self.checkpoint_steps == step)
        if not idx.size:
            raise KeyError(f"no checkpoint at step {step}")
        return self.checkpoint_xbar[idx[0]]

    def event_checkpoints(self) -> list[tuple[int, np.ndarray]]:
        return [(int(k), c) for k, c in zip(self.checkpoint_steps, self.checkpoint_events)]

    def to_csv(self) -> str:
        """One row per step: ``step`` then ``total_x_j, total_xbar_j, signal_j`` per resource."""
        m = self.total_x.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["step"]
        for j in range(1, m + 1):
            header += [f"total_x_{j}", f"total_xbar_{j}", f"signal_{j}"]
        w.writerow(header)
        tx, txb, sig = self.total_x.tolist(), self.total_xbar.tolist(), self.signals.tolist()
        for r in range(len(tx)):
            row = [r + 1]
            for j in range(m):
                row += [repr(tx[r][j]), repr(txb[r][j]), sig[r][j]]
            w.writerow(row)
        return buf.getvalue()

    def snapshots_to_csv(self) -> str:
        """``step, agent, x_1..x_m, xbar_1..xbar_m`` for every snapshot."""
        m = self.total_x.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "agent"] + [f"x_{j}" for j in range(1, m + 1)]
                   + [f"xbar_{j}" for j in range(1, m + 1)])
        for s, xs, xbs in zip(self.snapshot_steps.tolist(), self.snapshot_x.tolist(), self.snapshot_xbar.tolist()):
            for i, (xi, xbi) in enumerate(zip(xs, xbs)):
                w.writerow([s, i] + [repr(v) for v in xi] + [repr(v) for v in xbi])
        return buf.getvalue()


class Simulator:
    """Runs the control unit and all agents for one configuration."""

    def __init__(self, config: SimConfig, costs: Sequence[CostFunction] | None = None):
        self.config = config
        self.costs = list(costs) if costs is not None else config.build_costs()
        if len(self.costs) != config.n:
            raise ConfigError(f"costs: {len(self.costs)} cost functions for n={config.n} agents")
        self.stacked = StackedCosts(self.costs)
        p = config.params
        self._alpha, self._beta, self._gamma_norm = p.alpha, p.beta, p.gamma_norm
        self._threshold = p.gamma_soft * config.capacities
        self.state = self.init()

    def init(self) -> SimState:
        """All allocations, averages and signals start at zero."""
        n, m = self.config.n, self.config.m
        return SimState(
            x=np.zeros((n, m)), xbar=np.zeros((n, m)), signals=np.zeros(m, dtype=np.uint8),
            step=0, clamp_count=0, event_counts=np.zeros(m, dtype=np.int64), totals=np.zeros(m),
            xbar_peak=np.zeros((n, m)), agent_clamps=np.zeros(n, dtype=np.int64),
            rngs=[agent_rng(self.config.seed, i, RESPONSE_STREAM) for i in range(n)],
        )

    def round(self) -> SimState:
        """Agents read S(step) and move; the control unit emits S(step+1)."""
        st = self.state
        if st.step >= self.config.horizon:
            raise RuntimeError("horizon reached")
        sig = st.signals.astype(bool)
        x, xbar = st.x, st.xbar
        if sig.any():
            cols = np.flatnonzero(sig)
            grad = self.stacked.gradient(xbar)[:, cols]
            xb = xbar[:, cols]
            lam, clamped = lambda_from_gradient(grad, xb, self._gamma_norm[cols])
            if clamped.any():
                st.clamp_count += int(clamped.sum())
                st.agent_clamps += clamped.sum(axis=1)
            live = lam[xb > 0]
            if live.size:
                st.lambda_min = min(st.lambda_min, float(live.min()))
                st.lambda_max = max(st.lambda_max, float(live.max()))
            u = st.draw_uniforms(cols.size)
            xs = x[:, cols]
            x[:, cols] = np.where(u < lam, self._beta[cols] * xs, xs)
        quiet = ~sig
        x[:, quiet] = x[:, quiet] + self._alpha[quiet]
        k = st.step
        st.xbar = ((k + 1) * xbar + x) / (k + 2)
        totals = x.sum(axis=0)
        tested = totals if self.config.signal_mode == "fresh" else st.totals
        st.signals = (tested > self._threshold).astype(np.uint8)
        st.totals = totals
        st.event_counts += st.signals
        np.maximum(st.xbar_peak, st.xbar, out=st.xbar_peak)
        st.step = k + 1
        return st

    def run(self, checkpoint_stride: int | None = 1000) -> Trace:
        cfg = self.config
        K, m, n = cfg.horizon, cfg.m, cfg.n
        total_x = np.empty((K, m))
        total_xbar = np.empty((K, m))
        signals = np.empty((K, m), dtype=np.uint8)
        snap_steps, snap_x, snap_xbar = [], [], []
        cp_steps, cp_events, cp_xbar = [], [], []
        while self.state.step < K:
            st = self.round()
            r = st.step - 1
            total_x[r] = st.totals
            total_xbar[r] = st.xbar.sum(axis=0)
            signals[r] = st.signals
            if st.step % cfg.snapshot_stride == 0:
                snap_steps.append(st.step)
                snap_x.append(st.x.copy())
                snap_xbar.append(st.xbar.copy())
            if checkpoint_stride and st.step % checkpoint_stride == 0:
                cp_steps.append(st.step)
                cp_events.append(st.event_counts.copy())
                cp_xbar.append(st.xbar.copy())

        def stack(items, shape):
            return np.array(items) if items else np.zeros((0,) + shape)

        return Trace(
            total_x=total_x, total_xbar=total_xbar, signals=signals,
            snapshot_steps=np.array(snap_steps, dtype=np.int64),
            snapshot_x=stack(snap_x, (n, m)), snapshot_xbar=stack(snap_xbar, (n, m)),
            checkpoint_steps=np.array(cp_steps, dtype=np.int64),
            checkpoint_events=stack(cp_events, (m,)).astype(np.int64),
            checkpoint_xbar=stack(cp_xbar, (n, m)),
            final=self.state, costs=self.costs, capacities=cfg.capacities,
        )


def init(config: SimConfig) -> SimState:
    return Simulator(config).state


def run(config: SimConfig, checkpoint_stride: int | None = 1000) -> Trace:
    """Simulate ``config.horizon`` rounds from the zero state."""
    return Simulator(config).run(checkpoint_stride)
