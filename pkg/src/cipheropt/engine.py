"""Synchronous simulation engine for push-sum gradient tracking over AES channels.

Each iteration every agent scales its running state (y), mass (w), and
tracker (s) by the column weights it drew for the round, seals the three
values per out-neighbor into authenticated envelopes, and ships them. A
receiver opens what arrived, adds its own diagonal share, and applies the
update. The mass coordinate is forced back to one when the first round's
results land, which erases the random initial masses from the trajectory.

The same message loop runs the fixed-weight baseline (`push-diging`), so an
eavesdropper or a curious neighbor sees exactly the traffic that algorithm
would emit. The two fully dense baselines live at the bottom of the module.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import (
    KIND_S,
    KIND_W,
    KIND_Y,
    NonceCounter,
    PlainPayload,
    SharedKey,
    decrypt,
    encode_payload,
    encrypt,
)
from .graphs import graph_at
from .mixing import MixingParams, WeightColumn, assemble_weight_matrix, generate_weight_column
from .objectives import GlobalProblem, optimal_solution

_INIT_STREAM = 31
_WEIGHT_STREAM = 32

W_EPS = 1e-12

BASELINES = ("push-diging", "subgradient-push", "ab-push-pull")


class DegenerateStateError(ArithmeticError):
    """A mass coordinate collapsed below the division guard."""


@dataclass
class AgentState:
    agent: int
    y: np.ndarray
    w: float
    x: np.ndarray
    s: np.ndarray
    prev_grad: np.ndarray


@dataclass
class RunConfig:
    step_size: float
    horizon: int
    stop_residual: float | None = None
    encryption: bool = True
    seed: int = 0
    trial: int = 0
    mass_reset: bool = True
    record_states: bool = False
    record_weights: bool = False
    record_messages: bool = False
    x0: np.ndarray | None = None
    w0: np.ndarray | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.step_size <= 0:
            raise ValueError("step size must be positive")


@dataclass(frozen=True)
class MessageRecord:
    """One wire message: values as sent plus the exact bytes that moved."""

    k: int
    sender: int
    receiver: int
    kind: str
    data: tuple
    plain: bytes
    cipher: bytes | None


@dataclass
class Trajectory:
    algorithm: str
    residuals: np.ndarray
    iterations: int
    states: list
    x_star: np.ndarray
    config: RunConfig
    stopped_at: int | None = None
    elapsed: float = 0.0
    x_series: list = field(default_factory=list)
    y_series: list = field(default_factory=list)
    w_series: list = field(default_factory=list)
    s_series: list = field(default_factory=list)
    weight_matrices: list = field(default_factory=list)
    messages: list = field(default_factory=list)


class CryptoContext:
    """Shared key plus one nonce counter per sender, alive for a whole run."""

    def __init__(self, key: SharedKey, m: int):
        self.key = key
        self.counters = {i: NonceCounter(i) for i in range(1, m + 1)}


def relative_residual(x, x_init, x_star) -> float:
    """Squared distance of the stacked estimates to the optimum, relative to start."""
    num = float(np.sum((np.asarray(x) - x_star) ** 2))
    den = float(np.sum((np.asarray(x_init) - x_star) ** 2))
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


def _initial_positions(problem: GlobalProblem, config: RunConfig):
    ss = np.random.SeedSequence(entropy=config.seed, spawn_key=(_INIT_STREAM, config.trial))
    rng = np.random.default_rng(ss)
    x0 = rng.standard_normal((problem.m, problem.d))
    w0 = rng.uniform(-1.0, 1.0, problem.m)
    if config.x0 is not None:
        x0 = np.array(config.x0, dtype=float).reshape(problem.m, problem.d)
    if config.w0 is not None:
        w0 = np.array(config.w0, dtype=float).reshape(problem.m)
    return x0, w0


def init_agents(problem: GlobalProblem, config: RunConfig) -> list:
    """States at k=0: estimate and running state coincide, tracker holds the gradient."""
    x0, w0 = _initial_positions(problem, config)
    states = []
    for i in range(1, problem.m + 1):
        g = problem.gradient(i, x0[i - 1])
        states.append(
            AgentState(
                agent=i,
                y=x0[i - 1].copy(),
                w=float(w0[i - 1]),
                x=x0[i - 1].copy(),
                s=g,
                prev_grad=g.copy(),
            )
        )
    return states


def draw_weight_columns(graph, params: MixingParams, seed, trial, k) -> dict:
    """All agents' columns for round k, from one keyed uniform block.

    Row i-1 of the block belongs to agent i alone, so the draws stay
    independent across agents even though one generator fills the block.
    """
    m = graph.m
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_WEIGHT_STREAM, trial, k))
    block = np.random.default_rng(ss).random((m, max(m - 1, 1)))
    return {
        i: generate_weight_column(i, graph.out_neighbors(i), k, params, block[i - 1])
        for i in range(1, m + 1)
    }


def uniform_out_columns(graph, k: int) -> dict:
    """Fixed 1/(out-degree+1) columns used by the push-diging baseline."""
    cols = {}
    for i in range(1, graph.m + 1):
        share = 1.0 / (graph.out_degree(i) + 1)
        entries = {l: share for l in graph.out_neighbors(i)}
        entries[i] = share
        cols[i] = WeightColumn(owner=i, k=k, entries=entries)
    return cols


def iterate(states, columns, problem: GlobalProblem, step, k, *, reset_mass=False,
            crypto: CryptoContext | None = None, log=None) -> list:
    """One synchronous round. Returns the states at k+1.

    Deliveries are accumulated per receiver in ascending sender order (the
    diagonal share sits in its own sorted slot), so the floating-point sums
    are reproducible and independent of transport details: the encrypted
    path feeds decoded copies of the exact same 64-bit values into the same
    reduction.
    """
    inbox = {st.agent: [] for st in states}
    for st in sorted(states, key=lambda s: s.agent):
        i = st.agent
        col = columns[i]
        for r in sorted(col.entries):
            a = col.entries[r]
            jy = a * st.y
            js = a * st.s
            jw = a * st.w
            if r == i:
                inbox[i].append((jy, js, jw))
                continue
            if crypto is None:
                if log is not None:
                    for kind, values in ((KIND_Y, tuple(jy)), (KIND_S, tuple(js)), (KIND_W, (jw,))):
                        p = PlainPayload(sender=i, receiver=r, k=k, kind=kind, data=values)
                        log.append(MessageRecord(k, i, r, kind, p.data, encode_payload(p), None))
                inbox[r].append((jy, js, jw))
            else:
                ctr = crypto.counters[i]
                received = {}
                for kind, values in ((KIND_Y, tuple(jy)), (KIND_S, tuple(js)), (KIND_W, (jw,))):
                    p = PlainPayload(sender=i, receiver=r, k=k, kind=kind, data=values)
                    env = encrypt(crypto.key, p, ctr)
                    opened = decrypt(crypto.key, env)
                    received[kind] = opened.data
                    if log is not None:
                        log.append(MessageRecord(k, i, r, kind, p.data,
                                                 encode_payload(p), env.to_bytes()))
                inbox[r].append((
                    np.array(received[KIND_Y]),
                    np.array(received[KIND_S]),
                    received[KIND_W][0],
                ))
    new_states = []
    for st in states:
        j = st.agent
        parts = inbox[j]
        y_new = np.sum(np.stack([jy - step * js for jy, js, _ in parts]), axis=0)
        s_mix = np.sum(np.stack([js for _, js, _ in parts]), axis=0)
        w_new = float(np.sum(np.array([jw for _, _, jw in parts])))
        if reset_mass:
            w_new = 1.0
        if abs(w_new) < W_EPS:
            raise DegenerateStateError(
                f"agent {j} mass {w_new:.3e} at k={k + 1} is inside the division guard"
            )
        x_new = y_new / w_new
        g_new = problem.gradient(j, x_new)
        s_new = s_mix + g_new - st.prev_grad
        new_states.append(AgentState(agent=j, y=y_new, w=w_new, x=x_new, s=s_new, prev_grad=g_new))
    return new_states


def _record(traj: Trajectory, states, config):
    if config.record_states:
        traj.x_series.append(np.stack([st.x for st in states]))
        traj.y_series.append(np.stack([st.y for st in states]))
        traj.w_series.append(np.array([st.w for st in states]))
        traj.s_series.append(np.stack([st.s for st in states]))


def _run_message_loop(problem, schedule, config: RunConfig, column_fn, algorithm) -> Trajectory:
    x_star = optimal_solution(problem)
    states = init_agents(problem, config)
    x_init = np.stack([st.x for st in states])
    crypto = CryptoContext(SharedKey.from_seed(config.seed), problem.m) if config.encryption else None
    log = [] if config.record_messages else None

    traj = Trajectory(
        algorithm=algorithm,
        residuals=np.empty(0),
        iterations=0,
        states=states,
        x_star=x_star,
        config=config,
    )
    residuals = [relative_residual(x_init, x_init, x_star)]
    _record(traj, states, config)
    if config.stop_residual is not None and residuals[0] <= config.stop_residual:
        traj.residuals = np.array(residuals)
        traj.stopped_at = 0
        return traj

    started = time.perf_counter()
    for k in range(config.horizon):
        graph = graph_at(schedule, k)
        columns = column_fn(graph, k)
        if config.record_weights:
            traj.weight_matrices.append(assemble_weight_matrix(columns.values(), problem.m))
        states = iterate(
            states, columns, problem, config.step_size, k,
            reset_mass=(config.mass_reset and k == 0),
            crypto=crypto, log=log,
        )
        _record(traj, states, config)
        res = relative_residual(np.stack([st.x for st in states]), x_init, x_star)
        residuals.append(res)
        if config.stop_residual is not None and res <= config.stop_residual:
            traj.stopped_at = k + 1
            break
    traj.elapsed = time.perf_counter() - started

    traj.states = states
    traj.iterations = len(residuals) - 1
    traj.residuals = np.array(residuals)
    if log is not None:
        traj.messages = log
    return traj


def _check_agent_count(problem, schedule):
    if schedule.m != problem.m:
        raise ValueError(
            f"schedule is over {schedule.m} agents but the problem has {problem.m}"
        )


def run(problem: GlobalProblem, schedule, params: MixingParams, config: RunConfig) -> Trajectory:
    """Run the private optimizer with freshly drawn weights every round."""
    _check_agent_count(problem, schedule)
    params.validate_for(problem.m)

    def column_fn(graph, k):
        return draw_weight_columns(graph, params, config.seed, config.trial, k)

    return _run_message_loop(problem, schedule, config, column_fn, "private-push-sum")


def run_baseline(problem: GlobalProblem, schedule, config: RunConfig, algorithm: str) -> Trajectory:
    """Run one of the reference algorithms under the same instance and schedule.

    `push-diging` goes through the real message loop (and therefore through
    the channel when encryption is on); its mass starts at one everywhere
    and is never reset. The other two are dense references: they model
    algorithms whose traffic we never inspect, so plain matrix products
    are enough.
    """
    _check_agent_count(problem, schedule)
    if algorithm == "push-diging":
        cfg = replace(config, mass_reset=False, w0=np.ones(problem.m))
        return _run_message_loop(problem, schedule, cfg, uniform_out_columns, algorithm)
    if algorithm == "subgradient-push":
        return _run_subgradient_push(problem, schedule, config)
    if algorithm == "ab-push-pull":
        return _run_ab_push_pull(problem, schedule, config)
    raise ValueError(f"unknown baseline {algorithm!r}; expected one of {BASELINES}")


def _uniform_out_matrix(graph) -> np.ndarray:
    a = np.zeros((graph.m, graph.m))
    for i in range(1, graph.m + 1):
        share = 1.0 / (graph.out_degree(i) + 1)
        a[i - 1, i - 1] = share
        for l in graph.out_neighbors(i):
            a[l - 1, i - 1] = share
    return a


def _uniform_in_matrix(graph) -> np.ndarray:
    a = np.zeros((graph.m, graph.m))
    for i in range(1, graph.m + 1):
        ins = graph.in_neighbors(i)
        share = 1.0 / (len(ins) + 1)
        a[i - 1, i - 1] = share
        for j in ins:
            a[i - 1, j - 1] = share
    return a


def _dense_trajectory(problem, config, algorithm, estimate_fn, step_fn):
    """Shared skeleton of the two dense baselines."""
    x_star = optimal_solution(problem)
    x0, _ = _initial_positions(problem, config)
    x_init = x0.copy()

    traj = Trajectory(
        algorithm=algorithm,
        residuals=np.empty(0),
        iterations=0,
        states=[],
        x_star=x_star,
        config=config,
    )
    residuals = [relative_residual(estimate_fn(), x_init, x_star)]
    if config.stop_residual is not None and residuals[0] <= config.stop_residual:
        traj.residuals = np.array(residuals)
        traj.stopped_at = 0
        return traj

    started = time.perf_counter()
    for k in range(config.horizon):
        step_fn(k)
        res = relative_residual(estimate_fn(), x_init, x_star)
        residuals.append(res)
        if config.stop_residual is not None and res <= config.stop_residual:
            traj.stopped_at = k + 1
            break
    traj.elapsed = time.perf_counter() - started
    traj.iterations = len(residuals) - 1
    traj.residuals = np.array(residuals)
    return traj


def _run_subgradient_push(problem, schedule, config):
    """Diminishing-step push-sum consensus plus a local (sub)gradient step."""
    box = {"x": None, "mass": np.ones(problem.m), "z": None}
    x0, _ = _initial_positions(problem, config)
    box["x"] = x0.copy()
    box["z"] = x0.copy()

    def estimate():
        return box["z"]

    def one_step(k):
        graph = graph_at(schedule, k)
        a = _uniform_out_matrix(graph)
        mixed = a @ box["x"]
        box["mass"] = a @ box["mass"]
        z = mixed / box["mass"][:, None]
        eta = 1.0 / (k + 3000)
        grads = np.stack([problem.gradient(i, z[i - 1]) for i in range(1, problem.m + 1)])
        box["x"] = mixed - eta * grads
        box["z"] = z

    return _dense_trajectory(problem, config, "subgradient-push", estimate, one_step)


def _run_ab_push_pull(problem, schedule, config):
    """Row-stochastic pull on the estimates, column-stochastic push on the tracker."""
    x0, _ = _initial_positions(problem, config)
    box = {"x": x0.copy()}
    box["g"] = np.stack([problem.gradient(i, x0[i - 1]) for i in range(1, problem.m + 1)])
    box["y"] = box["g"].copy()

    def estimate():
        return box["x"]

    def one_step(k):
        graph = graph_at(schedule, k)
        r = _uniform_in_matrix(graph)
        c = _uniform_out_matrix(graph)
        x_new = r @ (box["x"] - config.step_size * box["y"])
        g_new = np.stack([problem.gradient(i, x_new[i - 1]) for i in range(1, problem.m + 1)])
        box["y"] = c @ box["y"] + g_new - box["g"]
        box["x"] = x_new
        box["g"] = g_new

    return _dense_trajectory(problem, config, "ab-push-pull", estimate, one_step)
