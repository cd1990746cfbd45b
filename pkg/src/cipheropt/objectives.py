"""Local objective functions and the sensor-fusion problem generator.

The shipped objective is the regularized least-squares form
f_i(x) = ||z_i - M_i x||^2 + omega_i ||x||^2, which is smooth and strongly
convex with constants read off the Gram matrix of M_i. The interface is open
so other smooth strongly convex objectives can be plugged into the engine.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_INSTANCE_STREAM = 21
_NOISE_STREAM = 22


class LocalObjective:
    """Interface: value(x), gradient(x), lipschitz, strong_convexity."""

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    @property
    def lipschitz(self):
        raise NotImplementedError

    @property
    def strong_convexity(self):
        raise NotImplementedError


class QuadraticSensorObjective(LocalObjective):
    """f(x) = ||z - M x||^2 + omega ||x||^2 with analytic gradient and curvature."""

    def __init__(self, measurement, observation, omega):
        self.measurement = np.asarray(measurement, dtype=float)
        self.observation = np.asarray(observation, dtype=float)
        if self.measurement.ndim != 2:
            raise ValueError("measurement matrix must be 2-d")
        if self.observation.shape != (self.measurement.shape[0],):
            raise ValueError("observation length must match measurement rows")
        if not omega > 0:
            raise ValueError("regularization must be positive")
        self.omega = float(omega)
        self.dim = self.measurement.shape[1]
        gram = self.measurement.T @ self.measurement
        eigs = np.linalg.eigvalsh(gram)
        self._lipschitz = 2.0 * (float(eigs[-1]) + self.omega)
        self._strong_convexity = 2.0 * (float(eigs[0]) + self.omega)

    def value(self, x):
        x = self._check(x)
        r = self.observation - self.measurement @ x
        return float(r @ r + self.omega * (x @ x))

    def gradient(self, x):
        x = self._check(x)
        return 2.0 * self.measurement.T @ (self.measurement @ x - self.observation) + 2.0 * self.omega * x

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected point of dimension {self.dim}, got shape {x.shape}")
        return x

    @property
    def lipschitz(self):
        return self._lipschitz

    @property
    def strong_convexity(self):
        return self._strong_convexity


@dataclass(frozen=True)
class SensorFusionInstance:
    """Per-agent measurement data plus the shared ground truth that built it."""

    omega: float
    x_tilde: np.ndarray
    measurements: tuple  # M_i, each s-by-d
    noises: tuple        # xi_i, each length s
    seed: int | None = None

    def __post_init__(self):
        if len(self.measurements) != len(self.noises):
            raise ValueError("need one noise vector per measurement matrix")

    @property
    def m(self):
        return len(self.measurements)

    @property
    def s(self):
        return self.measurements[0].shape[0]

    @property
    def d(self):
        return self.measurements[0].shape[1]

    def observation(self, i):
        """z_i = M_i x_tilde + xi_i for agent i (1-based)."""
        return self.measurements[i - 1] @ self.x_tilde + self.noises[i - 1]

    def objective(self, i) -> QuadraticSensorObjective:
        return QuadraticSensorObjective(self.measurements[i - 1], self.observation(i), self.omega)


@dataclass
class GlobalProblem:
    """A list of local objectives plus the curvature aggregates of their sum."""

    objectives: list
    l_hat: float = field(init=False)
    l_bar: float = field(init=False)
    mu_hat: float = field(init=False)
    mu_bar: float = field(init=False)
    kappa: float = field(init=False)

    def __post_init__(self):
        ls = [obj.lipschitz for obj in self.objectives]
        mus = [obj.strong_convexity for obj in self.objectives]
        self.l_hat = max(ls)
        self.l_bar = sum(ls) / len(ls)
        self.mu_hat = max(mus)
        self.mu_bar = sum(mus) / len(mus)
        if not self.mu_bar > 0:
            raise ValueError("the aggregate problem must be strongly convex")
        self.kappa = self.l_hat / self.mu_bar

    @property
    def m(self):
        return len(self.objectives)

    @property
    def d(self):
        return self.objectives[0].dim

    def gradient(self, i, x):
        return self.objectives[i - 1].gradient(x)


def generate_sensor_fusion(m, s, d, omega, seed) -> SensorFusionInstance:
    """Draw an instance: M_i uniform on [0, 10], x_tilde uniform on [0, 1],
    unit Gaussian noise. Deterministic per seed."""
    if min(m, s, d) < 1:
        raise ValueError("m, s, d must all be >= 1")
    if not omega > 0:
        raise ValueError("omega must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_INSTANCE_STREAM,)))
    x_tilde = rng.uniform(0.0, 1.0, size=d)
    measurements = []
    noises = []
    for _ in range(m):
        measurements.append(rng.uniform(0.0, 10.0, size=(s, d)))
        noises.append(rng.standard_normal(s))
    return SensorFusionInstance(
        omega=float(omega),
        x_tilde=x_tilde,
        measurements=tuple(measurements),
        noises=tuple(noises),
        seed=seed,
    )


def with_noise(instance: SensorFusionInstance, seed) -> SensorFusionInstance:
    """Same measurements and ground truth, freshly drawn noise.

    Used when trials redraw the observation noise while the measurement
    matrices stay pinned to the instance seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_NOISE_STREAM,)))
    noises = tuple(rng.standard_normal(instance.s) for _ in range(instance.m))
    return SensorFusionInstance(
        omega=instance.omega,
        x_tilde=instance.x_tilde,
        measurements=instance.measurements,
        noises=noises,
        seed=instance.seed,
    )


def problem_from_instance(instance: SensorFusionInstance) -> GlobalProblem:
    return GlobalProblem([instance.objective(i) for i in range(1, instance.m + 1)])


def gradient(instance: SensorFusionInstance, i, x):
    """Exact gradient of agent i's local objective at x."""
    return instance.objective(i).gradient(x)


def curvature_constants(instance: SensorFusionInstance, i):
    """(L_i, mu_i) for agent i, from the eigenvalues of M_i' M_i."""
    obj = instance.objective(i)
    return obj.lipschitz, obj.strong_convexity


def optimal_solution(problem: GlobalProblem):
    """Unique minimizer of the summed quadratics via the normal equations."""
    d = problem.d
    lhs = np.zeros((d, d))
    rhs = np.zeros(d)
    for obj in problem.objectives:
        if not isinstance(obj, QuadraticSensorObjective):
            raise TypeError("closed-form optimum needs quadratic objectives")
        lhs += obj.measurement.T @ obj.measurement + obj.omega * np.eye(d)
        rhs += obj.measurement.T @ obj.observation
    x_star = np.linalg.solve(lhs, rhs)
    residual = np.linalg.norm(lhs @ x_star - rhs)
    if residual > 1e-10 * max(1.0, np.linalg.norm(rhs)):
        raise ArithmeticError(f"normal equations solved poorly, residual {residual}")
    return x_star


# ---------------------------------------------------------------------------
# Instance files
# ---------------------------------------------------------------------------

def save_instance(instance: SensorFusionInstance, path):
    """Structured text, matrices row-major, full-precision decimal floats."""
    lines = [
        f"m {instance.m}",
        f"s {instance.s}",
        f"d {instance.d}",
        f"omega {float(instance.omega)!r}",
        "x_tilde " + " ".join(repr(float(v)) for v in instance.x_tilde),
    ]
    for i in range(instance.m):
        flat = instance.measurements[i].ravel()
        lines.append(f"measurement {i + 1} " + " ".join(repr(float(v)) for v in flat))
        lines.append(f"noise {i + 1} " + " ".join(repr(float(v)) for v in instance.noises[i]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path) -> SensorFusionInstance:
    keys = {}
    measurements = {}
    noises = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "measurement":
                measurements[int(parts[1])] = np.array([float(v) for v in parts[2:]])
            elif parts[0] == "noise":
                noises[int(parts[1])] = np.array([float(v) for v in parts[2:]])
            else:
                keys[parts[0]] = parts[1:]
    m, s, d = int(keys["m"][0]), int(keys["s"][0]), int(keys["d"][0])
    return SensorFusionInstance(
        omega=float(keys["omega"][0]),
        x_tilde=np.array([float(v) for v in keys["x_tilde"]]),
        measurements=tuple(measurements[i].reshape(s, d) for i in range(1, m + 1)),
        noises=tuple(noises[i] for i in range(1, m + 1)),
    )
