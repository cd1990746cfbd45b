"""Closed-form constants of the convergence analysis, plus trajectory checks.

The analysis chains four weighted-norm inequalities (gradient increments vs
distance to the optimum, tracker disagreement vs gradient increments, state
disagreement vs tracker disagreement, distance vs state disagreement) and
closes the loop with a small-gain argument. This module evaluates every
constant in that chain exactly as written, certifies the step-size interval
and critical decay rate, and re-checks the inequalities and the B0-step
contraction numerically on recorded trajectories.

Several constants overflow binary64 for realistic parameters (they stack
powers of 1/c0), so everything is computed with mpmath at a working
precision chosen from the problem size. Reported values keep full precision;
callers can cast to float when the magnitude allows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

RANK_SLACK = 1e-12


class ConstantsError(ValueError):
    """Raised when requested parameters cannot produce a valid contraction."""


def working_precision(c0: float, m: int, b: int) -> int:
    """Decimal digits needed so 1 - sigma^(mB) keeps its distance from one."""
    mag = -m * b * (2 + m * b) * math.log10(c0)
    return max(60, int(mag) + 80)


@dataclass
class TheoryConstants:
    c0: mp.mpf
    m: int
    b_tilde: int
    b: int
    b0: int
    sigma: mp.mpf
    epsilon: mp.mpf
    varepsilon: mp.mpf
    l_hat: mp.mpf
    l_bar: mp.mpf
    mu_hat: mp.mpf
    mu_bar: mp.mpf
    kappa: mp.mpf
    alpha: mp.mpf
    beta: mp.mpf
    w_inv_max_bound: mp.mpf
    dps: int


@dataclass
class Gains:
    gamma1: mp.mpf
    gamma2: mp.mpf
    gamma3: mp.mpf
    gamma4: mp.mpf

    @property
    def product(self) -> mp.mpf:
        return self.gamma1 * self.gamma2 * self.gamma3 * self.gamma4


@dataclass
class Certificate:
    consts: TheoryConstants
    c1: mp.mpf
    c2: mp.mpf
    theta0: mp.mpf
    theta_used: mp.mpf
    eta_star: mp.mpf
    eta_upper: mp.mpf
    interval_at_theta0: tuple
    gains: Gains | None
    preconditions: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return all(self.preconditions.values())


def _sigma(c0: mp.mpf, m: int, b: int) -> mp.mpf:
    return c0 ** (2 + m * b)


def _epsilon(sigma: mp.mpf, m: int, b: int) -> mp.mpf:
    smb = sigma ** (m * b)
    return 2 * m * (1 + 1 / smb) / (1 - smb)


def _varepsilon(epsilon: mp.mpf, sigma: mp.mpf, m: int, b: int, b0) -> mp.mpf:
    smb = sigma ** (m * b)
    return epsilon * (1 - smb) ** (mp.mpf(b0 - 1) / (m * b))


def contraction_params(c0, m: int, b: int, b0) -> tuple:
    """The decay ladder (sigma, epsilon, varepsilon) for a window count b0.

    varepsilon is the per-B0-block contraction factor; anything >= 1 means
    b0 windows are not enough and the caller asked for too small a b0.
    """
    if not 0 < c0 < 1.0 / m:
        raise ConstantsError(f"c0={c0} outside (0, 1/m) for m={m}")
    if b < 1 or b0 < b:
        raise ConstantsError(f"need b0 >= b >= 1, got b={b}, b0={b0}")
    with mp.workdps(working_precision(float(c0), m, b)):
        sigma = _sigma(mp.mpf(c0), m, b)
        epsilon = _epsilon(sigma, m, b)
        varepsilon = _varepsilon(epsilon, sigma, m, b, b0)
        if varepsilon >= 1:
            raise ConstantsError(
                f"B0 too small: b0={b0} leaves the contraction factor at "
                f"{mp.nstr(varepsilon, 8)} >= 1"
            )
        return sigma, epsilon, varepsilon


def required_b0(c0, m: int, b: int) -> int:
    """Smallest window count whose contraction factor drops below one."""
    if not 0 < c0 < 1.0 / m:
        raise ConstantsError(f"c0={c0} outside (0, 1/m) for m={m}")
    with mp.workdps(working_precision(float(c0), m, b)):
        sigma = _sigma(mp.mpf(c0), m, b)
        epsilon = _epsilon(sigma, m, b)
        smb = sigma ** (m * b)
        threshold = 1 + m * b * mp.log(epsilon) / (-mp.log(1 - smb))
        b0 = max(b, int(mp.floor(threshold)) + 1)
        # Guard the boundary explicitly in case the closed form landed on an edge.
        while _varepsilon(epsilon, sigma, m, b, b0) >= 1:
            b0 += 1
        while b0 > b and _varepsilon(epsilon, sigma, m, b, b0 - 1) < 1:
            b0 -= 1
        return b0


def smallest_valid_B0(c0, m: int, b: int, cap: int):
    """required_b0 bounded by a budget; None when the budget is too small."""
    if cap < b:
        raise ConstantsError(f"cap={cap} is below b={b}")
    b0 = required_b0(c0, m, b)
    return b0 if b0 <= cap else None


def build_constants(c0, m: int, b_tilde: int, l_hat, l_bar, mu_hat, mu_bar,
                    b0: int | None = None, alpha=1.0, beta=1.0) -> TheoryConstants:
    """Assemble every analysis constant for one problem/graph pairing."""
    if mu_bar <= 0:
        raise ConstantsError("average strong convexity must be positive")
    if alpha <= 0 or beta <= 0:
        raise ConstantsError("alpha and beta must be positive")
    b = 2 * b_tilde - 1
    if b0 is None:
        b0 = required_b0(c0, m, b)
    sigma, epsilon, varepsilon = contraction_params(c0, m, b, b0)
    dps = working_precision(float(c0), m, b)
    with mp.workdps(dps):
        return TheoryConstants(
            c0=mp.mpf(c0), m=m, b_tilde=b_tilde, b=b, b0=b0,
            sigma=sigma, epsilon=epsilon, varepsilon=varepsilon,
            l_hat=mp.mpf(l_hat), l_bar=mp.mpf(l_bar),
            mu_hat=mp.mpf(mu_hat), mu_bar=mp.mpf(mu_bar),
            kappa=mp.mpf(l_hat) / mp.mpf(mu_bar),
            alpha=mp.mpf(alpha), beta=mp.mpf(beta),
            w_inv_max_bound=1 / mp.mpf(c0) ** (m * b),
            dps=dps,
        )


def gain_precondition_failures(consts: TheoryConstants, theta, eta) -> list:
    """Individual violations of the conditions the gain formulas assume."""
    out = []
    with mp.workdps(max(mp.mp.dps, consts.dps)):
        theta = mp.mpf(theta)
        eta = mp.mpf(eta)
        tb0 = theta ** consts.b0
        if not consts.varepsilon < tb0:
            out.append(
                f"theta^B0 = {mp.nstr(tb0, 8)} does not exceed the contraction "
                f"factor {mp.nstr(consts.varepsilon, 8)}"
            )
        if not tb0 < 1:
            out.append("theta must lie strictly below one")
        cap = 1 / ((1 + consts.beta) * consts.l_bar)
        if eta > cap:
            out.append(f"step size {mp.nstr(eta, 8)} exceeds 1/((1+beta)*L) = {mp.nstr(cap, 8)}")
        floor_arg = 1 - consts.alpha * eta * consts.mu_bar / (consts.alpha + 1)
        if floor_arg < 0:
            floor_arg = mp.mpf(0)
        if theta < mp.sqrt(floor_arg):
            out.append(
                f"theta = {mp.nstr(theta, 12)} is below the decay floor "
                f"{mp.nstr(mp.sqrt(floor_arg), 12)} required at this step size"
            )
    return out


def _gains(consts: TheoryConstants, theta, eta) -> Gains:
    theta = mp.mpf(theta)
    eta = mp.mpf(eta)
    tb0 = theta ** consts.b0
    gap = tb0 - consts.varepsilon
    gamma1 = consts.l_hat * (1 + 1 / theta)
    gamma2 = consts.epsilon * consts.w_inv_max_bound * theta * (1 - tb0) / (gap * (1 - theta))
    gamma3 = eta / gap * (consts.varepsilon + consts.epsilon * (1 - theta ** (consts.b0 - 1)) / (1 - theta))
    gamma4 = (1 + mp.sqrt(consts.m)) * (
        1 + mp.sqrt(consts.m) / theta * mp.sqrt(
            (consts.l_hat * (1 + consts.beta) + consts.alpha * consts.beta * consts.mu_hat)
            / (consts.mu_bar * consts.beta)
        )
    )
    return Gains(gamma1, gamma2, gamma3, gamma4)


def gain_constants(consts: TheoryConstants, theta, eta) -> Gains:
    """The four closed-form gains at a given decay rate and step size."""
    failures = gain_precondition_failures(consts, theta, eta)
    if failures:
        raise ConstantsError("gain preconditions violated: " + "; ".join(failures))
    with mp.workdps(max(mp.mp.dps, consts.dps)):
        return _gains(consts, theta, eta)


def eta_interval(consts: TheoryConstants, c2, theta) -> tuple:
    """Both ends of the admissible step-size window at a given decay rate."""
    with mp.workdps(max(mp.mp.dps, consts.dps)):
        theta = mp.mpf(theta)
        scale = (1 + 1 / consts.alpha) / consts.mu_bar
        lower = scale * (1 - theta ** (2 * consts.b0))
        upper = scale * (theta ** consts.b0 - consts.varepsilon) ** 2 / c2
        return lower, upper


def _c1(consts: TheoryConstants) -> mp.mpf:
    return 2 * mp.sqrt(
        (1 + consts.beta) * consts.m * consts.l_hat / (consts.beta * consts.mu_bar)
        + consts.alpha * consts.m * consts.mu_hat / consts.mu_bar
    )


def _c2(consts: TheoryConstants, c1: mp.mpf) -> mp.mpf:
    return (
        2 * consts.b0 * consts.kappa * consts.epsilon * consts.w_inv_max_bound
        * (consts.varepsilon + consts.epsilon * (consts.b0 - 1))
        * (1 + mp.sqrt(consts.m)) * (1 + 1 / consts.alpha) * (1 + c1)
    )


def _certificate_dps(consts: TheoryConstants) -> int:
    """Digits needed so theta0's distance below one survives rounding.

    1 - theta0 shrinks like (1 - varepsilon)^2 / (C2 * B0); a first pass at
    the base precision sizes those magnitudes, the real evaluation then runs
    with sixty guard digits on top.
    """
    with mp.workdps(consts.dps):
        ve = consts.varepsilon
        if ve >= 1:
            return consts.dps
        c2 = _c2(consts, _c1(consts))
        gap = max(mp.mpf(0), -mp.log10(1 - ve))
        size = max(mp.mpf(0), mp.log10(1 + c2))
        b0_digits = mp.log10(mp.mpf(consts.b0)) + 1
        return consts.dps + int(2 * gap + size + b0_digits) + 60


def theorem1_certificate(consts: TheoryConstants) -> Certificate:
    """Evaluate the convergence theorem's constants and self-check them.

    Reports C1, C2, the critical decay rate theta0, the theorem's step-size
    ceiling, and the gains at (theta0, eta_star) where eta_star is the
    single admissible step at the critical rate. The mid-proof restriction
    to theta >= 0.5 is enforced here and recorded as a note whenever it
    actually lifts theta above theta0.
    """
    with mp.workdps(_certificate_dps(consts)):
        ve = consts.varepsilon
        pre = {"varepsilon < 1": bool(ve < 1)}
        notes = []
        c1 = _c1(consts)
        c2 = _c2(consts, c1)
        theta0 = ((ve + mp.sqrt(c2 * (c2 - ve**2 + 1))) / (1 + c2)) ** (mp.mpf(1) / consts.b0)
        pre["theta0 below one"] = bool(theta0 < 1)
        pre["theta0 above varepsilon^(1/B0)"] = bool(theta0 > ve ** (mp.mpf(1) / consts.b0))

        theta_used = theta0
        if theta0 < mp.mpf("0.5"):
            theta_used = mp.mpf("0.5")
            notes.append(
                "theta0 fell below 0.5; the certificate evaluates at 0.5 because "
                "the small-gain argument assumes theta >= 0.5"
            )

        eta_upper = min(
            (1 + 1 / consts.alpha) * (1 - ve) ** 2 / (consts.mu_bar * c2),
            1 / ((1 + consts.beta) * consts.l_bar),
        )
        pre["positive step ceiling"] = bool(eta_upper > 0)

        # At theta0 both interval ends coincide; compare with a relative slack
        # of half the guard digits so the tangent point does not flip on the
        # last rounded digit.
        slack = 1 + mp.mpf(10) ** -(mp.mp.dps // 2)
        lo, hi = eta_interval(consts, c2, theta_used)
        pre["non-empty interval at theta_used"] = bool(lo <= hi * slack)
        eta_star = min(hi, 1 / ((1 + consts.beta) * consts.l_bar))
        if eta_star * slack < lo:
            pre["non-empty interval at theta_used"] = False
            notes.append("smoothness ceiling cuts below the interval; no admissible step")

        gains = None
        failures = gain_precondition_failures(consts, theta_used, eta_star)
        if not failures:
            gains = _gains(consts, theta_used, eta_star)
            pre["gain product below one"] = bool(gains.product < 1)
        else:
            pre["gain product below one"] = False
            notes.extend(failures)

        return Certificate(
            consts=consts, c1=c1, c2=c2, theta0=theta0, theta_used=theta_used,
            eta_star=eta_star, eta_upper=eta_upper,
            interval_at_theta0=(lo, hi), gains=gains,
            preconditions=pre, notes=notes,
        )


def check_theta_b0(theta: float, b0: int) -> bool:
    """Geometric-sum bound: (1 - theta^b0)/(1 - theta) never exceeds b0."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if b0 < 1:
        raise ValueError("b0 must be at least 1")
    lhs = -math.expm1(b0 * math.log(theta)) / -math.expm1(math.log(theta))
    return lhs <= b0 * (1 + RANK_SLACK) + RANK_SLACK


def r_weighted_norm(a) -> float:
    """Frobenius norm of the row-centered matrix (consensus component removed)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return float(np.linalg.norm(a - a.mean(axis=0, keepdims=True)))


@dataclass
class ContractionReport:
    b0: int
    varepsilon: float
    rounds: list
    max_ratio: float
    consensus_residual: float
    trials: int

    @property
    def holds(self) -> bool:
        return self.max_ratio <= self.varepsilon * (1 + RANK_SLACK)


def verify_contraction(trajectory, b0: int, varepsilon, trials: int = 100,
                       rounds=None, columns: int = 3, seed: int = 0) -> ContractionReport:
    """Empirical check that b0 mixing rounds contract disagreement.

    Builds the normalized round maps Phi(k) = W(k+1)^-1 A(k) W(k) from a
    recorded run, multiplies b0 of them ending at each sampled round, and
    measures the centered-norm ratio on random matrices. A consensus matrix
    is pushed through as well; it must stay fixed up to rounding.
    """
    mats = trajectory.weight_matrices
    w = trajectory.w_series
    if not mats or not w:
        raise ValueError("trajectory lacks recorded weight matrices or masses")
    k_max = len(mats) - 1
    if k_max < b0:
        raise ValueError(f"trajectory too short: need at least {b0 + 1} recorded rounds")
    if rounds is None:
        picks = np.linspace(b0, k_max, num=min(5, k_max - b0 + 1), dtype=int)
        rounds = sorted(set(int(v) for v in picks))
    m = mats[0].shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(51,)))
    ve = float(varepsilon)

    max_ratio = 0.0
    consensus_residual = 0.0
    for end in rounds:
        prod = np.eye(m)
        for j in range(end - b0 + 1, end + 1):
            phi = (mats[j] * w[j][None, :]) / w[j + 1][:, None]
            prod = phi @ prod
        for _ in range(trials):
            d = rng.standard_normal((m, columns))
            denom = r_weighted_norm(d)
            ratio = r_weighted_norm(prod @ d) / denom
            max_ratio = max(max_ratio, ratio)
        ones = np.ones((m, 1)) @ rng.standard_normal((1, columns))
        consensus_residual = max(consensus_residual, r_weighted_norm(prod @ ones))
    return ContractionReport(
        b0=b0, varepsilon=ve, rounds=list(rounds),
        max_ratio=float(max_ratio), consensus_residual=float(consensus_residual),
        trials=trials,
    )


@dataclass
class TrajectorySeries:
    """Norm sequences the lemma checks consume, indexed by round."""

    r_norm: np.ndarray
    v_norm: np.ndarray
    u_check_norm: np.ndarray
    x_check_norm: np.ndarray
    y_bar_1: np.ndarray
    x_star: np.ndarray
    rounds: int


def trajectory_series(trajectory, problem) -> TrajectorySeries:
    """Distance, increment, and disagreement norms along a recorded run."""
    xs = trajectory.x_series
    ys = trajectory.y_series
    ws = trajectory.w_series
    ss = trajectory.s_series
    if not xs:
        raise ValueError("trajectory was not recorded with full state")
    x_star = trajectory.x_star
    m = xs[0].shape[0]
    K = len(xs) - 1

    grads = []
    for k in range(K + 1):
        grads.append(np.stack([problem.gradient(i, xs[k][i - 1]) for i in range(1, m + 1)]))

    r_norm = np.zeros(K + 1)
    v_norm = np.zeros(K + 1)
    u_check = np.zeros(K + 1)
    x_check = np.zeros(K + 1)
    for k in range(K + 1):
        r_norm[k] = np.linalg.norm(xs[k] - x_star[None, :])
        if k >= 1:
            v_norm[k] = np.linalg.norm(grads[k] - grads[k - 1])
            u = ss[k] / ws[k][:, None]
            u_check[k] = r_weighted_norm(u)
            x_check[k] = r_weighted_norm(xs[k])
    return TrajectorySeries(
        r_norm=r_norm, v_norm=v_norm, u_check_norm=u_check, x_check_norm=x_check,
        y_bar_1=ys[1].mean(axis=0), x_star=x_star, rounds=K,
    )


@dataclass
class LemmaCheck:
    name: str
    lhs: mp.mpf
    rhs: mp.mpf
    gain: mp.mpf
    offset: mp.mpf
    skipped: bool = False
    reason: str = ""

    @property
    def holds(self) -> bool:
        if self.skipped:
            return True
        return self.lhs <= self.rhs * (1 + mp.mpf(RANK_SLACK))


@dataclass
class LemmaReport:
    theta: mp.mpf
    eta: mp.mpf
    horizon: int
    checks: list
    norms: dict
    w_inv_actual: float
    w_inv_bound: mp.mpf
    gains: Gains
    c3: mp.mpf | None
    r_bounded_by_c3: bool | None

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.checks)


def _theta_max(norms: np.ndarray, theta: mp.mpf, K: int) -> mp.mpf:
    best = mp.mpf(0)
    acc = mp.mpf(1)
    inv = 1 / theta
    for k in range(1, K + 1):
        acc *= inv
        term = acc * mp.mpf(float(norms[k]))
        if term > best:
            best = term
    return best


def _theta_prefix_sum(norms: np.ndarray, theta: mp.mpf, b0: int) -> mp.mpf:
    total = mp.mpf(0)
    acc = mp.mpf(1)
    inv = 1 / theta
    for i in range(1, b0 + 1):
        acc *= inv
        total += acc * mp.mpf(float(norms[i]))
    return total


def verify_lemma_inequalities(trajectory, problem, consts: TheoryConstants,
                              theta, eta=None, K=None) -> LemmaReport:
    """Re-check the four chained inequalities on an actual trajectory.

    The offsets b2 and b3 sum the first B0 disagreement norms, so the run
    must be at least B0 rounds long. Violations are reported per check, not
    raised; a step size too aggressive for the last inequality's floor
    condition marks that check skipped instead.
    """
    series = trajectory_series(trajectory, problem)
    if eta is None:
        eta = trajectory.config.step_size
    if K is None:
        K = series.rounds
    if K > series.rounds:
        raise ValueError(f"trajectory holds {series.rounds} rounds, asked for {K}")
    if K < consts.b0:
        raise ValueError(
            f"need at least B0={consts.b0} recorded rounds for the offset sums, got {K}"
        )

    with mp.workdps(consts.dps):
        theta = mp.mpf(theta)
        eta = mp.mpf(eta)
        tb0 = theta ** consts.b0
        gap = tb0 - consts.varepsilon
        if gap <= 0:
            raise ConstantsError("theta^B0 must exceed the contraction factor")

        r_max = _theta_max(series.r_norm, theta, K)
        v_max = _theta_max(series.v_norm, theta, K)
        u_max = _theta_max(series.u_check_norm, theta, K)
        x_max = _theta_max(series.x_check_norm, theta, K)

        gains = _gains(consts, theta, eta)
        b1 = mp.mpf(float(series.v_norm[1])) / theta
        prefix_scale = tb0 / gap
        b2 = prefix_scale * _theta_prefix_sum(series.u_check_norm, theta, consts.b0)
        b3 = prefix_scale * _theta_prefix_sum(series.x_check_norm, theta, consts.b0)
        b4 = 2 * mp.sqrt(consts.m) * mp.mpf(float(np.linalg.norm(series.y_bar_1 - series.x_star)))

        checks = [
            LemmaCheck("increments vs distance", v_max, gains.gamma1 * r_max + b1,
                       gains.gamma1, b1),
            LemmaCheck("tracker disagreement vs increments", u_max, gains.gamma2 * v_max + b2,
                       gains.gamma2, b2),
            LemmaCheck("state disagreement vs tracker", x_max, gains.gamma3 * u_max + b3,
                       gains.gamma3, b3),
        ]
        floor_arg = 1 - consts.alpha * eta * consts.mu_bar / (consts.alpha + 1)
        floor = mp.sqrt(floor_arg) if floor_arg > 0 else mp.mpf(0)
        eta_cap = 1 / ((1 + consts.beta) * consts.l_bar)
        if theta < floor or eta > eta_cap:
            checks.append(LemmaCheck(
                "distance vs state disagreement", r_max, mp.mpf(0), gains.gamma4, b4,
                skipped=True,
                reason="step size and decay rate violate this inequality's floor condition",
            ))
        else:
            checks.append(LemmaCheck("distance vs state disagreement", r_max,
                                     gains.gamma4 * x_max + b4, gains.gamma4, b4))

        w_floor_actual = min(float(np.min(w)) for w in trajectory.w_series[1 : K + 1])
        w_inv_actual = 1.0 / w_floor_actual

        c3 = None
        bounded = None
        if gains.product < 1 and not checks[3].skipped:
            c3 = (b1 * gains.gamma2 * gains.gamma3 * gains.gamma4
                  + b2 * gains.gamma3 * gains.gamma4
                  + b3 * gains.gamma4 + b4) / (1 - gains.product)
            bounded = bool(r_max <= c3 * (1 + mp.mpf(RANK_SLACK)))

        return LemmaReport(
            theta=theta, eta=eta, horizon=K, checks=checks,
            norms={"r": r_max, "v": v_max, "u_check": u_max, "x_check": x_max},
            w_inv_actual=w_inv_actual, w_inv_bound=consts.w_inv_max_bound,
            gains=gains, c3=c3, r_bounded_by_c3=bounded,
        )


def format_certificate(cert: Certificate) -> str:
    """Structured text export; huge numbers appear as mantissa/exponent."""
    c = cert.consts

    def s(v, digits=12):
        return mp.nstr(v, digits, max_fixed=6, min_fixed=-5)

    lines = [
        f"agents: {c.m}",
        f"window: b_tilde={c.b_tilde} b={c.b} b0={c.b0}",
        f"c0: {s(c.c0)}",
        f"sigma: {s(c.sigma)}",
        f"epsilon: {s(c.epsilon)}",
        f"contraction factor: {s(c.varepsilon, 20)}",
        f"one minus contraction factor: {s(1 - c.varepsilon, 8)}",
        f"curvature: L_hat={s(c.l_hat)} L_bar={s(c.l_bar)} mu_hat={s(c.mu_hat)} mu_bar={s(c.mu_bar)} kappa={s(c.kappa)}",
        f"alpha: {s(c.alpha)}  beta: {s(c.beta)}",
        f"mass inverse bound: {s(c.w_inv_max_bound)}",
        f"C1: {s(cert.c1)}",
        f"C2: {s(cert.c2)}",
        f"theta0: {s(cert.theta0, 30)}",
        f"theta_used: {s(cert.theta_used, 30)}",
        f"one minus theta0: {s(1 - cert.theta0, 8)}",
        f"step ceiling (theorem): {s(cert.eta_upper)}",
        f"step at critical rate: {s(cert.eta_star)}",
        f"interval at theta_used: [{s(cert.interval_at_theta0[0])}, {s(cert.interval_at_theta0[1])}]",
    ]
    if cert.gains is not None:
        g = cert.gains
        lines.append(
            f"gains: {s(g.gamma1)} {s(g.gamma2)} {s(g.gamma3)} {s(g.gamma4)} "
            f"product {s(g.product)}"
        )
    for name, ok in cert.preconditions.items():
        lines.append(f"check [{'pass' if ok else 'FAIL'}] {name}")
    for note in cert.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def format_lemma_report(report: LemmaReport) -> str:
    def s(v, digits=12):
        return mp.nstr(v, digits, max_fixed=6, min_fixed=-5)

    lines = [
        f"theta: {s(report.theta, 30)}",
        f"eta: {s(report.eta)}",
        f"horizon: {report.horizon}",
        f"mass inverse: actual {report.w_inv_actual!r} bound {s(report.w_inv_bound)}",
    ]
    for name, v in report.norms.items():
        lines.append(f"norm {name}: {s(v)}")
    for chk in report.checks:
        if chk.skipped:
            lines.append(f"lemma [skip] {chk.name}: {chk.reason}")
        else:
            verdict = "pass" if chk.holds else "FAIL"
            lines.append(
                f"lemma [{verdict}] {chk.name}: lhs {s(chk.lhs)} <= gain {s(chk.gain)} "
                f"* other + offset {s(chk.offset)} = {s(chk.rhs)}"
            )
    if report.c3 is not None:
        lines.append(f"trajectory bound constant: {s(report.c3)}")
        lines.append(f"distance norm within bound: {report.r_bounded_by_c3}")
    return "\n".join(lines) + "\n"
