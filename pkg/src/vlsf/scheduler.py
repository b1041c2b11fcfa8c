"""Decoding-time optimization for VLSF codes with m decoding times.

The objective is the expected-blocklength bound

    N(n_1..n_m) = n_1 + sum_i (n_{i+1} - n_i) (1 - F(n_i))
                = n_m - sum_i (n_{i+1} - n_i) F(n_i)

subject to 1 - F(n_m) + (M-1) 2^-gamma <= eps and n_{i+1} - n_i >= 1. The second
form is used throughout: it keeps tiny F(n_i) values from being absorbed into 1.

Solvers
-------
sdo_gap      real-valued KKT recursion with the unit-gap projection
sdo_nogap    the classic recursion without the gap constraint
greedy       integer schedule by successive removal from {1, ..., n*}
exhaustive   brute-force optimum for small instances (test oracle)
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np

from .channel import ChannelModel, build_channel
from .tail import TailModel

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """A schedule solver failed; ``trace`` holds (n_1, n_m) pairs it tried."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


def default_gamma(k: int, epsilon: float) -> float:
    """log2(2 (2^k - 1) / eps); makes the union term (M-1) 2^-gamma equal eps/2."""
    return 1.0 + math.log2(2.0**k - 1.0) - math.log2(epsilon)


@dataclass(frozen=True)
class ProgramSpec:
    """One optimization instance (k, eps, SNR, gamma, m)."""

    k: int
    epsilon: float
    snr_db: float = 0.2
    m: int = 1
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.gamma is None:
            object.__setattr__(self, "gamma", default_gamma(self.k, self.epsilon))
        if self.gamma < self.min_gamma - 1e-12:
            raise ValueError(f"gamma={self.gamma} is below log2((M-1)/eps)={self.min_gamma}")

    @property
    def min_gamma(self) -> float:
        return math.log2(2.0**self.k - 1.0) - math.log2(self.epsilon)

    @property
    def union_term(self) -> float:
        """(M-1) 2^-gamma."""
        return 2.0 ** (math.log2(2.0**self.k - 1.0) - self.gamma)

    @property
    def target(self) -> float:
        """Tail probability F(n_m) needed for feasibility: 1 - eps + (M-1) 2^-gamma."""
        return 1.0 - self.epsilon + self.union_term

    def with_m(self, m: int) -> "ProgramSpec":
        return ProgramSpec(self.k, self.epsilon, self.snr_db, m, self.gamma)


@dataclass
class Schedule:
    """Decoding times with their bound and, for SDO output, multipliers."""

    times: np.ndarray
    objective: float
    k: int
    feasible: bool
    multipliers: Optional[np.ndarray] = None
    nu: Optional[float] = None
    solver: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.times)

    @property
    def rate(self) -> float:
        return self.k / self.objective

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.times)


# -- objective and feasibility --------------------------------------------------


def objective_from_values(times, F_values) -> float:
    """N from the decoding times and the tail values F(n_i)."""
    t = np.asarray(times, dtype=float)
    Fv = np.asarray(F_values, dtype=float)
    return float(t[-1] - np.sum(np.diff(t) * Fv[:-1]))


def objective(times, tail) -> float:
    """Expected-blocklength bound N for strictly increasing ``times``.

    ``tail`` is any callable n -> F(n), e.g. a :class:`TailModel`.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("times must be a non-empty sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if t.size == 1:
        return float(t[0])
    Fv = np.array([tail(n) for n in t[:-1]] + [0.0])
    return objective_from_values(t, Fv)


def feasible(times, spec: ProgramSpec, tail, tol: float = 1e-9) -> bool:
    """True iff 1 - F(n_m) + (M-1) 2^-gamma <= eps (+ tol)."""
    n_m = float(np.asarray(times, dtype=float)[-1])
    return 1.0 - tail(n_m) + spec.union_term <= spec.epsilon + tol


def n_m_star(spec: ProgramSpec, tail: TailModel) -> float:
    """Real-valued last decoding time F^-1(1 - eps + (M-1) 2^-gamma)."""
    return tail.F_inverse(spec.target)


def n_star(spec: ProgramSpec, tail) -> int:
    """Least integer n with F(n) >= 1 - eps + (M-1) 2^-gamma."""
    n = max(1, int(math.ceil(n_m_star(spec, tail))))
    while n > 1 and feasible([n - 1], spec, tail, tol=0.0):
        n -= 1
    while not feasible([n], spec, tail, tol=0.0):
        n += 1
    return n


# -- SDO ------------------------------------------------------------------------


def _sdo_forward(n1: float, m: int, tail: TailModel, stop_at: float, gap: bool):
    """Run the ratio-form recursion from n_1.

    Returns (times, lambda_ratio) where lambda_ratio[k-1] = lambda_k / f(n_k).
    Stops early, returning a partial sequence, once a time exceeds ``stop_at``.
    All ratios F(a)/f(b), f(a)/f(b) are differences of logs, so the common
    vanishing factor of F and f at small n cancels.
    """
    times = [n1]
    lam_r = []
    lF_prev, lf_prev = -math.inf, -math.inf
    prev_lr = 0.0
    cur = n1
    for _ in range(m - 1):
        lF, lf = float(tail.log_F(cur)), float(tail.log_f(cur))
        A = math.exp(lF - lf)
        B = math.exp(lF_prev - lf)
        carry = prev_lr * math.exp(lf_prev - lf) if prev_lr > 0 else 0.0
        step = A - B - carry
        if not math.isfinite(step):
            step = math.inf
        if gap:
            lr = max(carry + 1.0 - A + B, 0.0)
            step = max(1.0, step)
        else:
            lr = 0.0
        lF_prev, lf_prev, prev_lr = lF, lf, lr
        cur = cur + step
        times.append(cur)
        lam_r.append(lr)
        if cur > stop_at:
            break
    return np.array(times), np.array(lam_r)


def _solve_sdo(spec: ProgramSpec, tail: TailModel, gap: bool, max_iter: int = 80) -> Schedule:
    m = spec.m
    target_n = n_m_star(spec, tail)
    name = "sdo-gap" if gap else "sdo-nogap"
    if m > math.ceil(target_n):
        raise SolverError(f"m={m} exceeds ceil(n_m*)={math.ceil(target_n)}")
    if m == 1:
        times, lam_r = np.array([target_n]), np.array([])
        return _finish(spec, tail, times, lam_r, name, {"n_m_star": target_n, "iterations": 0})

    tol = 1e-6 * target_n
    stop_at = target_n + 1.0
    trace = []

    def terminal(n1):
        times, _ = _sdo_forward(n1, m, tail, stop_at, gap)
        # a partial run means the walk already overshot
        end = times[-1] if times.size == m else math.inf
        trace.append((n1, end))
        return end - target_n

    lo = 0.5
    hi = math.ceil(target_n) - m + 0.5
    if gap:
        hi = max(hi, target_n - (m - 1))
    h_lo, h_hi = terminal(lo), terminal(hi)
    if h_lo > 0 and not gap:
        lo = 1e-6
        h_lo = terminal(lo)
    if h_hi < 0 and not gap:
        hi = target_n * (1 - 1e-12)
        h_hi = terminal(hi)
    if not (h_lo <= 0 <= h_hi):
        lo, hi, h_lo, h_hi = _scan_bracket(terminal, lo, hi, trace)

    n1 = lo if abs(h_lo) <= abs(h_hi) else hi
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        h_mid = terminal(mid)
        if h_mid <= 0:
            lo, h_lo = mid, h_mid
        else:
            hi, h_hi = mid, h_mid
        n1 = lo if abs(h_lo) <= abs(h_hi) else hi
        if h_mid == 0.0 or hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    times, lam_r = _sdo_forward(n1, m, tail, math.inf, gap)
    if times.size != m or abs(times[-1] - target_n) > tol:
        raise SolverError(
            f"{name}: bisection ended with n_m={times[-1]:.8g}, target {target_n:.8g}", trace
        )
    return _finish(spec, tail, times, lam_r, name, {"n_m_star": target_n, "iterations": it, "n1_bracket": (lo, hi)})


def _scan_bracket(terminal, lo, hi, trace):
    """Evaluate 64 equispaced n_1 values and return the best straddling pair."""
    grid = np.linspace(lo, hi, 64)
    vals = np.array([terminal(g) for g in grid])
    best = None
    for i in range(63):
        if vals[i] <= 0 <= vals[i + 1]:
            width = min(abs(vals[i]), abs(vals[i + 1]))
            if best is None or width < best[0]:
                best = (width, i)
    if best is None:
        raise SolverError("no n_1 bracket straddles n_m*; terminal time not monotone", trace)
    i = best[1]
    logger.warning("n_1 bracket fallback used: [%g, %g]", grid[i], grid[i + 1])
    return grid[i], grid[i + 1], vals[i], vals[i + 1]


def _finish(spec, tail, times, lam_r, name, diag) -> Schedule:
    times = np.asarray(times, dtype=float)
    f_vals = np.array([tail.f(n) for n in times])
    lam = np.asarray(lam_r) * f_vals[:-1]
    nu = None
    if times.size > 1 and f_vals[-1] > 0:
        nu = (1.0 - tail.F(times[-2])) / f_vals[-1]
    elif f_vals[-1] > 0:
        nu = 1.0 / f_vals[-1]
    F_vals = np.array([tail.F(n) for n in times])
    sched = Schedule(
        times=times,
        objective=objective_from_values(times, F_vals),
        k=spec.k,
        feasible=feasible(times, spec, tail),
        multipliers=lam,
        nu=nu,
        solver=name,
        diagnostics=dict(diag, lambda_ratio=np.asarray(lam_r)),
    )
    return sched


def sdo_gap(spec: ProgramSpec, tail: TailModel) -> Schedule:
    """Gap-constrained SDO: real decoding times with n_{k+1} - n_k >= 1.

    n_1 is found by bisection so that the recursion ends at n_m*.
    """
    return _solve_sdo(spec, tail, gap=True)


def sdo_nogap(spec: ProgramSpec, tail: TailModel) -> Schedule:
    """SDO without the gap constraint (lambda = 0 throughout)."""
    return _solve_sdo(spec, tail, gap=False)


def kkt_residuals(schedule: Schedule, tail: TailModel):
    """Stationarity and complementary-slackness residuals of an SDO schedule.

    Returns ``(stationarity, scaled_stationarity, slackness)`` arrays over
    k = 1..m-1. The scaled residual divides the stationarity expression by
    f(n_k) and is computed from log-domain ratios.
    """
    t = schedule.times
    m = t.size
    lam = schedule.multipliers if schedule.multipliers is not None else np.zeros(m - 1)
    lam_r = schedule.diagnostics.get("lambda_ratio", np.zeros(m - 1))
    stat = np.zeros(m - 1)
    scaled = np.zeros(m - 1)
    slack = np.zeros(m - 1)
    for i in range(m - 1):
        prev = t[i - 1] if i > 0 else None
        F_prev = tail.F(prev) if prev is not None else 0.0
        lam_prev = lam[i - 1] if i > 0 else 0.0
        gap = t[i + 1] - t[i]
        stat[i] = tail.F(t[i]) - F_prev - gap * tail.f(t[i]) + lam[i] - lam_prev
        A = tail.ratio_F_over_f(t[i], t[i])
        B = tail.ratio_F_over_f(prev, t[i]) if prev is not None else 0.0
        carry = lam_r[i - 1] * tail.ratio_f_over_f(prev, t[i]) if i > 0 and lam_r[i - 1] > 0 else 0.0
        scaled[i] = A - B - gap + lam_r[i] - carry
        slack[i] = lam[i] * (t[i] - t[i + 1] + 1.0)
    return stat, scaled, slack


# -- integer schedules ------------------------------------------------------------


def _integer_F(tail, upto: int) -> np.ndarray:
    """F(0..upto) with F(0) = 0."""
    Fv = np.zeros(upto + 1)
    Fv[1:] = np.asarray(tail(np.arange(1, upto + 1, dtype=float)), dtype=float)
    return Fv


def greedy_path(spec: ProgramSpec, tail) -> List[Schedule]:
    """All greedy schedules from m = n* down to m = 1, longest first.

    Starting from {1, ..., n*}, each step removes the time among n_1..n_{m-1}
    whose removal increases N the least (earliest on ties). n_m stays at n*.
    ``diagnostics["increment"]`` records the exact objective increase of the
    step that produced the schedule.
    """
    ns = n_star(spec, tail)
    Fv = _integer_F(tail, ns)
    times = list(range(1, ns + 1))
    ok = feasible([ns], spec, tail)
    out = [Schedule(np.array(times, float), objective_from_values(times, Fv[times]), spec.k, ok, solver="greedy",
                    diagnostics={"n_star": ns, "increment": 0.0})]
    while len(times) > 1:
        t = np.array([0] + times)
        # removing t[i] (1 <= i <= m-1) raises N by (t[i+1]-t[i]) (F(t[i]) - F(t[i-1]))
        inc = (t[2:] - t[1:-1]) * (Fv[t[1:-1]] - Fv[t[:-2]])
        i = int(np.argmin(inc))
        del times[i]
        out.append(Schedule(np.array(times, float), objective_from_values(times, Fv[times]), spec.k, ok,
                            solver="greedy", diagnostics={"n_star": ns, "increment": float(inc[i]),
                                                          "removed": int(t[i + 1])}))
    return out


def greedy(spec: ProgramSpec, tail, target_m: Optional[int] = None) -> Schedule:
    """Greedy integer schedule with ``target_m`` (default ``spec.m``) times."""
    target_m = spec.m if target_m is None else target_m
    ns = n_star(spec, tail)
    if not 1 <= target_m <= ns:
        raise ValueError(f"target_m must lie in [1, n*={ns}], got {target_m}")
    return greedy_path(spec, tail)[ns - target_m]


def exhaustive(spec: ProgramSpec, tail, m: Optional[int] = None, max_schedules: int = 2_000_000) -> Schedule:
    """Exact minimizer of N over integer schedules, for small instances.

    n_m ranges over [n*, 2 n*]; earlier times over all strictly increasing
    positive integers below n_m. Requires n* <= 16 and m <= 5.
    """
    m = spec.m if m is None else m
    ns = n_star(spec, tail)
    hi = 2 * ns
    size = sum(math.comb(last - 1, m - 1) for last in range(ns, hi + 1))
    if ns > 16 or m > 5 or size > max_schedules:
        raise ValueError(f"exhaustive search refused: n*={ns}, m={m}, {size} schedules")
    if m > ns:
        raise ValueError(f"m={m} exceeds n*={ns}")
    Fv = _integer_F(tail, hi)
    best_val, best = math.inf, None
    for last in range(ns, hi + 1):
        combos = list(itertools.combinations(range(1, last), m - 1))
        combos = np.array(combos, dtype=int).reshape(len(combos), m - 1)
        full = np.hstack([combos, np.full((combos.shape[0], 1), last)])
        vals = last - np.sum(np.diff(full, axis=1) * Fv[full[:, :-1]], axis=1)
        j = int(np.argmin(vals))
        if vals[j] < best_val - 1e-15:
            best_val, best = float(vals[j]), full[j]
    return Schedule(best.astype(float), best_val, spec.k, feasible(best, spec, tail), solver="exhaustive",
                    diagnostics={"n_star": ns, "searched": size})


# -- VLF bound and rate curves -----------------------------------------------------


def vlf_bound(spec: ProgramSpec, channel: ChannelModel, a0: float = 1.0):
    """Polyanskiy's VLF bound (gamma + a0)/C and the matching rate k C/(gamma + a0)."""
    e_tau = (spec.gamma + a0) / channel.capacity
    return e_tau, spec.k / e_tau


@dataclass
class RateCell:
    k: int
    m: int
    gamma: float
    n_m_star: float
    N: float
    rate: float
    vlf_rate: float
    solver: str
    error: Optional[str] = None

    @property
    def ratio(self) -> float:
        return self.rate / self.vlf_rate


def _rate_cell(args) -> RateCell:
    k, m, epsilon, snr_db, solver, mode, order, channel = args
    spec = ProgramSpec(k, epsilon, snr_db, m)
    _, vlf_rate = vlf_bound(spec, channel)
    nan = float("nan")
    try:
        tail = TailModel(channel, spec.gamma, mode=mode, order=order)
        nms = n_m_star(spec, tail)
        if solver == "greedy":
            sched = greedy(spec, tail)
        elif solver == "sdo-nogap":
            sched = sdo_nogap(spec, tail)
        else:
            sched = sdo_gap(spec, tail)
    except (SolverError, ValueError, ArithmeticError) as exc:
        logger.error("cell k=%d m=%d failed: %s", k, m, exc)
        return RateCell(k, m, spec.gamma, nan, nan, nan, vlf_rate, solver, error=str(exc))
    return RateCell(k, m, spec.gamma, nms, sched.objective, sched.rate, vlf_rate, solver)


def rate_curve(
    ks: Iterable[int],
    m_list: Iterable[int],
    epsilon: float = 1e-2,
    snr_db: float = 0.2,
    solver: str = "sdo-gap",
    mode: str = "hybrid",
    order: int = 5,
    channel: Optional[ChannelModel] = None,
    jobs: int = 1,
) -> List[RateCell]:
    """Sweep (k, m) cells; failed cells carry ``error`` and NaN rates.

    Output is sorted by k, then m, whatever ``jobs`` is.
    """
    channel = channel or build_channel(snr_db)
    cells = [(k, m, epsilon, snr_db, solver, mode, order, channel) for k in sorted(set(ks)) for m in sorted(set(m_list))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_rate_cell, cells))
    return [_rate_cell(c) for c in cells]
