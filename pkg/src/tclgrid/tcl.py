"""Per-load TCL physics: parameters, closed-form temperature flows, switching
logic, natural periods and duty cycles.

Cooling devices only: the ON target temperature t_amb - cop * d_bar lies below
the lower threshold and the ambient lies above the upper threshold, so the
hysteresis loop has no equilibrium and both strokes complete in finite time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np


class TclError(ValueError):
    pass


# Table-style default sampling ranges (degrees C, 1/s, Hz).
DEFAULT_RANGES: dict[str, tuple[float, float]] = {
    "t_amb": (15.0, 25.0),
    "t_hi": (5.0, 7.0),
    "t_lo": (2.0, 4.0),
    "k": (2e-4, 1e-3),
    "cop_scale": (25.0, 35.0),  # cop = cop_scale / d_bar
    "omega1": (0.01, 0.26),
    "eps": (0.001, 0.01),
}


@dataclass(frozen=True)
class TclParams:
    d_bar: float    # load magnitude, pu
    t_lo: float     # lower temperature threshold, C
    t_hi: float     # upper temperature threshold, C
    k: float        # thermal insulation coefficient, 1/s
    cop: float      # coefficient of performance, C per pu
    t_amb: float    # ambient temperature, C
    omega1: float   # frequency threshold, Hz
    eps: float      # temperature deadband guarding frequency switches, C

    def __post_init__(self):
        if self.d_bar <= 0:
            raise TclError(f"d_bar must be positive, got {self.d_bar}")
        if not (self.t_hi > self.t_lo > 0):
            raise TclError(f"need t_hi > t_lo > 0, got t_hi={self.t_hi}, t_lo={self.t_lo}")
        if self.k <= 0:
            raise TclError(f"k must be positive, got {self.k}")
        if self.cop <= 0:
            raise TclError(f"cop must be positive, got {self.cop}")
        if self.t_amb <= self.t_hi:
            raise TclError(
                f"cooling device needs t_amb > t_hi, got t_amb={self.t_amb}, t_hi={self.t_hi}"
            )
        if self.t_amb - self.cop * self.d_bar >= self.t_lo:
            raise TclError(
                "cooling device needs t_amb - cop*d_bar < t_lo, got "
                f"{self.t_amb - self.cop * self.d_bar} >= {self.t_lo}"
            )
        if self.omega1 <= 0:
            raise TclError(f"omega1 must be positive, got {self.omega1}")
        if not (0 < self.eps < (self.t_hi - self.t_lo) / 2):
            raise TclError(
                f"eps must lie in (0, {(self.t_hi - self.t_lo) / 2}), got {self.eps}"
            )

    @property
    def target_on(self) -> float:
        return self.t_amb - self.cop * self.d_bar

    @property
    def target_off(self) -> float:
        return self.t_amb


@dataclass(frozen=True)
class TclState:
    temperature: float
    sigma: int  # 0 = OFF, 1 = ON

    def __post_init__(self):
        if self.sigma not in (0, 1):
            raise TclError(f"sigma must be 0 or 1, got {self.sigma}")


@dataclass(frozen=True)
class PopulationSpec:
    n_loads: int
    gamma: float  # aggregate magnitude, pu; every d_bar = gamma / n_loads
    seed: int
    param_ranges: dict[str, tuple[float, float]] | None = None

    def ranges(self) -> dict[str, tuple[float, float]]:
        out = dict(DEFAULT_RANGES)
        if self.param_ranges:
            out.update(self.param_ranges)
        return out


@dataclass(frozen=True)
class Scheme:
    """Load-side control variant.

    kind is one of 'conventional', 'deterministic', 'randomized'. The two
    randomized comparison cases differ only in the feedback gain k_pi.
    """

    kind: str
    k_pi: float = 0.0
    v_des: float = 1.0

    def __post_init__(self):
        if self.kind not in ("conventional", "deterministic", "randomized"):
            raise TclError(f"unknown scheme kind {self.kind!r}")
        if self.k_pi < 0:
            raise TclError(f"k_pi must be nonnegative, got {self.k_pi}")
        if self.v_des <= 0:
            raise TclError(f"v_des must be positive, got {self.v_des}")

    @staticmethod
    def conventional() -> "Scheme":
        return Scheme("conventional")

    @staticmethod
    def deterministic() -> "Scheme":
        return Scheme("deterministic")

    @staticmethod
    def randomized(k_pi: float = 5.0, v_des: float = 1.0) -> "Scheme":
        return Scheme("randomized", k_pi=k_pi, v_des=v_des)

    @staticmethod
    def randomized_high_gain(k_pi: float = 50.0, v_des: float = 1.0) -> "Scheme":
        return Scheme("randomized", k_pi=k_pi, v_des=v_des)


def on_off_durations(p: TclParams) -> tuple[float, float]:
    """Closed-form ON and OFF stroke durations of the free-running load."""
    pi_on = math.log((p.t_hi - p.target_on) / (p.t_lo - p.target_on)) / p.k
    pi_off = math.log((p.t_amb - p.t_lo) / (p.t_amb - p.t_hi)) / p.k
    return pi_on, pi_off


def period(p: TclParams) -> float:
    pi_on, pi_off = on_off_durations(p)
    return pi_on + pi_off


def duty_cycle(p: TclParams) -> float:
    pi_on, pi_off = on_off_durations(p)
    return pi_on / (pi_on + pi_off)


def temp_flow(p: TclParams, temperature: float, sigma: int, dt: float) -> float:
    """Exact temperature after flowing dt seconds with the switch held."""
    if dt < 0:
        raise TclError(f"dt must be nonnegative, got {dt}")
    target = p.target_on if sigma else p.target_off
    return target + (temperature - target) * math.exp(-p.k * dt)


def next_thermostat_event(p: TclParams, temperature: float, sigma: int) -> float:
    """Time until the held flow reaches the active thermostat threshold
    (t_lo when ON, t_hi when OFF). Zero when already at or past it."""
    target = p.target_on if sigma else p.target_off
    threshold = p.t_lo if sigma else p.t_hi
    num = temperature - target
    den = threshold - target
    if sigma:
        if temperature <= threshold:
            return 0.0
    else:
        if temperature >= threshold:
            return 0.0
    return math.log(num / den) / p.k


def deterministic_jump_target(
    p: TclParams, temperature: float, sigma: int, omega: float
) -> int:
    """Discrete update of the frequency-responsive scheme.

    Thermostat hard limits dominate; the frequency branches carry an eps
    temperature guard so a frequency-triggered switch never lands at a
    thermostat boundary. Returns the post-jump switch state (possibly equal
    to sigma, meaning no jump is enabled).
    """
    if temperature >= p.t_hi:
        return 1
    if temperature <= p.t_lo:
        return 0
    if omega >= p.omega1 and temperature >= p.t_lo + p.eps:
        return 1
    if omega <= -p.omega1 and temperature <= p.t_hi - p.eps:
        return 0
    return sigma


def conventional_jump_target(p: TclParams, temperature: float, sigma: int) -> int:
    if temperature >= p.t_hi:
        return 1
    if temperature <= p.t_lo:
        return 0
    return sigma


def randomized_rates(
    p: TclParams,
    omega: float,
    k_pi: float,
    v_des: float,
    r_max: float = 1.0,
) -> tuple[float, float]:
    """ON/OFF switching rates of the randomized scheme.

    Baseline rates v_des/pi_off and v_des/pi_on reproduce the natural duty
    cycle in expectation at omega = 0; frequency feedback scales them
    linearly in omega/omega1. Rates are clamped to [0, r_max] to prevent
    chatter at extreme gains.
    """
    if k_pi < 0:
        raise TclError(f"k_pi must be nonnegative, got {k_pi}")
    if v_des <= 0:
        raise TclError(f"v_des must be positive, got {v_des}")
    pi_on, pi_off = on_off_durations(p)
    r_on = (v_des / pi_off) * max(0.0, 1.0 + k_pi * omega / p.omega1)
    r_off = (v_des / pi_on) * max(0.0, 1.0 - k_pi * omega / p.omega1)
    return min(r_on, r_max), min(r_off, r_max)


def switch_decision(
    p: TclParams,
    state: TclState,
    omega: float,
    scheme: Scheme,
    rng: np.random.Generator | None = None,
    dt: float = 0.0,
) -> int:
    """Next switch state under the given scheme.

    Randomized variants keep the thermostat hard limits and toggle inside dt
    with probability 1 - exp(-rate * dt); rng is required for them.
    """
    if scheme.kind == "conventional":
        return conventional_jump_target(p, state.temperature, state.sigma)
    if scheme.kind == "deterministic":
        return deterministic_jump_target(p, state.temperature, state.sigma, omega)
    hard = conventional_jump_target(p, state.temperature, state.sigma)
    if hard != state.sigma:
        return hard
    if rng is None:
        raise TclError("randomized scheme needs an rng stream")
    r_on, r_off = randomized_rates(p, omega, scheme.k_pi, scheme.v_des)
    rate = r_off if state.sigma else r_on
    if rng.random() < -math.expm1(-rate * dt):
        return 1 - state.sigma
    return state.sigma


def sample_population(spec: PopulationSpec) -> list[TclParams]:
    """Draw a population with equal magnitudes gamma/n_loads and the other
    fields i.i.d. uniform over the range box. Deterministic in the seed."""
    if spec.n_loads < 1:
        raise TclError(f"n_loads must be positive, got {spec.n_loads}")
    if spec.gamma <= 0:
        raise TclError(f"gamma must be positive, got {spec.gamma}")
    ranges = spec.ranges()
    _check_range_box(ranges)
    d_bar = spec.gamma / spec.n_loads
    rng = np.random.default_rng(spec.seed)
    n = spec.n_loads

    def draw(name: str) -> np.ndarray:
        lo, hi = ranges[name]
        return rng.uniform(lo, hi, size=n)

    t_amb = draw("t_amb")
    t_hi = draw("t_hi")
    t_lo = draw("t_lo")
    k = draw("k")
    cop_scale = draw("cop_scale")
    omega1 = draw("omega1")
    eps = draw("eps")
    return [
        TclParams(
            d_bar=d_bar,
            t_lo=float(t_lo[i]),
            t_hi=float(t_hi[i]),
            k=float(k[i]),
            cop=float(cop_scale[i]) / d_bar,
            t_amb=float(t_amb[i]),
            omega1=float(omega1[i]),
            eps=float(eps[i]),
        )
        for i in range(n)
    ]


def _check_range_box(ranges: dict[str, tuple[float, float]]) -> None:
    for name, (lo, hi) in ranges.items():
        if not (lo <= hi):
            raise TclError(f"range for {name} is inverted: ({lo}, {hi})")
    if ranges["t_lo"][1] >= ranges["t_hi"][0]:
        raise TclError("t_lo range must lie strictly below t_hi range")
    if ranges["t_lo"][0] <= 0:
        raise TclError("t_lo must be positive")
    if ranges["t_amb"][0] <= ranges["t_hi"][1]:
        raise TclError("t_amb range must lie strictly above t_hi range")
    # cop * d_bar = cop_scale, so feasibility of the ON target is range-wise:
    if ranges["t_amb"][1] - ranges["cop_scale"][0] >= ranges["t_lo"][0]:
        raise TclError("cop_scale range too weak: ON target may not undercut t_lo")
    if ranges["k"][0] <= 0:
        raise TclError("k must be positive")
    if ranges["omega1"][0] <= 0:
        raise TclError("omega1 must be positive")
    eps_hi = ranges["eps"][1]
    half_band = (ranges["t_hi"][0] - ranges["t_lo"][1]) / 2
    if not (0 < ranges["eps"][0] and eps_hi < half_band):
        raise TclError(f"eps range must lie in (0, {half_band})")


def sample_initial_states(
    pop: list[TclParams], seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Temperatures uniform in [t_lo, t_hi], switch states Bernoulli(alpha)."""
    rng = np.random.default_rng(seed)
    t_lo = np.array([p.t_lo for p in pop])
    t_hi = np.array([p.t_hi for p in pop])
    alpha = np.array([duty_cycle(p) for p in pop])
    temps = rng.uniform(t_lo, t_hi)
    sigmas = (rng.random(len(pop)) < alpha).astype(np.int8)
    return temps, sigmas


@dataclass(frozen=True)
class DistinctnessReport:
    flagged: list[tuple[int, int, float, Fraction]]  # (i, j, ratio, nearby p/q)

    @property
    def ok(self) -> bool:
        return not self.flagged


def check_period_distinctness(
    pop: list[TclParams], rel_tol: float = 1e-6, max_den: int = 10
) -> DistinctnessReport:
    """Proxy for the irrational-period-ratio assumption: flag pairs whose
    period ratio sits within rel_tol of a rational p/q with p, q <= max_den."""
    if len(pop) < 2:
        raise TclError("need at least two loads")
    periods = [period(p) for p in pop]
    flagged = []
    for i in range(len(pop)):
        for j in range(i + 1, len(pop)):
            rho = periods[i] / periods[j]
            frac = _nearby_low_rational(rho, rel_tol, max_den)
            if frac is not None:
                flagged.append((i, j, rho, frac))
    return DistinctnessReport(flagged=flagged)


def _nearby_low_rational(rho: float, rel_tol: float, max_den: int) -> Fraction | None:
    best = None
    for q in range(1, max_den + 1):
        p = round(rho * q)
        if p < 1 or p > max_den:
            continue
        approx = p / q
        if abs(rho - approx) <= rel_tol * approx:
            frac = Fraction(p, q)
            if best is None or frac.denominator < best.denominator:
                best = frac
    return best


def write_population_csv(pop: list[TclParams], path: str | Path) -> None:
    """One record per load, all parameters plus derived strokes and duty cycle."""
    fields = [
        "index", "d_bar", "t_lo", "t_hi", "k", "cop", "t_amb", "omega1", "eps",
        "pi_on", "pi_off", "alpha",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for i, p in enumerate(pop):
            pi_on, pi_off = on_off_durations(p)
            writer.writerow(
                [i]
                + [f"{v:.17g}" for v in (
                    p.d_bar, p.t_lo, p.t_hi, p.k, p.cop, p.t_amb, p.omega1, p.eps,
                    pi_on, pi_off, pi_on / (pi_on + pi_off),
                )]
            )


def with_threshold(p: TclParams, omega1: float) -> TclParams:
    return replace(p, omega1=omega1)
