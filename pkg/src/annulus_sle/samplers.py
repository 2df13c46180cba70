"""Seeded stochastic generation of driving paths and flows.

Clock conventions (all derived from a = 2/kappa):
  radial    log g'(0) = a t / 2, driver is a standard Brownian motion
  annulus   r(t) = r - t, driver has the table drift and noise sqrt(kappa)
  pair      joint capacity log g'(0) = a t, each channel a unit Brownian
            motion with the cot_2 repulsion drift
  chordal   half-plane capacity 2 t, driver sqrt(kappa) times Brownian

Replica streams: (seed, replica_index) feed a SeedSequence spawn key, so
distinct replicas are independent and any replica is reproducible on its
own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engines, loewner
from .errors import DomainError
from .kernels import SleParams, wrap_angle
from .loewner import DrivingPath, FlowState, StepPolicy

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SamplerConfig:
    params: SleParams
    dt: float = 1e-3
    seed: int = 0
    t_end: float | None = None
    r_stop: float | None = None
    replica_index: int = 0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise DomainError("dt must be positive")
        if self.t_end is None and self.r_stop is None:
            raise DomainError("a stopping rule (t_end or r_stop) is required")
        if self.t_end is not None and self.t_end <= 0.0:
            raise DomainError("t_end must be positive")
        if self.r_stop is not None and self.r_stop <= 0.0:
            raise DomainError("r_stop must be positive")

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(self.seed, spawn_key=(self.replica_index,))))


@dataclass(frozen=True)
class PairTilt:
    """Repulsion multiplier of the two-driver sampler.

    lam=1 is the locally independent pair, lam=2 the pair tilted to meet at
    the origin; the relative angle then satisfies
    d Theta = a * lam * cot_2(Theta) dt + sqrt(2) dB in law.
    """

    lam: int = 1

    def __post_init__(self):
        if self.lam not in (1, 2):
            raise DomainError("tilt must be 1 or 2")


def _clipped_cot2(theta, limit):
    drift = 1.0 / math.tan(0.5 * theta) if np.isscalar(theta) else 1.0 / np.tan(0.5 * theta)
    return float(np.clip(drift, -limit, limit))


def sample_radial(cfg: SamplerConfig, u0: float = 0.0,
                  bottom: dict | None = None, interior: dict | None = None,
                  evolve: bool = True) -> tuple[DrivingPath, FlowState]:
    """Radial SLE driving (standard Brownian motion) plus its flow."""
    rng = cfg.rng()
    t_end = cfg.t_end if cfg.t_end is not None else cfg.r_stop
    n = int(math.ceil(t_end / cfg.dt))
    times = np.linspace(0.0, n * cfg.dt, n + 1)
    xi = u0 + np.concatenate([[0.0], np.cumsum(
        math.sqrt(cfg.dt) * rng.standard_normal(n))])
    driving = DrivingPath(times, xi, "radial", seed=cfg.seed)
    state = loewner.new_state("radial", 0.0, u0,
                              interior=interior, bottom=bottom)
    if evolve and (bottom or interior):
        state = loewner.evolve_radial(state, driving, t_end,
                                      StepPolicy(dt_max=cfg.dt), cfg.params)
    else:
        state.t = t_end
        state.driver = np.atleast_1d(xi[-1])
    return driving, state


def sample_two_sided(cfg: SamplerConfig, u0: float, x0: float,
                     evolve: bool = True):
    """Radial SLE tilted to pass through the origin before reaching x0.

    The relative angle Theta is integrated directly with its repelling
    drift a cot_2(Theta); the marked-point image moves with the flow field
    and the driving is reconstructed as their difference.  Returns
    (driving, flow, theta_path).
    """
    if abs(wrap_angle(u0 - x0)) < 1e-12:
        raise DomainError("u0 and x0 must be distinct mod 2 pi")
    rng = cfg.rng()
    a = cfg.params.a
    t_end = cfg.t_end if cfg.t_end is not None else cfg.r_stop
    n = int(math.ceil(t_end / cfg.dt))
    dt = cfg.dt
    limit = 10.0 / math.sqrt(dt)
    theta = np.empty(n + 1)
    xtil = np.empty(n + 1)
    theta[0] = np.mod(x0 - u0, TWO_PI)
    xtil[0] = x0
    dw = math.sqrt(dt) * rng.standard_normal(n)
    for i in range(n):
        c = _clipped_cot2(theta[i], limit)
        th = theta[i] + a * c * dt + dw[i]
        if not (0.0 < th < TWO_PI):
            raise DomainError(
                "two-sided angle hit the boundary; reduce dt (step-size bug signal)")
        theta[i + 1] = th
        xtil[i + 1] = xtil[i] + 0.5 * a * c * dt
    times = np.linspace(0.0, n * dt, n + 1)
    xi = xtil - theta
    driving = DrivingPath(times, xi, "radial", seed=cfg.seed)
    state = loewner.new_state("radial", 0.0, u0, bottom={"x0": x0})
    if evolve:
        state = loewner.evolve_radial(state, driving, t_end,
                                      StepPolicy(dt_max=dt), cfg.params)
    return driving, state, theta


def two_sided_weight(params: SleParams, theta_path, log_gprime, t) -> float:
    """The tilt martingale sin_2(Theta)^a g'(x0)^b e^{3 a^2 t / 8} at time t,
    normalized by its start value."""
    a, b = params.a, params.b
    s0 = math.sin(0.5 * abs(theta_path[0]))
    st = math.sin(0.5 * abs(theta_path[-1]))
    return (st / s0) ** a * math.exp(b * log_gprime + 3.0 * a * a * t / 8.0)


def sample_pair(cfg: SamplerConfig, u0: float, x0: float,
                tilt: PairTilt = PairTilt(1), evolve: bool = True,
                bottom: dict | None = None):
    """Two repelling drivers with tilt lam and the joint two-pole flow."""
    if abs(wrap_angle(u0 - x0)) < 1e-12:
        raise DomainError("u0 and x0 must be distinct mod 2 pi")
    rng = cfg.rng()
    a = cfg.params.a
    t_end = cfg.t_end if cfg.t_end is not None else cfg.r_stop
    n = int(math.ceil(t_end / cfg.dt))
    dt = cfg.dt
    limit = 10.0 / math.sqrt(dt)
    vals = np.empty((n + 1, 2))
    vals[0] = (u0, x0)
    noise = math.sqrt(dt) * rng.standard_normal((n, 2))
    half = 0.5 * a * tilt.lam
    for i in range(n):
        u, x = vals[i]
        c = _clipped_cot2(wrap_angle(u - x), limit)
        vals[i + 1, 0] = u + half * c * dt + noise[i, 0]
        vals[i + 1, 1] = x - half * c * dt + noise[i, 1]
    times = np.linspace(0.0, n * dt, n + 1)
    driving = DrivingPath(times, vals, "pair", seed=cfg.seed)
    state = loewner.new_state("pair", 0.0, [u0, x0], bottom=bottom)
    if evolve and bottom:
        state = loewner.evolve_pair(state, driving, t_end,
                                    StepPolicy(dt_max=dt), cfg.params)
    else:
        state.t = t_end
        state.driver = vals[-1].copy()
    return driving, state


# ---------------------------------------------------------------------------
# strip chordal
# ---------------------------------------------------------------------------

@dataclass
class StripChordalFlow:
    """A chordal sample crossing the strip S_r, kept in half-plane form.

    The half-plane driver path is stored together with the transport map;
    swallow queries replay the flow on covering-strip points, which is how
    the translate-avoidance indicator and confinement events are read off.
    """

    r: float
    x_end: float
    transport: object
    times: np.ndarray
    xi: np.ndarray

    def swallow_field(self, points_strip, eps_strip: float = 0.15) -> np.ndarray:
        """Boolean tube membership for strip points (capacity-metric tube).

        The tube radius is eps_strip scaled by the local transport
        derivative, so early-time widths are uniform in strip units.
        """
        pts = np.asarray(points_strip, dtype=complex).ravel()
        w = np.array(self.transport.to_half(pts), dtype=complex)
        eps = eps_strip * np.abs(self.transport.deriv_to_half(pts))
        hit = np.zeros(w.size, dtype=bool)
        act = np.ones(w.size, dtype=bool)
        for i in range(len(self.times) - 1):
            dt = self.times[i + 1] - self.times[i]
            ui = self.xi[i]
            d = np.abs(w[act] - ui)
            new_hit = d < eps[act]
            if np.any(new_hit):
                ii = np.where(act)[0][new_hit]
                hit[ii] = True
                act[ii] = False
            w[act] += 2.0 * dt / (w[act] - ui)
        return hit

    def indicator(self, k_range=(1, 2), nx_per_period: int = 16, ny: int = 8,
                  eps_strip: float = 0.15) -> bool:
        """I(eta): no collision between the curve and its 2 pi k translates."""
        kmax = max(k_range)
        span = TWO_PI * (kmax + 1)
        xs = np.arange(-span, span + self.x_end, TWO_PI / nx_per_period)
        ys = self.r * (np.arange(ny) + 0.5) / ny
        grid = xs[None, :] + 1j * ys[:, None]
        hit = self.swallow_field(grid.ravel(), eps_strip).reshape(ny, xs.size)
        for k in range(1, kmax + 1):
            sh = k * nx_per_period
            if np.any(hit[:, sh:] & hit[:, :-sh]):
                return False
        return True


def sample_strip_chordal(cfg: SamplerConfig, r: float, x_end: float,
                         cap_factor: float = 4.0, alpha: float = 4e-3):
    """Chordal SLE across S_r from 0 to x_end + ir.

    Sampled as half-plane chordal SLE (driver sqrt(kappa) B_t, capacity 2t)
    and transported by the fixed map fixing (0, x_end + ir) -> (0, oo).
    The step size grows like alpha * t (self-similar refinement); the
    horizon is cap_factor times the squared image scale at which the
    unexplored remainder of the curve is confined near the target, past
    which translate collisions cannot occur.
    """
    from . import maps
    rng = cfg.rng()
    kappa = cfg.params.kappa
    tr = maps.strip_transport(r, x_end)
    # image scale at which the unexplored remainder sits within strip
    # distance delta_target of the target: |T| ~ r (1+q) / (pi q delta)
    delta_target = 0.15
    r_scale = r * (1.0 + 1.0 / tr.q) / (math.pi * delta_target)
    t_hor = cap_factor * r_scale ** 2
    dts, t = [], 0.0
    while t < t_hor:
        dt = max(cfg.dt, alpha * t)
        dts.append(dt)
        t += dt
    times = np.concatenate([[0.0], np.cumsum(dts)])
    incr = math.sqrt(kappa) * np.sqrt(np.diff(times)) * rng.standard_normal(len(dts))
    xi = np.concatenate([[0.0], np.cumsum(incr)])
    driving = DrivingPath(times, xi, "chordal", seed=cfg.seed)
    return driving, StripChordalFlow(r=r, x_end=x_end, transport=tr,
                                     times=times, xi=xi)


# ---------------------------------------------------------------------------
# annulus
# ---------------------------------------------------------------------------

def sample_annulus(cfg: SamplerConfig, r: float, u0: float, w_end: float,
                   drift, eps_end: float = 0.05,
                   bottom: dict | None = None, top: dict | None = None,
                   evolve: bool = True):
    """Annulus SLE driver: table drift plus sqrt(kappa) noise.

    drift is a DriftTable (or any object with a .drift(s, x) method); the
    marked boundary process W advances with the top field H^R.  Stops at
    modulus eps_end.
    """
    rng = cfg.rng()
    kappa = cfg.params.kappa
    t_end = r - eps_end if cfg.r_stop is None else r - cfg.r_stop
    if t_end <= 0.0 or t_end >= r:
        raise DomainError("stopping modulus outside (0, r)")
    n = int(math.ceil(t_end / cfg.dt))
    dt = t_end / n
    u = np.empty(n + 1)
    wv = np.empty(n + 1)
    u[0], wv[0] = u0, w_end
    noise = math.sqrt(kappa * dt) * rng.standard_normal(n)
    for i in range(n):
        s = r - i * dt
        gap = wrap_angle(wv[i] - u[i])
        u[i + 1] = u[i] + drift.drift(s, gap) * dt + noise[i]
        wv[i + 1] = wv[i] + float(engines.field_hr_real(s, gap)) * dt
    times = np.linspace(0.0, t_end, n + 1)
    driving = DrivingPath(times, u, "annulus", seed=cfg.seed)
    state = loewner.new_state("annulus", r, u0, bottom=bottom,
                              top={**{"w_end": w_end}, **(top or {})})
    if evolve:
        state = loewner.evolve_annulus(state, driving, t_end,
                                       StepPolicy(dt_max=cfg.dt), cfg.params)
    return driving, state
