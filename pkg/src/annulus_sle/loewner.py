"""Deterministic Loewner flows in covering coordinates.

Three parametrized flows are integrated:

  radial   dz/dt = (a/2) cot((z - xi_t)/2)        on the half plane cover
  annulus  dz/dt = H_{r-t}(z - U_t)               on the strip cover, with
           top-boundary reals driven by the real restriction H^R
  pair     dz/dt = (a/2)[cot_2(z-U*) + cot_2(z-X*)]

Log-derivatives of the maps are advanced with the analytically
differentiated fields.  This module is the single-flow reference
implementation; estimators use vectorized engines that are cross-checked
against it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import CollisionError, DomainError, ProbeError, StiffnessError
from .kernels import SleParams, wrap_angle

TWO_PI = 2.0 * math.pi


@dataclass
class DrivingPath:
    """A sampled driving function on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    parametrization: str            # "radial" | "annulus" | "pair"
    seed: int | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.size < 1:
            raise DomainError("times must be a nonempty 1-d grid")
        if self.times[0] != 0.0 and self.times.size > 0 and self.times[0] < 0:
            raise DomainError("times must start at a nonnegative instant")
        if np.any(np.diff(self.times) <= 0.0):
            raise DomainError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("driving values must be finite")
        want_two = self.parametrization == "pair"
        got_two = self.values.ndim == 2 and self.values.shape[1] == 2
        if want_two != got_two:
            raise DomainError("channel count does not match parametrization")
        if self.values.shape[0] != self.times.size:
            raise DomainError("times and values length mismatch")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def value_at(self, t):
        """Piecewise-linear interpolation (per channel)."""
        t = np.asarray(t, dtype=float)
        if self.values.ndim == 1:
            return np.interp(t, self.times, self.values)
        return np.stack([np.interp(t, self.times, self.values[:, j])
                         for j in range(self.values.shape[1])], axis=-1)

    def to_csv(self, path):
        cols = self.values if self.values.ndim == 2 else self.values[:, None]
        header = "t," + ",".join(f"value{j}" for j in range(cols.shape[1]))
        data = np.column_stack([self.times, cols])
        np.savetxt(path, data, delimiter=",", header=header, comments="")

    def to_json(self) -> str:
        return json.dumps({
            "parametrization": self.parametrization,
            "seed": self.seed,
            "times": self.times.tolist(),
            "values": self.values.tolist(),
        })

    @staticmethod
    def from_json(s: str) -> "DrivingPath":
        d = json.loads(s)
        return DrivingPath(np.array(d["times"]), np.array(d["values"]),
                           d["parametrization"], d.get("seed"))


def constant_driving(parametrization: str, t_end: float, value=0.0,
                     n: int = 2) -> DrivingPath:
    times = np.linspace(0.0, t_end, max(2, n))
    if parametrization == "pair":
        vals = np.tile(np.asarray(value, dtype=float), (times.size, 1))
    else:
        vals = np.full(times.size, float(value))
    return DrivingPath(times, vals, parametrization)


@dataclass
class TrackedPoint:
    label: str
    z: complex                  # boundary points store a real coordinate here
    logderiv: complex = 0.0
    status: str = "active"      # active | swallowed | boundary-top | boundary-bottom
    swallow_time: float | None = None

    @property
    def is_boundary(self) -> bool:
        return self.status in ("boundary-top", "boundary-bottom")


@dataclass
class StepPolicy:
    dt_max: float = 1e-3
    swallow_radius: float = 1e-5
    scheme: str = "rk4"         # rk4 | euler_heun

    def __post_init__(self):
        if self.dt_max <= 0.0 or self.swallow_radius <= 0.0:
            raise DomainError("dt_max and swallow_radius must be positive")


@dataclass
class FlowState:
    """State of one Loewner evolution: time, modulus, driver, tracked points."""

    t: float
    r0: float
    parametrization: str
    driver: np.ndarray
    tracked: list[TrackedPoint] = field(default_factory=list)

    @property
    def r_t(self) -> float:
        if self.parametrization == "annulus":
            return self.r0 - self.t
        return self.r0

    def point(self, label: str) -> TrackedPoint:
        for p in self.tracked:
            if p.label == label:
                return p
        raise KeyError(label)

    def clone(self) -> "FlowState":
        return FlowState(self.t, self.r0, self.parametrization,
                         np.array(self.driver, dtype=float),
                         [replace(p) for p in self.tracked])

    def to_json(self) -> str:
        return json.dumps({
            "t": self.t,
            "r0": self.r0,
            "parametrization": self.parametrization,
            "driver": np.atleast_1d(self.driver).tolist(),
            "tracked": [
                {"label": p.label,
                 "z": [complex(p.z).real, complex(p.z).imag],
                 "logderiv": [complex(p.logderiv).real, complex(p.logderiv).imag],
                 "status": p.status,
                 "swallow_time": p.swallow_time}
                for p in self.tracked],
        }, sort_keys=True)

    @staticmethod
    def from_json(s: str) -> "FlowState":
        d = json.loads(s)
        pts = [TrackedPoint(q["label"], complex(*q["z"]), complex(*q["logderiv"]),
                            q["status"], q["swallow_time"]) for q in d["tracked"]]
        return FlowState(d["t"], d["r0"], d["parametrization"],
                         np.array(d["driver"], dtype=float), pts)


def new_state(parametrization: str, r0: float, driver0,
              interior: dict | None = None, bottom: dict | None = None,
              top: dict | None = None) -> FlowState:
    """Fresh identity state; labels map to covering coordinates."""
    pts = []
    for label, z in (interior or {}).items():
        pts.append(TrackedPoint(label, complex(z), 0.0, "active"))
    for label, x in (bottom or {}).items():
        pts.append(TrackedPoint(label, complex(float(x), 0.0), 0.0, "boundary-bottom"))
    for label, x in (top or {}).items():
        if parametrization != "annulus":
            raise DomainError("top-boundary points only exist for the annulus flow")
        pts.append(TrackedPoint(label, complex(float(x), 0.0), 0.0, "boundary-top"))
    return FlowState(0.0, r0, parametrization,
                     np.atleast_1d(np.asarray(driver0, dtype=float)), pts)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

def _cot2(z):
    return 1.0 / np.tan(0.5 * np.asarray(z, dtype=complex))


def _csc2_sq(z):
    return 1.0 / np.sin(0.5 * np.asarray(z, dtype=complex)) ** 2


class _System:
    """Right-hand sides for one parametrization, on packed point arrays."""

    def __init__(self, parametrization, params: SleParams | None, r0):
        self.kind = parametrization
        self.a = params.a if params is not None else None
        self.r0 = r0

    def velocity(self, t, z, kinds, u):
        if self.kind == "radial":
            out = 0.5 * self.a * _cot2(z - u[0])
        elif self.kind == "pair":
            out = 0.5 * self.a * (_cot2(z - u[0]) + _cot2(z - u[1]))
        else:
            s = self.r0 - t
            out = np.empty_like(z)
            m = kinds == 2          # top boundary
            if np.any(~m):
                out[~m] = kernels.vector_field(s, z[~m] - u[0], "H")
            if np.any(m):
                out[m] = kernels.vector_field(s, z[m].real - u[0], "H_R") + 0j
        return out

    def dlogderiv(self, t, z, kinds, u):
        if self.kind == "radial":
            return -0.25 * self.a * _csc2_sq(z - u[0])
        if self.kind == "pair":
            return -0.25 * self.a * (_csc2_sq(z - u[0]) + _csc2_sq(z - u[1]))
        s = self.r0 - t
        out = np.empty_like(z)
        m = kinds == 2
        if np.any(~m):
            out[~m] = kernels.vector_field_deriv(s, z[~m] - u[0], "H")
        if np.any(m):
            out[m] = kernels.vector_field_deriv(s, z[m].real - u[0], "H_R") + 0j
        return out

    def driver_distance(self, z, kinds, u):
        d = np.hypot(wrap_angle(z.real - u[0]), z.imag)
        if self.kind == "pair":
            d = np.minimum(d, np.hypot(wrap_angle(z.real - u[1]), z.imag))
        return d


def _evolve(state: FlowState, driving: DrivingPath, t_end: float,
            policy: StepPolicy, params: SleParams | None) -> FlowState:
    if driving.parametrization != state.parametrization:
        raise DomainError("driving and state parametrizations differ")
    if t_end < state.t - 1e-15:
        raise DomainError("t_end before current state time")
    if driving.t_end + 1e-12 < t_end:
        raise DomainError("driving does not cover [t, t_end]")
    if state.parametrization == "annulus" and t_end > state.r0 - 1e-9:
        raise DomainError("annulus flow must stop before the modulus vanishes")

    out = state.clone()
    sys = _System(state.parametrization, params, state.r0)

    idx = [i for i, p in enumerate(out.tracked) if p.status != "swallowed"]
    z = np.array([complex(out.tracked[i].z) for i in idx], dtype=complex)
    ld = np.array([complex(out.tracked[i].logderiv) for i in idx], dtype=complex)
    # kinds: 0 interior, 1 bottom boundary, 2 top boundary
    kindmap = {"active": 0, "boundary-bottom": 1, "boundary-top": 2}
    kinds = np.array([kindmap[out.tracked[i].status] for i in idx], dtype=int)
    alive = np.ones(len(idx), dtype=bool)

    t = out.t
    dt_min = policy.dt_max * 2.0 ** -46
    knots = driving.times

    def u_at(tt):
        return np.atleast_1d(driving.value_at(tt))

    while t < t_end - 1e-14:
        u = u_at(t)
        if sys.kind == "pair":
            gap = abs(wrap_angle(u[0] - u[1]))
            # exactly coincident channels degenerate to a doubled radial flow;
            # only a near-collision of distinct drivers is an error
            if 0.0 < gap < policy.swallow_radius:
                raise CollisionError("pair drivers collided", t=t)
        live = alive.nonzero()[0]
        if live.size == 0:
            t = t_end
            break
        za, lda, ka = z[live], ld[live], kinds[live]
        d = sys.driver_distance(za, ka, u)

        # do not straddle driving knots; keep each point's displacement well
        # below its distance to the driving pole (velocity-aware guard)
        dt = min(policy.dt_max, t_end - t)
        j = np.searchsorted(knots, t + 1e-15, side="right")
        if j < knots.size:
            dt = min(dt, knots[j] - t)
        k1 = sys.velocity(t, za, ka, u)
        l1 = sys.dlogderiv(t, za, ka, u)
        speed = np.abs(k1)
        lim = 0.2 * d / np.maximum(speed, 1e-300)
        dt_lim = float(lim.min()) if lim.size else dt
        if dt_lim < dt:
            dt = dt_lim
            if dt < dt_min:
                raise StiffnessError("step size collapsed near the driver",
                                     t=t, location=complex(za[int(lim.argmin())]))

        if policy.scheme == "rk4":
            um = u_at(t + 0.5 * dt)
            k2 = sys.velocity(t + 0.5 * dt, za + 0.5 * dt * k1, ka, um)
            l2 = sys.dlogderiv(t + 0.5 * dt, za + 0.5 * dt * k1, ka, um)
            k3 = sys.velocity(t + 0.5 * dt, za + 0.5 * dt * k2, ka, um)
            l3 = sys.dlogderiv(t + 0.5 * dt, za + 0.5 * dt * k2, ka, um)
            ue = u_at(t + dt)
            k4 = sys.velocity(t + dt, za + dt * k3, ka, ue)
            l4 = sys.dlogderiv(t + dt, za + dt * k3, ka, ue)
            znew = za + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            ldnew = lda + dt / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4)
        elif policy.scheme == "euler_heun":
            ue = u_at(t + dt)
            k2 = sys.velocity(t + dt, za + dt * k1, ka, ue)
            l2 = sys.dlogderiv(t + dt, za + dt * k1, ka, ue)
            znew = za + 0.5 * dt * (k1 + k2)
            ldnew = lda + 0.5 * dt * (l1 + l2)
        else:
            raise DomainError(f"unknown scheme {policy.scheme!r}")

        if sys.kind == "annulus":
            m = ka == 2
            znew[m] = znew[m].real + 0j     # top points live on a real track
            znew[ka == 1] = znew[ka == 1].real + 0j
        elif sys.kind in ("radial", "pair"):
            m = ka == 1
            znew[m] = znew[m].real + 0j

        t += dt
        z[live], ld[live] = znew, ldnew

        unew = u_at(t)
        dnew = sys.driver_distance(znew, ka, unew)
        hit = dnew < policy.swallow_radius
        if np.any(hit):
            for j in live[hit]:
                p = out.tracked[idx[j]]
                p.status = "swallowed"
                p.swallow_time = t
                p.z = complex(z[j])
                p.logderiv = complex(ld[j])
            alive[live[hit]] = False

    for j, i in enumerate(idx):
        p = out.tracked[i]
        if p.status != "swallowed":
            p.z = complex(z[j])
            p.logderiv = complex(ld[j])
    out.t = t_end
    out.driver = u_at(t_end)
    return out


def evolve_annulus(state: FlowState, driving: DrivingPath, t_end: float,
                   policy: StepPolicy | None = None,
                   params: SleParams | None = None) -> FlowState:
    """Advance an annulus-parametrized flow to t_end (modulus r0 - t_end)."""
    return _evolve(state, driving, t_end, policy or StepPolicy(), params)


def evolve_radial(state: FlowState, driving: DrivingPath, t_end: float,
                  policy: StepPolicy | None = None,
                  params: SleParams | None = None) -> FlowState:
    """Advance a radial flow; conformal radius bookkeeping is log g'(0) = a t / 2."""
    if params is None:
        raise DomainError("radial flow needs SleParams for the rate a")
    return _evolve(state, driving, t_end, policy or StepPolicy(), params)


def evolve_pair(state: FlowState, driving: DrivingPath, t_end: float,
                policy: StepPolicy | None = None,
                params: SleParams | None = None) -> FlowState:
    """Advance the two-driver flow; joint capacity grows as log g'(0) = a t."""
    if params is None:
        raise DomainError("pair flow needs SleParams for the rate a")
    return _evolve(state, driving, t_end, policy or StepPolicy(), params)


# ---------------------------------------------------------------------------
# radial -> annulus time change
# ---------------------------------------------------------------------------

@dataclass
class TimeChange:
    """Monotone map s(t) between the radial and annulus clocks of one curve.

    phi_prime holds the tip derivative of the connecting map recovered from
    the slope of s, via ds/dt = (a/2) phi'(tip)^2.
    """

    t: np.ndarray
    s: np.ndarray
    phi_prime: np.ndarray
    radial_state: FlowState

    def s_of(self, t):
        return np.interp(t, self.t, self.s)


def modulus_of_hole(points) -> float:
    """Modulus of the doubly connected domain between the unit circle and an
    analytic Jordan curve given by sample points inside the disk.

    Solves the harmonic problem (0 on the circle, 1 on the hole) with a
    log + Laurent basis by collocation; the modulus is -1/c0 where c0 is the
    log coefficient.  Spectrally accurate for near-circular analytic holes;
    the hole must surround the origin or the Laurent expansion about 0 is
    collocated outside its annulus of convergence.
    """
    w = np.asarray(points, dtype=complex)
    rho = np.abs(w)
    theta = np.angle(w)
    scale = float(np.exp(np.mean(np.log(rho))))
    n_max = min(16, w.size // 3)
    cols = [np.log(rho)]
    for n in range(1, n_max + 1):
        radial = (rho ** -n - rho ** n) * scale ** n
        cols.append(radial * np.cos(n * theta))
        cols.append(radial * np.sin(n * theta))
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, np.ones(w.size), rcond=None)
    c0 = coef[0]
    if c0 >= 0.0:
        raise ProbeError("hole collocation produced a nonnegative log coefficient")
    return -1.0 / c0


def time_change_radial_to_annulus(params: SleParams, r0: float,
                                  radial_driving: DrivingPath,
                                  t_end: float, u0: float = 0.0,
                                  n_out: int = 64, n_hole: int = 64,
                                  dt: float = 1e-3) -> TimeChange:
    """Reparametrize a radially grown curve by the annulus clock.

    The inner circle C_{r0} is lifted to the covering line Im z = r0 and its
    image tracked under the radial flow; at each output time the modulus
    r(t) of the slit annulus is read from a hole-collocation solve and
    s(t) = r0 - r(t).  The tip factor phi'(xi_t)^2 = (2/a) ds/dt follows by
    differencing the smooth map s.
    """
    if t_end > radial_driving.t_end + 1e-12:
        raise DomainError("driving does not cover [0, t_end]")
    pol = StepPolicy(dt_max=dt)
    thetas = np.linspace(0.0, TWO_PI, n_hole, endpoint=False)
    state = new_state("radial", r0, radial_driving.value_at(0.0),
                      interior={f"c{j}": complex(th, r0) for j, th in enumerate(thetas)})
    ts = np.linspace(0.0, t_end, n_out + 1)
    ss = np.zeros(n_out + 1)
    for i in range(1, n_out + 1):
        state = evolve_radial(state, radial_driving, ts[i], pol, params)
        w = np.array([np.exp(1j * state.point(f"c{j}").z) for j in range(n_hole)])
        ss[i] = r0 - modulus_of_hole(w)
    pp = np.sqrt(np.maximum(np.gradient(ss, ts) * 2.0 / params.a, 0.0))
    return TimeChange(ts, ss, pp, state)
