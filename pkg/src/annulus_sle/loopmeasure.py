"""Brownian loop soups and loop-measure functionals.

The rooted loop measure factors as area times dt/(2 pi t^2) times the
Brownian bridge law; a soup of intensity lam is a Poisson sample of that
product restricted to a root region, a duration window and the loops that
stay inside the domain.  Counting loops that hit two sets and dividing by
lam gives an unbiased estimate of the loop measure of the hit event, and
E[(1 + c/(2 lam))^N] = exp((c/2) m) turns Poisson counts into the
exponential functionals appearing in restriction weights.

Hit decisions are made on bridge polylines refined by dyadic midpoint
insertion until the decision is stable at the sample resolution, so the
downward bias of coarse polylines is bounded by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EstimatorInvalidError

TWO_PI = 2.0 * math.pi


@dataclass
class Loop:
    root: complex
    duration: float
    bridge: np.ndarray                  # closed polyline, bridge[0] == bridge[-1] == root
    refine_seed: int = 0
    level: int = 0
    weight: float = 1.0                 # 1/p_keep when importance-thinned
    winding_cache: dict = field(default_factory=dict)

    @property
    def step_sd(self) -> float:
        return math.sqrt(self.duration / (self.bridge.size - 1))

    def winding(self, center: complex = 0.0) -> int:
        key = complex(center)
        if key not in self.winding_cache:
            dz = self.bridge - key
            ang = float(np.sum(np.angle(dz[1:] / dz[:-1])))
            n = ang / TWO_PI
            if abs(n - round(n)) > 1e-9:
                raise DomainError("winding angle sum not an integer multiple of 2 pi")
            self.winding_cache[key] = int(round(n))
        return self.winding_cache[key]

    def refine(self) -> "Loop":
        """Insert Brownian bridge midpoints (doubles the resolution).

        Midpoint noise comes from a per-loop stream keyed by refinement
        level, so refined loops are reproducible.
        """
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(self.refine_seed, spawn_key=(self.level,))))
        b = self.bridge
        n = b.size - 1
        mid = 0.5 * (b[:-1] + b[1:])
        sd = math.sqrt(self.duration / n / 4.0)
        noise = sd * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        out = np.empty(2 * n + 1, dtype=complex)
        out[0::2] = b
        out[1::2] = mid + noise
        return Loop(self.root, self.duration, out, self.refine_seed,
                    self.level + 1, self.weight, {})


@dataclass(frozen=True)
class SoupSpec:
    """Domain, intensity and sampling window of one soup realization."""

    domain: str                         # disk | annulus | strip
    intensity: float
    t_min: float
    t_max: float
    r: float | None = None              # modulus for annulus/strip
    seed: int = 0
    n_points: int = 256
    refine_levels: int = 4
    root_region: tuple | None = None    # optional (x_lo, x_hi) strip window
    prefilter: str | None = None        # "winding0": keep only candidates that
                                        # could wind about the origin

    def __post_init__(self):
        if self.t_min <= 0.0:
            raise DomainError("t_min must be positive: the loop mass diverges at 0")
        if not (self.t_min < self.t_max):
            raise DomainError("need t_min < t_max")
        if self.intensity <= 0.0:
            raise DomainError("intensity must be positive")
        if self.domain not in ("disk", "annulus", "strip"):
            raise DomainError(f"unknown domain {self.domain!r}")
        if self.domain in ("annulus", "strip") and not (self.r and self.r > 0):
            raise DomainError("annulus/strip soups need a modulus r")


@dataclass
class MeasureEstimate:
    value: float
    stderr: float
    n_loops: int
    truncation_note: str = ""
    seed: int | None = None

    def __post_init__(self):
        if self.stderr < 0.0:
            raise DomainError("stderr must be nonnegative")


@dataclass
class Soup:
    spec: SoupSpec
    loops: list
    area: float


def _root_area_and_sampler(spec: SoupSpec):
    if spec.domain == "disk":
        area = math.pi

        def draw(rng, n):
            return np.sqrt(rng.random(n)) * np.exp(1j * TWO_PI * rng.random(n))
    elif spec.domain == "annulus":
        rin = math.exp(-spec.r)
        area = math.pi * (1.0 - rin ** 2)

        def draw(rng, n):
            rho = np.sqrt(rin ** 2 + (1.0 - rin ** 2) * rng.random(n))
            return rho * np.exp(1j * TWO_PI * rng.random(n))
    else:
        x_lo, x_hi = spec.root_region if spec.root_region else (0.0, TWO_PI)
        area = (x_hi - x_lo) * spec.r

        def draw(rng, n):
            return (x_lo + (x_hi - x_lo) * rng.random(n)
                    + 1j * spec.r * rng.random(n))
    return area, draw


def _containment_margin(spec: SoupSpec, pts: np.ndarray):
    """(inside, margin): strict containment and distance to the boundary."""
    if spec.domain == "disk":
        a = np.abs(pts)
        return bool(np.all(a < 1.0)), float(np.min(1.0 - a))
    if spec.domain == "annulus":
        a = np.abs(pts)
        rin = math.exp(-spec.r)
        inside = bool(np.all((a < 1.0) & (a > rin)))
        return inside, float(min(np.min(1.0 - a), np.min(a - rin)))
    inside = bool(np.all((pts.imag > 0.0) & (pts.imag < spec.r)))
    return inside, float(min(np.min(pts.imag), np.min(spec.r - pts.imag)))


def sample_soup(spec: SoupSpec) -> Soup:
    """One Poisson realization of the restricted rooted loop measure.

    Loops whose containment decision sits within the bridge-resolution
    margin are refined until the decision is stable (or refine_levels is
    exhausted, biasing at most the noted margin).
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))
    area, draw = _root_area_and_sampler(spec)
    mass = spec.intensity * area * (1.0 / spec.t_min - 1.0 / spec.t_max) / TWO_PI
    count = int(rng.poisson(mass))

    n = spec.n_points
    loops = []
    lin = np.linspace(0.0, 1.0, n + 1)
    # winding candidates must span the hole: importance-thin tiny loops with
    # the bridge-range bound P[range >= d] <= 8 exp(-d^2/t) and weight the
    # survivors by 1/p_keep (measure-type functionals only)
    d_wind = 2.0 * math.exp(-spec.r) if (spec.prefilter == "winding0"
                                         and spec.domain == "annulus") else 0.0
    for lo in range(0, count, 4096):
        m = min(4096, count - lo)
        roots = draw(rng, m)
        u = rng.random(m)
        durations = 1.0 / (1.0 / spec.t_min - u * (1.0 / spec.t_min - 1.0 / spec.t_max))
        weights = np.ones(m)
        if d_wind > 0.0:
            p_keep = np.minimum(1.0, 8.0 * np.exp(-d_wind ** 2 / durations))
            sel = rng.random(m) < p_keep
            roots, durations, p_keep = roots[sel], durations[sel], p_keep[sel]
            weights = 1.0 / p_keep
            m = int(sel.sum())
            if m == 0:
                continue
        refine_seeds = rng.integers(0, 2 ** 62, size=m)
        steps = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        w = np.concatenate([np.zeros((m, 1)), np.cumsum(steps, axis=1)], axis=1)
        w -= lin[None, :] * w[:, -1:]
        w *= np.sqrt(durations / n)[:, None]
        pts = roots[:, None] + w
        del steps, w

        # batch containment and boundary margins
        if spec.domain == "disk":
            margins = 1.0 - np.abs(pts).max(axis=1)
            inside = margins > 0.0
        elif spec.domain == "annulus":
            a = np.abs(pts)
            rin = math.exp(-spec.r)
            margins = np.minimum(1.0 - a.max(axis=1), a.min(axis=1) - rin)
            inside = (a.max(axis=1) < 1.0) & (a.min(axis=1) > rin)
            del a
        else:
            y = pts.imag
            margins = np.minimum(y.min(axis=1), spec.r - y.max(axis=1))
            inside = (y.min(axis=1) > 0.0) & (y.max(axis=1) < spec.r)
        step_sd = np.sqrt(durations / n)
        fuzzy = margins < 3.0 * step_sd
        keep_any = inside | fuzzy
        if spec.prefilter == "winding0":
            # winding about 0 requires the bridge's box to surround 0; test
            # the polyline box inflated by the resolution margin
            pad = 3.0 * step_sd
            keep_any &= ((pts.real.min(axis=1) < pad) & (pts.real.max(axis=1) > -pad)
                         & (pts.imag.min(axis=1) < pad) & (pts.imag.max(axis=1) > -pad))

        for j in np.where(keep_any & inside & ~fuzzy)[0]:
            loops.append(Loop(complex(roots[j]), float(durations[j]), pts[j],
                              int(refine_seeds[j])))
        for j in np.where(keep_any & fuzzy)[0]:
            loop = Loop(complex(roots[j]), float(durations[j]), pts[j],
                        int(refine_seeds[j]))
            ok, margin = _containment_margin(spec, loop.bridge)
            while margin < 3.0 * loop.step_sd and loop.level < spec.refine_levels:
                loop = loop.refine()
                ok, margin = _containment_margin(spec, loop.bridge)
            if ok:
                loops.append(loop)
    return Soup(spec=spec, loops=loops, area=area)


# ---------------------------------------------------------------------------
# adaptive hit tests: decide(loop) -> (+1 hit, -1 miss, 0 unresolved at
# current resolution)
# ---------------------------------------------------------------------------

def _decide_shell(loop: Loop, r_inner: float) -> int:
    m = float(np.max(np.abs(loop.bridge)))
    if m >= r_inner:
        return 1
    return -1 if r_inner - m > 3.0 * loop.step_sd else 0


def _decide_circle(loop: Loop, radius: float) -> int:
    a = np.abs(loop.bridge)
    lo, hi = float(a.min()), float(a.max())
    if lo <= radius <= hi:
        return 1
    gap = lo - radius if lo > radius else radius - hi
    return -1 if gap > 3.0 * loop.step_sd else 0


def _decide_segment(loop: Loop, z1: complex, z2: complex) -> int:
    p, q = loop.bridge[:-1], loop.bridge[1:]
    d = q - p
    e = z2 - z1

    def cross(a, b):
        return a.real * b.imag - a.imag * b.real

    c1 = cross(d, z1 - p)
    c2 = cross(d, z2 - p)
    c3 = cross(e, p - z1)
    c4 = cross(e, q - z1)
    if bool(np.any((c1 * c2 <= 0.0) & (c3 * c4 <= 0.0))):
        return 1
    # distance of samples to the segment
    t = np.clip(((loop.bridge - z1) * np.conj(e)).real / abs(e) ** 2, 0.0, 1.0)
    dist = float(np.min(np.abs(loop.bridge - (z1 + t * e))))
    return -1 if dist > 3.0 * loop.step_sd else 0


def make_hit_test(k):
    """Normalize a hit-set description to decide(loop) -> {-1, 0, +1}.

    Accepted forms: ("shell", r_inner), ("circle", radius),
    ("segment", z1, z2), or a callable with that signature.
    """
    if callable(k):
        return k
    tag = k[0]
    if tag == "shell":
        return lambda lp: _decide_shell(lp, k[1])
    if tag == "circle":
        return lambda lp: _decide_circle(lp, k[1])
    if tag == "segment":
        return lambda lp: _decide_segment(lp, k[1], k[2])
    raise DomainError(f"unknown hit set {k!r}")


def _joint_hit(loop: Loop, tests, max_levels: int):
    """Refine until every test is decided; returns (all_hit, unresolved)."""
    while True:
        decisions = [t(loop) for t in tests]
        if any(d == -1 for d in decisions):
            return False, False
        if all(d == 1 for d in decisions):
            return True, False
        if loop.level >= max_levels:
            return all(d == 1 for d in decisions), True
        loop = loop.refine()


def winding_refined(loop: Loop, center=0.0, max_levels: int = 10):
    """Winding number with the polyline refined until it resolves the center.

    A coarse polyline can cut across the winding center and report a bogus
    turn; the decision is trusted once the polyline keeps 3 step
    deviations away from the center.  Returns (winding, resolved, loop).
    """
    while True:
        d = float(np.min(np.abs(loop.bridge - center)))
        if d > 3.0 * loop.step_sd:
            return loop.winding(center), True, loop
        if loop.level >= max_levels:
            return loop.winding(center), False, loop
        loop = loop.refine()


def nonzero_winding_mass(r: float) -> float:
    """Exact loop measure of nonzero-winding loops in A_r.

    Unrolling winding-n loops to cylinder paths displaced by 2 pi n and
    integrating the absorbing heat-kernel trace gives
    sum_{n != 0} (1/|n|) q^{|n|}/(1-q^{|n|}) = -2 sum_m log(1 - q^m) with
    q = exp(-2 pi^2 / r); the value increases to r/6 as r grows.
    """
    q = math.exp(-2.0 * math.pi ** 2 / r)
    total = 0.0
    m = 1
    while True:
        term = -2.0 * math.log1p(-q ** m)
        total += term
        if term < 1e-16 * max(total, 1e-300) or m > 100000:
            return total
        m += 1


def loop_functionals(soups, k1, k2=None, variant: str = "measure",
                     c: float = 0.0, winding_center=None,
                     max_levels: int = 10) -> MeasureEstimate:
    """Loop-measure functionals from one or more soup realizations.

    variant "measure": hat m = N / lam with N the count of loops hitting
    both sets (k2 optional).  variant "exp_functional": unbiased estimate
    of exp((c/2) m) via E[(1 + c/(2 lam))^N].  variant "winding_only":
    restrict to loops of nonzero winding about winding_center (default 0).
    stderr by replication over the soups.
    """
    if isinstance(soups, Soup):
        soups = [soups]
    lam = soups[0].spec.intensity
    tests = [make_hit_test(k1)]
    if k2 is not None:
        tests.append(make_hit_test(k2))
    want_winding = variant == "winding_only" or winding_center is not None
    center = 0.0 if winding_center is None else winding_center

    if variant == "exp_functional":
        base = 1.0 + c / (2.0 * lam)
        if base <= 0.0:
            raise EstimatorInvalidError(
                "1 + c/(2 lam) <= 0; increase the soup intensity")

    per_soup = []
    n_loops = 0
    unresolved = 0
    for soup in soups:
        n = 0
        for lp in soup.loops:
            if want_winding:
                wnum, ok, lp = winding_refined(lp, center, max_levels)
                unresolved += not ok
                if wnum == 0:
                    continue
            hit, unres = _joint_hit(lp, tests, max_levels)
            unresolved += unres
            if hit:
                n += 1
        n_loops += len(soup.loops)
        if variant == "exp_functional":
            per_soup.append(base ** n)
        else:
            per_soup.append(n / lam)
    vals = np.asarray(per_soup, dtype=float)
    mean = float(vals.mean())
    err = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("inf")
    note = (f"domain={soups[0].spec.domain} t_window="
            f"[{soups[0].spec.t_min:.3g},{soups[0].spec.t_max:.3g}] "
            f"lam={lam} replicates={len(soups)} unresolved={unresolved}")
    return MeasureEstimate(mean, err, n_loops, note, seed=soups[0].spec.seed)


def soup_replicates(spec: SoupSpec, n_rep: int) -> list:
    return [sample_soup(SoupSpec(**{**spec.__dict__, "seed": spec.seed + 1000 * k}))
            for k in range(n_rep)]


def default_windows(dist: float, diam_domain: float = 2.0):
    """Principled duration window: t_min from the separation of the hit
    sets, t_max from the domain size (tails analytically negligible)."""
    return dist * dist / 100.0, 100.0 * diam_domain ** 2


# ---------------------------------------------------------------------------
# walk-on-spheres Monte Carlo
# ---------------------------------------------------------------------------

def _wos(dist_fn, z0, rng, n, eps=1e-5, max_steps=20000):
    """Walk on spheres until within eps of the boundary; returns end points."""
    z = np.full(n, complex(z0), dtype=complex)
    active = np.ones(n, dtype=bool)
    for _ in range(max_steps):
        d = dist_fn(z[active])
        done = d < eps
        if np.any(done):
            ii = np.where(active)[0]
            active[ii[done]] = False
        ii = np.where(active)[0]
        if ii.size == 0:
            break
        d = dist_fn(z[ii])
        phi = TWO_PI * rng.random(ii.size)
        z[ii] += d * np.exp(1j * phi)
    return z


def estimate_hcap(kind, size: float, method: str = "mc", n_walkers: int = 10 ** 5,
                  seed: int = 0, y_factor: float = 10.0) -> MeasureEstimate:
    """Half-plane capacity of a hull, normalized so that the half-disk of
    radius d has capacity d^2/2 (half of the 1/z map coefficient).

    kind "slit": vertical segment [0, i*size]; "halfdisk": radius size.
    method "mc" launches walkers from i*y, y = y_factor * diam, and returns
    (y/2) * mean(Im at exit); "oracle" returns the closed form.
    """
    if kind == "slit":
        oracle = 0.25 * size * size
        diam = size

        def dist(z):
            seg = np.minimum(np.maximum(z.imag, 0.0), size)
            return np.minimum(z.imag, np.hypot(z.real, z.imag - seg))
    elif kind == "halfdisk":
        oracle = 0.5 * size * size
        diam = 2.0 * size

        def dist(z):
            return np.minimum(np.abs(z) - size, z.imag)
    else:
        raise DomainError(f"unknown hull kind {kind!r}")
    if method == "oracle":
        return MeasureEstimate(oracle, 0.0, 0, "closed form", seed=seed)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    y = y_factor * diam
    acc = []
    left = n_walkers
    while left > 0:
        m = min(200000, left)
        z = _wos(dist, 1j * y, rng, m)
        acc.append(np.maximum(z.imag, 0.0))
        left -= m
    ims = np.concatenate(acc)
    est = 0.5 * y * ims
    note = f"walkers={n_walkers} launch=i{y:.3g}; far-field bias O(1/y^2) for symmetric hulls"
    return MeasureEstimate(float(est.mean()), float(est.std(ddof=1) / math.sqrt(n_walkers)),
                           n_walkers, note, seed=seed)


def mc_harmonic(domain: str, r: float, start, target: str = "inner",
                n_walkers: int = 10 ** 5, seed: int = 0,
                offset: float | None = None) -> MeasureEstimate:
    """Exit probabilities and excursion measure in the annulus by WoS.

    target "inner"/"outer": exit probability from the start point.
    target "excursion": total excursion measure between the circles,
    2 pi * rho(offset point) / offset, expected 2 pi / r.
    """
    if domain != "annulus":
        raise DomainError("only the annulus is needed here")
    rin = math.exp(-r)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    def dist(z):
        a = np.abs(z)
        return np.minimum(1.0 - a, a - rin)

    if target == "excursion":
        delta = offset if offset is not None else 0.01
        z0 = (1.0 - delta) * np.exp(1j * 0.3)
        z = _wos(dist, z0, rng, n_walkers)
        p = np.abs(z) - rin < 1.0 - np.abs(z)
        phat = float(np.mean(p))
        val = TWO_PI * phat / delta
        err = TWO_PI * math.sqrt(phat * (1 - phat) / n_walkers) / delta
        return MeasureEstimate(val, err, n_walkers,
                               f"offset={delta}; O(offset) bias", seed=seed)

    z = _wos(dist, complex(start), rng, n_walkers)
    inner = np.abs(z) - rin < 1.0 - np.abs(z)
    p = np.mean(inner if target == "inner" else ~inner)
    err = math.sqrt(p * (1 - p) / n_walkers)
    return MeasureEstimate(float(p), float(err), n_walkers, f"target={target}", seed=seed)
