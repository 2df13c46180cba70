"""Special functions on the annulus A_r = {e^{-r} < |z| < 1} and its covering strip.

The covering map psi(z) = e^{iz} sends the strip S_r = {0 < Im z < r} onto A_r,
the real axis onto the outer circle C_0 and R + ir onto the inner circle C_r.
All Poisson kernels are normalized so that H_disk(0, 1) = 1/2, i.e. the kernel
is pi times the harmonic-measure density per unit boundary length.
Boundary-boundary kernels are inward normal derivatives of the interior ones,
which makes H_halfplane(0, 1) = 1 in the same convention.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, PoleError

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SleParams:
    """kappa together with the exponents it determines.

    a = 2/kappa, b = (6-kappa)/(2 kappa), b_tilde = b (kappa-2)/4 and the
    central charge c = (6-kappa)(3 kappa-8)/(2 kappa).
    """

    kappa: float
    a: float
    b: float
    b_tilde: float
    c_central: float


def sle_constants(kappa: float, extended_range: bool = False) -> SleParams:
    """Derived constants for a given kappa.

    kappa must lie in (0, 4]; with extended_range=True the interval (0, 8) is
    accepted (the two-sided decay observable makes sense for kappa < 8, the
    multi-path constructions do not).
    """
    hi = 8.0 if extended_range else 4.0
    if not (0.0 < kappa <= hi) or (extended_range and kappa >= 8.0):
        raise DomainError(f"kappa={kappa} outside (0, {'8' if extended_range else '4]'}")
    a = 2.0 / kappa
    b = (6.0 - kappa) / (2.0 * kappa)
    b_tilde = b * (kappa - 2.0) / 4.0
    c_central = (6.0 - kappa) * (3.0 * kappa - 8.0) / (2.0 * kappa)
    return SleParams(kappa=kappa, a=a, b=b, b_tilde=b_tilde, c_central=c_central)


@dataclass(frozen=True)
class SeriesPolicy:
    """Truncation policy for the lattice-translate sums.

    Symmetric +-k pairs are added until a pair's magnitude drops below
    abs_tol and at least min_terms pairs were summed; max_terms caps the sum.
    Terms decay like exp(-2 pi^2 k / r), so max_terms ~ 8 r is generous.
    """

    abs_tol: float = 1e-13
    min_terms: int = 8
    max_terms: int = 64

    @staticmethod
    def for_modulus(r: float) -> "SeriesPolicy":
        return SeriesPolicy(max_terms=max(64, math.ceil(8.0 * r)))


DEFAULT_POLICY = SeriesPolicy()

POLE_GUARD = 1e-8


@dataclass(frozen=True)
class CoveringPoint:
    """A point z of the closed strip 0 <= Im z <= r covering A_r."""

    z: complex
    r: float

    def __post_init__(self):
        if not (self.r > 0.0):
            raise DomainError("modulus r must be positive")
        y = self.z.imag
        if y < -1e-12 or y > self.r + 1e-12:
            raise DomainError(f"point {self.z} outside strip of height {self.r}")

    def to_annulus(self) -> complex:
        return np.exp(1j * self.z)


# ---------------------------------------------------------------------------
# Stable elementary pieces.  All take w = pi (z - 2 k pi) / (2 r).
# ---------------------------------------------------------------------------

def _coth(w):
    """coth(w), stable for large |Re w|; caller keeps w off i*pi*Z."""
    w = np.asarray(w, dtype=complex)
    s = np.where(w.real >= 0.0, 1.0, -1.0)
    e = np.exp(-2.0 * s * w)
    return s * (1.0 + e) / (1.0 - e)


def _csch2(w):
    """1/sinh^2(w) via exponentials; decays like 4 e^{-2|Re w|}."""
    w = np.asarray(w, dtype=complex)
    e = np.exp(-2.0 * np.abs(w.real) - 2.0j * np.sign(w.real + (w.real == 0.0)) * w.imag)
    return 4.0 * e / (1.0 - e) ** 2


def _sech2(w):
    w = np.asarray(w, dtype=complex)
    e = np.exp(-2.0 * np.abs(w.real) - 2.0j * np.sign(w.real + (w.real == 0.0)) * w.imag)
    return 4.0 * e / (1.0 + e) ** 2


def wrap_angle(x):
    """Reduce to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x), TWO_PI)


def _check_pole_lattice(z, r, horizontal_only: bool = False):
    """Raise PoleError if z is within POLE_GUARD of the lattice 2k pi + 2imr."""
    z = np.asarray(z, dtype=complex)
    dx = wrap_angle(z.real)
    if horizontal_only:
        dist = np.hypot(dx, z.imag)
        near = dist < POLE_GUARD
        if np.any(near):
            zz = np.atleast_1d(z)[np.atleast_1d(near)].flat[0]
            pole = TWO_PI * round(zz.real / TWO_PI)
            raise PoleError(f"evaluation at {zz} within {POLE_GUARD} of pole {pole}", pole)
        return
    m = np.round(z.imag / (2.0 * r))
    dy = z.imag - 2.0 * r * m
    dist = np.hypot(dx, dy)
    near = dist < POLE_GUARD
    if np.any(near):
        zz = np.atleast_1d(z)[np.atleast_1d(near)].flat[0]
        pole = TWO_PI * round(zz.real / TWO_PI) + 2j * r * round(zz.imag / (2.0 * r))
        raise PoleError(f"evaluation at {zz} within {POLE_GUARD} of pole {pole}", pole)


def _pair_sum(term, policy: SeriesPolicy):
    """Sum term(0) + sum_{k>=1} [term(k) + term(-k)] under the policy.

    term(k) returns an ndarray; convergence is judged on the max pair
    magnitude.  Returns (value, achieved_bound).
    """
    total = np.array(term(0), dtype=complex)
    bound = np.inf
    for k in range(1, policy.max_terms + 1):
        pair = np.asarray(term(k)) + np.asarray(term(-k))
        total = total + pair
        bound = float(np.max(np.abs(pair)))
        if k >= policy.min_terms and bound < policy.abs_tol:
            return total, bound
    if bound > policy.abs_tol * 10.0:
        raise NumericError(
            f"translate series not converged after {policy.max_terms} pairs",
            achieved_tol=bound,
        )
    return total, bound


# ---------------------------------------------------------------------------
# Strip kernels
# ---------------------------------------------------------------------------

def strip_kernel(r: float, z, x0: float = 0.0, variant: str = "plain",
                 policy: SeriesPolicy | None = None):
    """Poisson-kernel family of the strip S_r with boundary point x0 on R.

    variant:
      "plain"       H(z)   = -(pi/2r) Im coth(pi (z-x0) / 2r)
      "summed"      sum of "plain" over the translates x0 + 2 k pi; equals
                    the annulus kernel H_{A_r}(e^{iz}, e^{i x0})
      "scriptH"     analytic completion -(pi/2r) coth(pi (z-x0)/2r)
      "scriptH_bar" principal-part translate sum of "scriptH"; quasi-periodic
                    with increment -pi/r per period 2 pi (the sign is forced
                    by 2 pi-periodicity of the flow field below)
    """
    if r <= 0.0:
        raise DomainError("r must be positive")
    if policy is None:
        policy = SeriesPolicy.for_modulus(r)
    z = np.asarray(z, dtype=complex) - x0
    scalar = z.ndim == 0
    _check_pole_lattice(z, r, horizontal_only=True)
    alpha = np.pi / (2.0 * r)

    if variant == "plain":
        out = -alpha * np.imag(_coth(alpha * z))
    elif variant == "scriptH":
        out = -alpha * _coth(alpha * z)
    elif variant == "summed":
        out, _ = _pair_sum(lambda k: -alpha * np.imag(_coth(alpha * (z - TWO_PI * k))), policy)
        out = out.real
    elif variant == "scriptH_bar":
        out, _ = _pair_sum(lambda k: -alpha * _coth(alpha * (z - TWO_PI * k)), policy)
    else:
        raise DomainError(f"unknown variant {variant!r}")
    out = np.asarray(out)
    return out.item() if scalar else out


def strip_bb_same(r: float, x, policy: SeriesPolicy | None = None, summed: bool = True):
    """Boundary-boundary kernel of S_r, both points on R, at separation x.

    Single term: (pi/2r)^2 csch^2(pi x / 2r).  With summed=True the translate
    sum, i.e. the annulus kernel between two outer-circle points.
    """
    if policy is None:
        policy = SeriesPolicy.for_modulus(r)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    _check_pole_lattice(x.astype(complex) if summed else np.asarray(x, complex), r,
                        horizontal_only=True)
    alpha = np.pi / (2.0 * r)
    if not summed:
        out = (alpha ** 2) * np.real(_csch2(alpha * x.astype(complex)))
    else:
        out, _ = _pair_sum(
            lambda k: (alpha ** 2) * np.real(_csch2(alpha * (x - TWO_PI * k).astype(complex))),
            policy)
        out = out.real
    out = np.asarray(out)
    return out.item() if scalar else out


def strip_bb_cross(r: float, x, policy: SeriesPolicy | None = None, summed: bool = True):
    """Boundary-boundary kernel of S_r between 0 on R and x + ir on the top.

    Single term: (pi/2r)^2 sech^2(pi x / 2r); no real poles.
    """
    if policy is None:
        policy = SeriesPolicy.for_modulus(r)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    alpha = np.pi / (2.0 * r)
    if not summed:
        out = (alpha ** 2) * np.real(_sech2(alpha * x.astype(complex)))
    else:
        out, _ = _pair_sum(
            lambda k: (alpha ** 2) * np.real(_sech2(alpha * (x - TWO_PI * k).astype(complex))),
            policy)
        out = out.real
    out = np.asarray(out)
    return out.item() if scalar else out


# ---------------------------------------------------------------------------
# Annulus kernels
# ---------------------------------------------------------------------------

def disk_kernel(z, w) -> float:
    """Poisson kernel of the unit disk, H(z, w) = (1-|z|^2) / (2 |z-w|^2)."""
    z = complex(z)
    w = complex(w)
    if abs(abs(w) - 1.0) > 1e-9:
        raise DomainError("w must lie on the unit circle")
    if abs(z - w) < POLE_GUARD:
        raise DomainError("coincident points")
    return (1.0 - abs(z) ** 2) / (2.0 * abs(z - w) ** 2)


def _split_boundary(r: float, p) -> tuple[str, float]:
    """Classify p as on C_0 or C_r and return its angle."""
    p = complex(p)
    ap = abs(p)
    if abs(ap - 1.0) < 1e-9:
        return "outer", math.atan2(p.imag, p.real)
    if abs(ap - math.exp(-r)) < 1e-9 * math.exp(-r):
        return "inner", math.atan2(p.imag, p.real)
    raise DomainError(f"point {p} not on a boundary circle of A_{r}")


def annulus_kernel(r: float, p, q, mode: str = "interior_boundary",
                   policy: SeriesPolicy | None = None) -> float:
    """Poisson kernel of A_r = {e^{-r} < |z| < 1}.

    mode "interior_boundary": p inside A_r, q on C_0 or C_r.
    mode "boundary_boundary": both points on boundary circles; the value is
    the inward normal derivative in p of the interior kernel.

    Computed by pulling back to the covering strip; a boundary point on C_r
    carries a factor e^r per normal derivative / density taken there.
    """
    if r <= 0.0:
        raise DomainError("r must be positive")
    if policy is None:
        policy = SeriesPolicy.for_modulus(r)
    p = complex(p)
    q = complex(q)
    if abs(p - q) < POLE_GUARD:
        raise DomainError("coincident points")
    side_q, theta_q = _split_boundary(r, q)

    if mode == "interior_boundary":
        ap = abs(p)
        if not (math.exp(-r) - 1e-12 < ap < 1.0 + 1e-12):
            raise DomainError(f"p={p} not in closure of A_{r}")
        x = math.atan2(p.imag, p.real)
        y = -math.log(max(ap, 1e-300))
        if side_q == "outer":
            # point may itself sit on a circle; the kernel extends continuously
            val = strip_kernel(r, complex(x - theta_q, y), 0.0, "summed", policy)
        else:
            val = math.exp(r) * strip_kernel(
                r, complex(x - theta_q, r - y), 0.0, "summed", policy)
        return float(val)

    if mode == "boundary_boundary":
        side_p, theta_p = _split_boundary(r, p)
        dx = theta_p - theta_q
        if side_p == "outer" and side_q == "outer":
            return float(strip_bb_same(r, dx, policy))
        if side_p == "inner" and side_q == "inner":
            return float(math.exp(2.0 * r) * strip_bb_same(r, dx, policy))
        return float(math.exp(r) * strip_bb_cross(r, dx, policy))

    raise DomainError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# The elliptic vector field and friends
# ---------------------------------------------------------------------------

def vector_field(r: float, z, variant: str = "H",
                 policy: SeriesPolicy | None = None):
    """Loewner vector field of the annulus flow.

    "H"      H_r(z) = -z/r - 2 * scriptH_bar(z); odd, elliptic with periods
             2 pi and 2ir, simple poles on 2 pi Z + 2 i r Z, and
             H_r(z) = 2/z + z (2 Gamma(r) - 1/r - 1/6) + O(z^3) near 0.
    "H_R"    real top-boundary restriction Re H_r(x + ir) for real x.
    "H_bar"  disk-coordinate field i * H_r(z) used by the annulus flow
             written for h_bar directly.
    """
    if r <= 0.0:
        raise DomainError("r must be positive")
    if policy is None:
        policy = SeriesPolicy.for_modulus(r)

    if variant in ("H", "H_bar"):
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        _check_pole_lattice(z, r)
        hbar = strip_kernel(r, z, 0.0, "scriptH_bar", policy)
        out = -z / r - 2.0 * np.asarray(hbar)
        if variant == "H_bar":
            out = 1j * out
        out = np.asarray(out)
        return out.item() if scalar else out

    if variant == "H_R":
        x = np.asarray(z, dtype=float)
        scalar = x.ndim == 0
        alpha = np.pi / (2.0 * r)
        term = lambda k: (np.pi / r) * np.tanh(alpha * (x - TWO_PI * k))
        out, _ = _pair_sum(term, policy)
        out = out.real - x / r
        out = np.asarray(out)
        return out.item() if scalar else out

    raise DomainError(f"unknown variant {variant!r}")


def vector_field_deriv(r: float, z, variant: str = "H",
                       policy: SeriesPolicy | None = None):
    """d/dz of vector_field; used by the log-derivative flows.

    H'_r(z) = -1/r - 2 (pi/2r)^2 sum_k csch^2(pi (z-2k pi)/2r)  (absolutely
    convergent), and (H^R)'(x) = -1/r + (pi^2/2r^2) sum_k sech^2(...).
    """
    if policy is None:
        policy = SeriesPolicy.for_modulus(r)
    alpha = np.pi / (2.0 * r)
    if variant == "H":
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        _check_pole_lattice(z, r)
        out, _ = _pair_sum(lambda k: _csch2(alpha * (z - TWO_PI * k)), policy)
        out = -1.0 / r - 2.0 * (alpha ** 2) * out
        out = np.asarray(out)
        return out.item() if scalar else out
    if variant == "H_R":
        x = np.asarray(z, dtype=float)
        scalar = x.ndim == 0
        out, _ = _pair_sum(lambda k: np.real(_sech2(alpha * (x - TWO_PI * k).astype(complex))),
                           policy)
        out = -1.0 / r + 2.0 * (alpha ** 2) * out.real
        out = np.asarray(out)
        return out.item() if scalar else out
    raise DomainError(f"unknown variant {variant!r}")


def bubble_gamma(r: float, abs_tol: float = 1e-9) -> float:
    """Bubble-measure constant Gamma(r).

    Gamma(r) = (1/pi) int_{C_r} H_{A_r}(1, w) H_disk(w, 1) |dw|, the measure
    of Brownian bubbles rooted at 1 in the unit disk that reach the closed
    inner disk of radius e^{-r}.  Evaluated by trapezoid quadrature of the
    smooth periodic integrand (spectrally convergent), absolute error below
    abs_tol.  Gamma(r) ~ 1/(2r) for large r.
    """
    if r <= 0.0:
        raise DomainError("r must be positive")
    policy = SeriesPolicy.for_modulus(r)
    alpha = np.pi / (2.0 * r)
    e_r = math.exp(-r)

    def integrand(theta):
        s, _ = _pair_sum(
            lambda k: (alpha ** 2) * np.real(_sech2(alpha * (theta - TWO_PI * k).astype(complex))),
            policy)
        w = e_r * np.exp(1j * theta)
        hd = (1.0 - e_r ** 2) / (2.0 * np.abs(w - 1.0) ** 2)
        return s.real * hd / np.pi

    n = 64
    prev = None
    while n <= 1 << 16:
        theta = np.linspace(0.0, TWO_PI, n, endpoint=False)
        val = float(np.mean(integrand(theta)) * TWO_PI)
        if prev is not None and abs(val - prev) < 0.5 * abs_tol:
            return val
        prev = val
        n *= 2
    raise NumericError("bubble constant quadrature did not converge",
                       achieved_tol=abs(val - prev))


def coupling(r: float, z, zp, variant: str = "A",
             policy: SeriesPolicy | None = None):
    """Kernel-ratio couplings driving the two-path observables.

    variant "F": sum_k H(z, 2k pi) H(2k pi, z') / H(z, z') with z a bottom
    boundary point and z' = zp + ir a top one (single translate sum of
    products).
    variant "A": H_{A_r}(psi(z), 1) H_{A_r}(1, psi(zp + ir)) /
    H_{A_r}(psi(z), psi(zp + ir)) with z an angle on C_0 and zp an angle on
    C_r (product of translate sums; the e^r factors cancel).
    """
    if r <= 0.0:
        raise DomainError("r must be positive")
    if policy is None:
        policy = SeriesPolicy.for_modulus(r)
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    scalar = z.ndim == 0 and zp.ndim == 0
    alpha = np.pi / (2.0 * r)

    if variant == "F":
        num, _ = _pair_sum(
            lambda k: np.real(_csch2(alpha * (z - TWO_PI * k).astype(complex)))
            * np.real(_sech2(alpha * (zp - TWO_PI * k).astype(complex))),
            policy)
        den = strip_bb_cross(r, zp - z, policy, summed=False)
        out = (alpha ** 2) * num.real / den
    elif variant == "A":
        f1 = strip_bb_same(r, z, policy)
        f2 = strip_bb_cross(r, zp, policy)
        den = strip_bb_cross(r, zp - z, policy)
        out = f1 * f2 / den
    else:
        raise DomainError(f"unknown variant {variant!r}")
    out = np.asarray(out)
    return out.item() if scalar else out


def excursion_annulus(r: float) -> float:
    """Total excursion measure between the two circles of A_r: 2 pi / r."""
    if r <= 0.0:
        raise DomainError("r must be positive")
    return TWO_PI / r
