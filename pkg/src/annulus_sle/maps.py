"""Closed-form conformal maps and a polyline zipper.

Used for oracles (slit capacity, slit-domain conformal radius) and for the
boundary-perturbation observable, where the image of a fixed hull under the
evolving flow is re-uniformized numerically from a tracked polyline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def disk_to_half(z):
    """Moebius map of the unit disk onto the upper half plane, 1 -> 0, 0 -> i."""
    z = np.asarray(z, dtype=complex)
    return 1j * (1.0 - z) / (1.0 + z)


def disk_to_half_deriv(z):
    z = np.asarray(z, dtype=complex)
    return -2j / (1.0 + z) ** 2


def half_to_disk(w):
    w = np.asarray(w, dtype=complex)
    return (1j - w) / (1j + w)


# ---------------------------------------------------------------------------
# Radial slit map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialSlitMap:
    """The normalized map of the disk minus the radial slit [x0 e^{i theta0}, e^{i theta0}].

    gbar sends the slit complement onto the unit disk with gbar(0) = 0 and
    gbar'(0) > 0; gbar_prime0 is the derivative at the origin (>= 1).
    """

    x0: float
    theta0: float
    s: float        # half-plane slit height (1-x0)/(1+x0)
    rho: float      # image of the origin before recentering
    gbar_prime0: float

    def gbar(self, z):
        z = np.asarray(z, dtype=complex) * np.exp(-1j * self.theta0)
        w = disk_to_half(z)
        w2 = np.sqrt(w * w + self.s ** 2)
        # branch: w2 ~ w at infinity, i.e. Im w2 >= 0 for interior points and
        # sign(Re w2) = sign(Re w) on the boundary (robust to rounding noise
        # pushing boundary images slightly off the real axis).
        near_real = np.abs(w2.imag) <= 1e-12 * np.abs(w2.real)
        sgn = np.where(w.real >= 0.0, 1.0, -1.0)
        flip = np.where(near_real, w2.real * sgn < 0.0, w2.imag < 0.0)
        w2 = np.where(flip, -w2, w2)
        zeta = half_to_disk(w2)
        out = (zeta - self.rho) / (1.0 - self.rho * zeta)
        return out * np.exp(1j * self.theta0)

    def abs_deriv(self, z, eps: float = 1e-7):
        """|gbar'(z)| by a central difference.

        Boundary points are differentiated along the circle so the stencil
        stays in the closed domain.
        """
        z = complex(z)
        if abs(abs(z) - 1.0) < 1e-9:
            zp = z * complex(math.cos(eps), math.sin(eps))
            zm = z * complex(math.cos(eps), -math.sin(eps))
            return abs(self.gbar(zp) - self.gbar(zm)) / abs(zp - zm)
        return abs(self.gbar(z + eps) - self.gbar(z - eps)) / (2.0 * eps)


def radial_slit_map(x0: float, theta0: float = 0.0) -> RadialSlitMap:
    if not (0.0 < x0 < 1.0):
        raise DomainError("slit inner endpoint must satisfy 0 < x0 < 1")
    s = (1.0 - x0) / (1.0 + x0)
    c = math.sqrt(1.0 - s * s)
    rho = (1.0 - c) / (1.0 + c)
    # chain rule at the origin through the four elementary maps
    d1 = 2.0                       # |(disk_to_half)'(0)|
    d2 = 1.0 / c                   # |sqrt(w^2+s^2)'| at w = i
    d3 = 2.0 / (1.0 + c) ** 2      # |(half_to_disk)'(ic)|
    d4 = 1.0 / (1.0 - rho * rho)   # recentring Moebius derivative at rho
    gp0 = d1 * d2 * d3 * d4
    return RadialSlitMap(x0=x0, theta0=theta0, s=s, rho=rho, gbar_prime0=gp0)


# ---------------------------------------------------------------------------
# Half-plane capacity oracles
# ---------------------------------------------------------------------------

def capacity_halfplane_slit(height: float) -> float:
    """Capacity of the vertical slit [0, i*height].

    Normalized so that a half-disk of radius d has capacity d^2/2 (i.e. one
    half of the 1/z coefficient of the normalized uniformizing map).
    """
    return 0.25 * height * height


def capacity_halfplane_halfdisk(d: float) -> float:
    return 0.5 * d * d


# ---------------------------------------------------------------------------
# Strip transport for chordal sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StripTransport:
    """Conformal map of the strip S_r onto the half plane, 0 -> 0, x_end+ir -> oo.

    T(z) = (e^{pi z / r} - 1) / (e^{pi z / r} + q) with q = e^{pi x_end / r}.
    """

    r: float
    x_end: float
    q: float

    def to_half(self, z):
        e = np.exp(np.pi * np.asarray(z, dtype=complex) / self.r)
        return (e - 1.0) / (e + self.q)

    def to_strip(self, w):
        w = np.asarray(w, dtype=complex)
        e = (1.0 + self.q * w) / (1.0 - w)
        return self.r / np.pi * np.log(e)

    def deriv_to_half(self, z):
        e = np.exp(np.pi * np.asarray(z, dtype=complex) / self.r)
        return (np.pi / self.r) * e * (1.0 + self.q) / (e + self.q) ** 2


def strip_transport(r: float, x_end: float) -> StripTransport:
    if r <= 0.0:
        raise DomainError("r must be positive")
    return StripTransport(r=r, x_end=x_end, q=math.exp(math.pi * x_end / r))


# ---------------------------------------------------------------------------
# Vertical-slit zipper
# ---------------------------------------------------------------------------

def _slit_step(w, xi, h):
    """Map removing the vertical segment [xi, xi + ih]; identity at infinity."""
    u = w - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.sqrt(1.0 + (h / u) ** 2)
    return xi + u * root


def _slit_step_deriv(u, h):
    return 1.0 / np.sqrt(1.0 + (h / u) ** 2)


class DiskZipper:
    """Uniformize the disk minus a boundary-attached polyline slit.

    The polyline starts at a boundary point exp(i*attach_angle) and lists
    interior vertices in order.  The composition of vertical-slit maps gives
    the normalized map Phi of the slit complement onto the disk (Phi(0)=0),
    from which |Phi'(0)| and boundary derivative moduli are read off.

    Accuracy is set by the polyline resolution; exact for a straight radial
    slit in the limit of many vertices (validated against RadialSlitMap).
    """

    def __init__(self, attach_angle: float, vertices: np.ndarray):
        rot = np.exp(-1j * attach_angle)
        self.attach_angle = float(attach_angle)
        zeta = 1j            # image of the origin
        dzeta = 2.0          # |chain derivative| at the origin
        vs = np.array(disk_to_half(np.asarray(vertices, dtype=complex) * rot),
                      dtype=complex)
        dzeta = abs(disk_to_half_deriv(0.0))
        self._steps = []
        for j in range(len(vs)):
            xi, h = float(vs[j].real), float(vs[j].imag)
            if h <= 1e-14:
                continue
            dzeta *= abs(_slit_step_deriv(zeta - xi, h))
            zeta = _slit_step(zeta, xi, h)
            self._steps.append((xi, h))
            vs = _slit_step(vs, xi, h)
        self.zeta = complex(zeta)
        self._dzeta = float(dzeta)

    @property
    def phi_prime0(self) -> float:
        """|Phi'(0)| of the normalized map (conformal radius factor, >= 1)."""
        return self._dzeta / (2.0 * self.zeta.imag)

    def boundary_abs_deriv(self, angle) -> np.ndarray:
        """|Phi'| at boundary points exp(i*angle) staying off the slit base."""
        angle = np.atleast_1d(np.asarray(angle, dtype=float))
        z = np.exp(1j * (angle - self.attach_angle))
        w = disk_to_half(z).real.astype(float)
        d = np.abs(disk_to_half_deriv(z))
        for xi, h in self._steps:
            d *= np.abs(_slit_step_deriv(w - xi, h))
            w = _slit_step(w, xi, h).real
        # final half-plane -> disk Moebius sending zeta to 0
        d *= 2.0 * self.zeta.imag / np.abs(w - np.conj(self.zeta)) ** 2
        # undo the |.|=1 scaling of the initial rotation (modulus one)
        return d
