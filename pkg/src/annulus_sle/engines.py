"""Vectorized batch machinery behind the Monte Carlo estimators.

Everything here evolves whole replica batches as numpy arrays with
Euler-Maruyama drivers and Euler point updates.  The single-flow module
`loewner` is the reference these engines are cross-checked against; the
truncation of translate sums is fixed per run (flow accuracy, not the 1e-13
kernel policy).

Seeding rule: replicas are processed in fixed-size chunks; chunk j of a run
with master seed S uses Generator(PCG64(SeedSequence(S, spawn_key=(j,)))).
The chunk size is a constant, so results are independent of any thread
count and merge deterministically in chunk order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
CHUNK = 1024


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(chunk_index,))))


def chunk_sizes(n: int) -> list[int]:
    return [min(CHUNK, n - i) for i in range(0, n, CHUNK)]


def wrap(x):
    """Reduce angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - x, TWO_PI)


def kmax_for(s: float) -> int:
    """Translate-window size for flow-grade accuracy (error < 1e-12)."""
    return max(4, int(math.ceil(1.6 * s)) + 2)


# ---------------------------------------------------------------------------
# translate-sum fields on real/complex arrays, fixed symmetric window
# ---------------------------------------------------------------------------

def _coth_real(w):
    e = np.exp(-2.0 * np.abs(w))
    return np.sign(w) * (1.0 + e) / (1.0 - e)


def _csch2_real(w):
    e = np.exp(-2.0 * np.abs(w))
    return 4.0 * e / (1.0 - e) ** 2


def _sech2_real(w):
    e = np.exp(-2.0 * np.abs(w))
    return 4.0 * e / (1.0 + e) ** 2


def field_h_real(s: float, x, kmax: int | None = None):
    """Annulus flow field H_s on the bottom boundary (real arguments)."""
    if kmax is None:
        kmax = kmax_for(s)
    alpha = np.pi / (2.0 * s)
    k = TWO_PI * np.arange(-kmax, kmax + 1)
    w = alpha * (np.asarray(x, dtype=float)[..., None] - k)
    return -np.asarray(x) / s + (np.pi / s) * np.sum(_coth_real(w), axis=-1)


def field_hr_real(s: float, x, kmax: int | None = None):
    """Top-boundary field H^R_s (real)."""
    if kmax is None:
        kmax = kmax_for(s)
    alpha = np.pi / (2.0 * s)
    k = TWO_PI * np.arange(-kmax, kmax + 1)
    w = alpha * (np.asarray(x, dtype=float)[..., None] - k)
    return -np.asarray(x) / s + (np.pi / s) * np.sum(np.tanh(w), axis=-1)


def field_h_prime_real(s: float, x, kmax: int | None = None):
    if kmax is None:
        kmax = kmax_for(s)
    alpha = np.pi / (2.0 * s)
    k = TWO_PI * np.arange(-kmax, kmax + 1)
    w = alpha * (np.asarray(x, dtype=float)[..., None] - k)
    return -1.0 / s - 2.0 * alpha ** 2 * np.sum(_csch2_real(w), axis=-1)


def field_hr_prime_real(s: float, x, kmax: int | None = None):
    if kmax is None:
        kmax = kmax_for(s)
    alpha = np.pi / (2.0 * s)
    k = TWO_PI * np.arange(-kmax, kmax + 1)
    w = alpha * (np.asarray(x, dtype=float)[..., None] - k)
    return -1.0 / s + 2.0 * alpha ** 2 * np.sum(_sech2_real(w), axis=-1)


def field_h_complex(s: float, z, kmax: int | None = None):
    """Annulus flow field H_s for complex covering points."""
    if kmax is None:
        kmax = kmax_for(s)
    alpha = np.pi / (2.0 * s)
    k = TWO_PI * np.arange(-kmax, kmax + 1)
    w = alpha * (np.asarray(z, dtype=complex)[..., None] - k)
    sgn = np.where(w.real >= 0.0, 1.0, -1.0)
    e = np.exp(-2.0 * sgn * w)
    coth = sgn * (1.0 + e) / (1.0 - e)
    return -np.asarray(z) / s + (np.pi / s) * np.sum(coth, axis=-1)


def bb_same_sum(s: float, x, kmax: int | None = None):
    """Translate sum of (pi/2s)^2 csch^2; annulus kernel on one circle."""
    if kmax is None:
        kmax = kmax_for(s)
    alpha = np.pi / (2.0 * s)
    k = TWO_PI * np.arange(-kmax, kmax + 1)
    w = alpha * (np.asarray(x, dtype=float)[..., None] - k)
    return alpha ** 2 * np.sum(_csch2_real(w), axis=-1)


def bb_cross_sum(s: float, x, kmax: int | None = None):
    if kmax is None:
        kmax = kmax_for(s)
    alpha = np.pi / (2.0 * s)
    k = TWO_PI * np.arange(-kmax, kmax + 1)
    w = alpha * (np.asarray(x, dtype=float)[..., None] - k)
    return alpha ** 2 * np.sum(_sech2_real(w), axis=-1)


def coupling_a(s: float, z, zp, kmax: int | None = None):
    """The kernel ratio A(s, z, z') on arrays (see kernels.coupling)."""
    return bb_same_sum(s, z, kmax) * bb_cross_sum(s, zp, kmax) / bb_cross_sum(s, np.asarray(zp) - np.asarray(z), kmax)


# ---------------------------------------------------------------------------
# 1-d angle diffusions  d Theta = beta cot_2(Theta) dt + sigma dW
# ---------------------------------------------------------------------------

@dataclass
class ThetaRecord:
    t: float
    theta: np.ndarray
    log_int: np.ndarray     # integral of 1/(4 sin_2^2 Theta) ds
    alive: np.ndarray


def run_theta(beta: float, sigma: float, theta0, dt: float, t_checkpoints,
              rng: np.random.Generator, n_rep: int,
              collect_path: bool = False):
    """Euler-Maruyama for the radial Bessel angle on (0, 2 pi).

    Returns records at the checkpoints with the accumulated singular
    integral used by derivative weights, plus a drift-clip counter.
    Replicas whose angle exits (0, 2 pi) are frozen and flagged.
    """
    theta = np.broadcast_to(np.asarray(theta0, dtype=float), (n_rep,)).copy()
    log_int = np.zeros(n_rep)
    alive = np.ones(n_rep, dtype=bool)
    clip_limit = 10.0 / math.sqrt(dt)
    clips = 0
    t = 0.0
    records = []
    path = [] if collect_path else None
    for t_next in t_checkpoints:
        n_steps = max(0, int(round((t_next - t) / dt)))
        for _ in range(n_steps):
            drift = beta / np.tan(0.5 * theta)
            big = np.abs(drift) > clip_limit
            if np.any(big):
                clips += int(big.sum())
                drift = np.clip(drift, -clip_limit, clip_limit)
            s2 = np.sin(0.5 * theta)
            log_int += np.where(alive, 0.25 * dt / np.maximum(s2 * s2, 1e-30), 0.0)
            step = drift * dt + sigma * math.sqrt(dt) * rng.standard_normal(n_rep)
            theta = np.where(alive, theta + step, theta)
            exited = (theta <= 0.0) | (theta >= TWO_PI)
            alive &= ~exited
            if collect_path:
                path.append(theta.copy())
        t = t_next
        records.append(ThetaRecord(t, theta.copy(), log_int.copy(), alive.copy()))
    return records, clips, (np.array(path) if collect_path else None)


# ---------------------------------------------------------------------------
# swallow clouds
# ---------------------------------------------------------------------------

@dataclass
class Cloud:
    """A fixed grid of covering-space test points with per-replica state."""

    points: np.ndarray          # (P,) complex, one period 0 <= x < 2 pi
    nx: int
    ny: int
    eps: float                  # capacity-metric tube radius

    @staticmethod
    def covering_grid(r: float, nx: int, ny: int, eps: float,
                      y_top_margin: float = 0.0) -> "Cloud":
        xs = TWO_PI * (np.arange(nx) + 0.5) / nx
        ys = (r - y_top_margin) * (np.arange(ny) + 0.5) / ny
        pts = (xs[None, :] + 1j * ys[:, None]).ravel()
        return Cloud(points=pts, nx=nx, ny=ny, eps=eps)

    def translate_pairs(self, k: int):
        """Index pairs (i, j) with point_j = point_i - 2 pi k (same grid)."""
        return self.nx  # columns wrap; handled by the caller via reshape


def cloud_collision(hit_a: np.ndarray, hit_b: np.ndarray) -> np.ndarray:
    """Replica mask: some grid point is inside both tubes."""
    return np.any(hit_a & hit_b, axis=-1)


def cloud_self_translate_collision(hit: np.ndarray, nx: int, ny: int,
                                   shifts: list[int]) -> np.ndarray:
    """Curve-meets-own-translate mask from one covering-period tube field.

    hit has shape (..., ny*nx) over one period in x; a translate by 2 pi k
    is a cyclic column shift, exact on the periodic grid.
    """
    h = hit.reshape(hit.shape[:-1] + (ny, nx))
    out = np.zeros(hit.shape[:-1], dtype=bool)
    for k in shifts:
        if k == 0:
            continue
        out |= np.any(h & np.roll(h, k, axis=-1), axis=(-2, -1))
    return out
