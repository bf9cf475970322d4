"""Data containers, Toeplitz regressors, simulation and seeded test systems.

Random streams are counter-based (Philox) keyed by ``(seed, *stream)`` so a
given run of a benchmark draws the same numbers whatever the execution order.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, signal

from .exceptions import DataError, ParameterError, ShapeError


def make_rng(seed, *stream):
    """Philox generator keyed by ``seed`` and an optional stream index tuple."""
    key = np.random.SeedSequence([int(seed), *(int(s) for s in stream)])
    return np.random.Generator(np.random.Philox(key))


@dataclass(frozen=True)
class Dataset:
    """Input ``u_0..u_{N-1}`` and output ``y_1..y_N`` (``y[k]`` pairs with ``u[k]``)."""

    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if u.shape != y.shape:
            raise ShapeError(f"u and y lengths differ: {u.size} vs {y.size}")
        if u.size < 1:
            raise DataError("dataset is empty")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        if not np.any(u != 0):
            raise DataError("input is identically zero; nothing can be identified")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def N(self):
        return self.u.size


@dataclass(frozen=True)
class ImpulseResponse:
    """Coefficients ``g_1..g_n`` (``g_0 = 0`` is implicit), plus generator metadata."""

    g: np.ndarray
    poles: np.ndarray = field(default=None, repr=False)
    zeros: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float).ravel()
        if g.size < 1 or not np.all(np.isfinite(g)):
            raise ParameterError("impulse response must be a nonempty finite vector")
        object.__setattr__(self, "g", g)

    @property
    def n(self):
        return self.g.size


def toeplitz_regressor(u, n, N=None):
    """``N x n`` matrix whose row ``t`` (1-based), column ``i`` holds ``u_{t-i}``.

    Zero initial conditions: ``u_k = 0`` for ``k < 0``.
    """
    u = np.asarray(u, dtype=float).ravel()
    N = u.size if N is None else N
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    if int(N) != N or N < 1:
        raise ParameterError(f"N must be a positive integer, got {N!r}")
    if N > u.size:
        raise ShapeError(f"N={N} exceeds the input length {u.size}")
    first_row = np.zeros(int(n))
    first_row[0] = u[0]
    return linalg.toeplitz(u[:N], first_row)


def simulate_system(g, u, noise):
    """``y = U g + v`` for a system at rest before ``t = 0``."""
    g = g.g if isinstance(g, ImpulseResponse) else np.asarray(g, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    noise = np.asarray(noise, dtype=float).ravel()
    if noise.size != u.size:
        raise ShapeError(f"noise length {noise.size} != input length {u.size}")
    U = toeplitz_regressor(u, g.size)
    return Dataset(u=u, y=U @ g + noise)


def impulse_from_poles_zeros(poles, zeros, gain, n):
    """First ``n`` samples ``g_1..g_n`` of ``gain * prod(z - zeros) / prod(z - poles)``.

    Requires fewer zeros than poles (strictly proper, so ``g_0 = 0``).
    """
    poles = np.asarray(poles, dtype=complex).ravel()
    zeros = np.asarray(zeros, dtype=complex).ravel()
    if zeros.size >= poles.size:
        raise ParameterError("need fewer zeros than poles for a strictly causal system")
    den = np.real_if_close(np.poly(poles), tol=1e6).real
    num = np.zeros(poles.size + 1)
    num[poles.size - zeros.size:] = gain * np.real_if_close(np.poly(zeros), tol=1e6).real
    impulse = np.zeros(n + 1)
    impulse[0] = 1.0
    h = signal.lfilter(num, den, impulse)
    return h[1:]


def _conjugate_roots(rng, count, r_low, r_high, n_real):
    radii = rng.uniform(r_low, r_high, size=count)
    roots = []
    n_pairs = (count - n_real) // 2
    for k in range(n_pairs):
        phase = rng.uniform(0.0, np.pi)
        z = radii[k] * np.exp(1j * phase)
        roots.extend([z, np.conj(z)])
    signs = rng.choice([-1.0, 1.0], size=n_real)
    roots.extend(signs * radii[n_pairs:n_pairs + n_real])
    return np.array(roots, dtype=complex)


def random_system(order, seed, n=50, stream=()):
    """Random stable rational system of the given order, truncated to ``n`` taps.

    Poles come in conjugate pairs (plus real poles to fix the parity and a few
    optional extra ones) with magnitudes uniform in [0.4, 0.95] and uniform
    phases. ``order - 1`` zeros are drawn the same way with magnitudes in
    [0, 0.95]. The response is scaled to unit peak magnitude.
    """
    if int(order) != order or order < 1:
        raise ParameterError(f"order must be a positive integer, got {order!r}")
    rng = make_rng(seed, *stream)
    order = int(order)
    n_real_p = order % 2 + 2 * int(rng.integers(0, order // 4 + 1))
    poles = _conjugate_roots(rng, order, 0.4, 0.95, n_real_p)
    nz = order - 1
    n_real_z = nz % 2 + 2 * int(rng.integers(0, nz // 4 + 1))
    zeros = _conjugate_roots(rng, nz, 0.0, 0.95, n_real_z)
    g = impulse_from_poles_zeros(poles, zeros, 1.0, n)
    peak = np.max(np.abs(g))
    if peak == 0:  # pragma: no cover - requires all zeros cancelling every pole
        raise ParameterError("generated system has an all-zero response")
    return ImpulseResponse(g=g / peak, poles=poles, zeros=zeros)


def sample_outlier_noise(sigma2, c, N, seed, stream=()):
    """Draws from ``(1-c) N(0, sigma2) + c N(0, 100 sigma2)``."""
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2!r}")
    if not 0.0 <= c <= 1.0:
        raise ParameterError(f"contamination probability must lie in [0, 1], got {c!r}")
    rng = make_rng(seed, *stream)
    outlier = rng.random(N) < c
    scale = np.where(outlier, 10.0, 1.0) * np.sqrt(sigma2)
    return scale * rng.standard_normal(N)


def write_dataset_csv(path, dataset):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "y"])
        for u, y in zip(dataset.u, dataset.y):
            writer.writerow([repr(float(u)), repr(float(y))])


def read_dataset_csv(path):
    """Read a ``u,y`` CSV. Raises :class:`DataError` on malformed content."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["u", "y"]:
        raise DataError(f"{path}: expected header 'u,y'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: malformed row ({exc})") from None
    if data.size == 0:
        raise DataError(f"{path}: no data rows")
    return Dataset(u=data[:, 0], y=data[:, 1])
