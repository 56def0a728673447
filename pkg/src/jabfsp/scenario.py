"""Physical scenario: user angles, ULA steering vectors, fading, clustering.

Channel arrays are indexed ``[cluster, user, ...]``. The gain of user ``q`` in
cluster ``n`` on subcarrier ``k`` is ``rho * eta[k] * a`` where ``a`` is the
steering vector of its angle of arrival.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import ContractError


@dataclass(frozen=True)
class UserGeometry:
    cluster: int
    user: int
    theta_deg: float
    rho: float = 1.0

    def __post_init__(self):
        if not -90.0 < self.theta_deg < 90.0:
            raise ContractError(f"angle {self.theta_deg} outside (-90, 90)")


@dataclass(frozen=True)
class ChannelSet:
    """Per-user channel knowledge.

    Attributes
    ----------
    theta_deg : (N, Q) angles of arrival.
    rho : (N, Q) large-scale fading amplitudes.
    eta : (N, Q, K) small-scale fading, fixed over the frame.
    steering : (N, Q, M) steering vectors.
    spacing_ratio : element spacing over wavelength.
    """

    theta_deg: np.ndarray
    rho: np.ndarray
    eta: np.ndarray
    steering: np.ndarray
    spacing_ratio: float = 0.5

    @property
    def shape(self) -> tuple[int, int, int, int]:
        """``(N, Q, K, M)``."""
        N, Q, K = self.eta.shape
        return N, Q, K, self.steering.shape[-1]

    @property
    def fading(self) -> np.ndarray:
        return self.rho[..., None] * self.eta

    @property
    def gains(self) -> np.ndarray:
        """(N, Q, K, M) channel gain vectors."""
        return self.fading[..., None] * self.steering[:, :, None, :]


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray  # cluster label per flat user index
    centroids: np.ndarray
    n_clusters: int
    wcss: float = field(default=0.0)

    def members(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.labels == n)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)


def steering_vector(theta_deg: float, M: int, spacing_ratio: float = 0.5) -> np.ndarray:
    m = np.arange(M)
    phase = -2j * np.pi * m * spacing_ratio * np.sin(np.deg2rad(theta_deg))
    return np.exp(phase)


def steering_matrix(theta_deg, M: int, spacing_ratio: float = 0.5) -> np.ndarray:
    """Steering vectors for an array of angles, stacked along the last axis."""
    theta = np.asarray(theta_deg, dtype=float)
    m = np.arange(M)
    return np.exp(-2j * np.pi * spacing_ratio * np.sin(np.deg2rad(theta))[..., None] * m)


def normalized_direction(theta_deg, spacing_ratio: float = 0.5) -> np.ndarray:
    return 2.0 * spacing_ratio * np.sin(np.deg2rad(np.asarray(theta_deg, dtype=float)))


def complex_normal(rng: np.random.Generator, shape, power: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def cluster_angles(
    centers_deg,
    Q: int,
    width_deg: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``Q`` angles per cluster uniformly inside a band around each centre."""
    centers = np.asarray(centers_deg, dtype=float)
    half = width_deg / 2.0
    return centers[:, None] + rng.uniform(-half, half, size=(centers.size, Q))


def make_geometry(theta_deg: np.ndarray, rho=None) -> list[UserGeometry]:
    theta_deg = np.asarray(theta_deg, dtype=float)
    rho = np.ones_like(theta_deg) if rho is None else np.broadcast_to(rho, theta_deg.shape)
    return [
        UserGeometry(n, q, float(theta_deg[n, q]), float(rho[n, q]))
        for n in range(theta_deg.shape[0])
        for q in range(theta_deg.shape[1])
    ]


def sample_channels(
    geometry: list[UserGeometry],
    K: int,
    M: int,
    rng: np.random.Generator,
    spacing_ratio: float = 0.5,
) -> ChannelSet:
    N = 1 + max(g.cluster for g in geometry)
    Q = 1 + max(g.user for g in geometry)
    theta = np.zeros((N, Q))
    rho = np.zeros((N, Q))
    for g in geometry:
        theta[g.cluster, g.user] = g.theta_deg
        rho[g.cluster, g.user] = g.rho
    eta = complex_normal(rng, (N, Q, K))
    return ChannelSet(theta, rho, eta, steering_matrix(theta, M, spacing_ratio), spacing_ratio)


def channel_correlation(a1, a2) -> float:
    a1 = np.asarray(a1)
    return float(np.abs(np.vdot(a1, a2)) / a1.size)


def fejer_correlation(phi1: float, phi2: float, M: int) -> float:
    """Closed-form steering correlation in terms of normalised directions."""
    x = np.pi * (phi2 - phi1) / 2.0
    den = M * np.sin(x)
    if abs(den) < 1e-15:
        return 1.0
    return float(abs(np.sin(M * x) / den))


def _kmeans_1d(x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100):
    centroids = rng.choice(x, size=k, replace=False)
    for _ in range(max_iter):
        labels = np.argmin(np.abs(x[:, None] - centroids[None, :]), axis=1)
        new = np.array(
            [x[labels == j].mean() if np.any(labels == j) else centroids[j] for j in range(k)]
        )
        if np.array_equal(new, centroids):
            break
        centroids = new
    labels = np.argmin(np.abs(x[:, None] - centroids[None, :]), axis=1)
    wcss = float(((x - centroids[labels]) ** 2).sum())
    return labels, centroids, wcss


def cluster_users(
    channels: ChannelSet,
    N: int,
    rng: np.random.Generator,
    restarts: int = 10,
) -> ClusterAssignment:
    """K-means over the scalar normalised directions of all users.

    Users are flattened cluster-major. The best of ``restarts`` initialisations
    by within-cluster sum of squares is kept and labels are ordered by centroid.
    """
    phi = normalized_direction(channels.theta_deg, channels.spacing_ratio).ravel()
    if N > phi.size:
        raise ContractError(f"cannot form {N} clusters from {phi.size} users")
    best = None
    for _ in range(restarts):
        labels, centroids, wcss = _kmeans_1d(phi, N, rng)
        if best is None or wcss < best[2]:
            best = (labels, centroids, wcss)
    labels, centroids, wcss = best
    order = np.argsort(centroids)
    relabel = np.empty(N, dtype=int)
    relabel[order] = np.arange(N)
    return ClusterAssignment(relabel[labels], centroids[order], N, wcss)


def average_steering(channels: ChannelSet, from_gains: bool = False, k: int = 0) -> np.ndarray:
    """(N, M) cluster-average steering vectors.

    With ``from_gains`` the vectors are recovered from subcarrier ``k`` of the
    channel gains by dividing out each gain's first element.
    """
    if from_gains:
        g = channels.gains[:, :, k, :]
        return (g / g[..., :1]).mean(axis=1)
    return channels.steering.mean(axis=1)


def _uniform_disturb(x: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    # independent uniform error on real and imaginary parts, half-range p% of |part|
    frac = p / 100.0
    re = x.real + rng.uniform(-1.0, 1.0, x.shape) * np.abs(x.real) * frac
    im = x.imag + rng.uniform(-1.0, 1.0, x.shape) * np.abs(x.imag) * frac
    return re + 1j * im


def perturb_csi(channels: ChannelSet, p: float, rng: np.random.Generator) -> ChannelSet:
    """Receiver-side copy of the channels with uniform fading/steering errors."""
    if p < 0:
        raise ContractError("CSI error percentage must be non-negative")
    if p == 0:
        return channels
    return replace(
        channels,
        eta=_uniform_disturb(channels.eta, p, rng),
        steering=_uniform_disturb(channels.steering, p, rng),
    )
