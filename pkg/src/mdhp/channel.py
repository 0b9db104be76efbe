"""Channel generators: i.i.d. Rayleigh and the clustered mmWave model on ULAs.

Angles are in radians throughout.
"""
from dataclasses import dataclass

import numpy as np

TRUNCATION = 2.0 * np.pi


@dataclass(frozen=True)
class UlaGeometry:
    element_count: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.element_count < 1:
            raise ValueError("element_count must be >= 1")
        if not self.spacing_over_wavelength > 0:
            raise ValueError("spacing_over_wavelength must be positive")


@dataclass(frozen=True)
class MmWaveParams:
    """Clustered channel parameters.

    ``tx_sector``/``rx_sector`` bound the uniform cluster-mean angles;
    ``tx_spread``/``rx_spread`` are the per-path angular standard deviations.
    """

    tx_geometry: UlaGeometry
    rx_geometry: UlaGeometry
    clusters: int = 8
    paths_per_cluster: int = 10
    tx_sector: tuple = (-np.pi / 6, np.pi / 6)
    rx_sector: tuple = (-np.pi, np.pi)
    tx_spread: float = np.deg2rad(7.5)
    rx_spread: float = np.deg2rad(7.5)

    def __post_init__(self):
        if self.clusters < 1 or self.paths_per_cluster < 1:
            raise ValueError("clusters and paths_per_cluster must be >= 1")
        for name in ("tx_sector", "rx_sector"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must satisfy min < max, got {(lo, hi)}")
        if not (self.tx_spread > 0 and self.rx_spread > 0):
            raise ValueError("angular spreads must be positive")

    @property
    def nt(self):
        return self.tx_geometry.element_count

    @property
    def nr(self):
        return self.rx_geometry.element_count


@dataclass(frozen=True)
class PathSet:
    """Per-path gains and angles, arrays of shape (clusters, paths_per_cluster)."""

    gains: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray
    aoa_means: np.ndarray
    aod_means: np.ndarray

    def __len__(self):
        return self.gains.size


def ula_response(geometry, angle):
    n = np.arange(geometry.element_count)
    phase = 2.0 * np.pi * geometry.spacing_over_wavelength * np.sin(angle) * n
    return np.exp(1j * phase) / np.sqrt(geometry.element_count)


def crandn(rng, *shape):
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def gen_rayleigh(nr, nt, rng):
    if nr < 1 or nt < 1:
        raise ValueError("channel dimensions must be >= 1")
    return crandn(rng, nr, nt)


def truncated_laplace(rng, loc, spread, size, limit=TRUNCATION):
    """Laplacian samples with standard deviation ``spread`` kept within ``loc +- limit``.

    Out-of-range draws are redrawn.
    """
    scale = spread / np.sqrt(2.0)
    out = rng.laplace(0.0, scale, size)
    bad = np.abs(out) > limit
    while np.any(bad):
        out[bad] = rng.laplace(0.0, scale, np.count_nonzero(bad))
        bad = np.abs(out) > limit
    return loc + out


def sample_paths(params, rng):
    nc, npth = params.clusters, params.paths_per_cluster
    aoa_means = rng.uniform(*params.rx_sector, size=nc)
    aod_means = rng.uniform(*params.tx_sector, size=nc)
    aoa = truncated_laplace(rng, aoa_means[:, None], params.rx_spread, (nc, npth))
    aod = truncated_laplace(rng, aod_means[:, None], params.tx_spread, (nc, npth))
    gains = crandn(rng, nc, npth)
    return PathSet(gains=gains, aoa=aoa, aod=aod, aoa_means=aoa_means, aod_means=aod_means)


def steering_matrix(geometry, angles):
    """Array responses for a flat array of angles, one per column."""
    n = np.arange(geometry.element_count)[:, None]
    phase = 2.0 * np.pi * geometry.spacing_over_wavelength * n * np.sin(np.ravel(angles))[None, :]
    return np.exp(1j * phase) / np.sqrt(geometry.element_count)


def channel_from_paths(params, paths):
    ar = steering_matrix(params.rx_geometry, paths.aoa)
    at = steering_matrix(params.tx_geometry, paths.aod)
    scale = np.sqrt(params.nt * params.nr / len(paths))
    return scale * (ar * paths.gains.ravel()) @ at.conj().T


def gen_mmwave(params, rng):
    return channel_from_paths(params, sample_paths(params, rng))
