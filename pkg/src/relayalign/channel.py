"""Random channel generation with reproducible, splittable seeding.

Every matrix of every trial gets its own child generator derived from the
master seed by a counter-based split, so adding consumers of randomness never
perturbs the draws of existing ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig

# spawn-key domain tags; never reorder, results depend on them
DOMAIN_FIRST_HOP = 0
DOMAIN_SECOND_HOP = 1
DOMAIN_INIT = 2
DOMAIN_DIRECT = 3
DOMAIN_BASELINE = 4


def child_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one (domain, trial, index...) slot."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def complex_gaussian(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Matrix of i.i.d. zero-mean unit-variance circular complex Gaussians.

    Box-Muller: radius sqrt(-ln(1-u1)) and phase 2*pi*u2 give real and
    imaginary parts that are independent normals of variance 1/2 each.
    """
    amp = np.sqrt(-np.log1p(-rng.random((rows, cols))))
    phase = 2.0 * np.pi * rng.random((rows, cols))
    return amp * np.exp(1j * phase)


@dataclass
class TrialStream:
    """Addresses the random streams belonging to one Monte Carlo trial."""

    master_seed: int
    trial: int

    def matrix_rng(self, domain: int, i: int, j: int) -> np.random.Generator:
        return child_rng(self.master_seed, domain, self.trial, i, j)


@dataclass
class ChannelRealization:
    """One draw of both hops: h[m][k] relay m <- tx k, g[k][m] rx k <- relay m."""

    h: list[list[np.ndarray]]
    g: list[list[np.ndarray]]

    def check_dims(self, config: SystemConfig) -> None:
        if len(self.h) != config.M or len(self.g) != config.K:
            raise ValueError("channel lists do not match config")
        for m in range(config.M):
            for k in range(config.K):
                if self.h[m][k].shape != (config.n_relay[m], config.n_tx[k]):
                    raise ValueError(f"h[{m}][{k}] has shape {self.h[m][k].shape}")
                if self.g[k][m].shape != (config.n_rx[k], config.n_relay[m]):
                    raise ValueError(f"g[{k}][{m}] has shape {self.g[k][m].shape}")
                if not (np.isfinite(self.h[m][k]).all() and np.isfinite(self.g[k][m]).all()):
                    raise ValueError("non-finite channel entry")


def generate_channels(stream: TrialStream, config: SystemConfig) -> ChannelRealization:
    """Draw both hops for one trial; identical stream => identical matrices."""
    h = [
        [
            complex_gaussian(
                stream.matrix_rng(DOMAIN_FIRST_HOP, m, k),
                config.n_relay[m],
                config.n_tx[k],
            )
            for k in range(config.K)
        ]
        for m in range(config.M)
    ]
    g = [
        [
            complex_gaussian(
                stream.matrix_rng(DOMAIN_SECOND_HOP, k, m),
                config.n_rx[k],
                config.n_relay[m],
            )
            for m in range(config.M)
        ]
        for k in range(config.K)
    ]
    return ChannelRealization(h=h, g=g)


def generate_direct_channels(
    stream: TrialStream, config: SystemConfig
) -> list[list[np.ndarray]]:
    """Draw single-hop channels direct[k][q]: rx k <- tx q, for relay-free runs.

    Uses its own stream domain, so asking for direct channels never changes
    the two-hop draws of the same trial.
    """
    return [
        [
            complex_gaussian(
                stream.matrix_rng(DOMAIN_DIRECT, k, q),
                config.n_rx[k],
                config.n_tx[q],
            )
            for q in range(config.K)
        ]
        for k in range(config.K)
    ]
