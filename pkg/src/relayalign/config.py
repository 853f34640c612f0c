"""Network configuration: dimensions, stream counts, power and noise budgets.

A two-hop network has K transmitter-receiver pairs and M amplify-and-forward
relays; there are no direct transmitter-receiver links.  Symmetric setups are
written in the compact form ``(N_R x N_T, d)^K + N_X^M``, e.g. ``(2x2,1)^4+2^4``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


@dataclass
class SystemConfig:
    """Dimensions and budgets of one two-hop relay interference network."""

    n_tx: list[int]            # transmit antennas per pair
    n_rx: list[int]            # receive antennas per pair
    n_relay: list[int]         # antennas per relay
    d: list[int]               # data streams per pair
    p_tx_max: list[float]      # transmit power budget per pair (linear)
    p_relay_max: list[float]   # per-relay power budget (linear)
    p_relay_sum_max: float     # total relay power budget (linear)
    sigma2_relay: list[float]  # noise variance at each relay
    sigma2_rx: list[float]     # noise variance at each receiver

    def __post_init__(self) -> None:
        self.validate()

    @property
    def K(self) -> int:
        return len(self.n_tx)

    @property
    def M(self) -> int:
        return len(self.n_relay)

    def validate(self) -> None:
        """Raise ValueError if the configuration is inconsistent."""
        if len(self.n_tx) == 0 or len(self.n_relay) == 0:
            raise ValueError("need at least one pair and one relay")
        k = len(self.n_tx)
        m = len(self.n_relay)
        for name, seq, want in (
            ("n_rx", self.n_rx, k),
            ("d", self.d, k),
            ("p_tx_max", self.p_tx_max, k),
            ("sigma2_rx", self.sigma2_rx, k),
            ("p_relay_max", self.p_relay_max, m),
            ("sigma2_relay", self.sigma2_relay, m),
        ):
            if len(seq) != want:
                raise ValueError(f"{name} must have length {want}, got {len(seq)}")
        for seq in (self.n_tx, self.n_rx, self.n_relay):
            if any(int(n) != n or n < 1 for n in seq):
                raise ValueError("antenna counts must be integers >= 1")
        for kk in range(k):
            if self.d[kk] < 1:
                raise ValueError("stream counts must be >= 1")
            # streams cannot exceed the smaller of the terminal array sizes
            if self.d[kk] > min(self.n_tx[kk], self.n_rx[kk]):
                raise ValueError(
                    f"d[{kk}]={self.d[kk]} exceeds min(n_tx, n_rx)="
                    f"{min(self.n_tx[kk], self.n_rx[kk])}"
                )
        positives = (
            list(self.p_tx_max)
            + list(self.p_relay_max)
            + [self.p_relay_sum_max]
            + list(self.sigma2_relay)
            + list(self.sigma2_rx)
        )
        if any(not (p > 0) for p in positives):
            raise ValueError("powers and noise variances must be strictly positive")

    def is_symmetric(self) -> bool:
        """True when every pair and every relay share identical parameters."""
        return (
            len(set(self.n_tx)) == 1
            and len(set(self.n_rx)) == 1
            and len(set(self.n_relay)) == 1
            and len(set(self.d)) == 1
            and len(set(self.p_tx_max)) == 1
            and len(set(self.p_relay_max)) == 1
            and len(set(self.sigma2_relay)) == 1
            and len(set(self.sigma2_rx)) == 1
        )


@dataclass
class NetworkShape:
    """Dimensions parsed from the symmetric shorthand, without budgets."""

    n_rx: int
    n_tx: int
    d: int
    K: int
    n_relay: int
    M: int


_SHAPE_RE = re.compile(
    r"""^\(\s*(\d+)\s*[x×]\s*(\d+)\s*,\s*(\d+)\s*\)\s*\^\s*(\d+)
        \s*\+\s*(\d+)\s*\^\s*(\d+)$""",
    re.VERBOSE,
)


def parse_shape(text: str) -> NetworkShape:
    """Parse ``(N_R x N_T, d)^K + N_X^M`` shorthand, e.g. ``(2x2,1)^4+2^4``."""
    match = _SHAPE_RE.match(text.strip())
    if match is None:
        raise ValueError(f"cannot parse network shape {text!r}")
    n_rx, n_tx, d, big_k, n_relay, big_m = (int(g) for g in match.groups())
    if big_k < 1 or big_m < 1:
        raise ValueError("K and M must be >= 1")
    return NetworkShape(n_rx=n_rx, n_tx=n_tx, d=d, K=big_k, n_relay=n_relay, M=big_m)


def symmetric_config(
    shape: str | NetworkShape,
    p_tx: float = 1.0,
    p_relay: float | None = None,
    p_relay_sum: float | None = None,
    sigma2: float = 1.0,
) -> SystemConfig:
    """Build a symmetric SystemConfig from shorthand plus budgets.

    Defaults follow the usual normalization: per-relay budget equals the
    transmit budget and the relay sum budget is M times that.
    """
    if isinstance(shape, str):
        shape = parse_shape(shape)
    if p_relay is None:
        p_relay = p_tx
    if p_relay_sum is None:
        p_relay_sum = shape.M * p_relay
    return SystemConfig(
        n_tx=[shape.n_tx] * shape.K,
        n_rx=[shape.n_rx] * shape.K,
        n_relay=[shape.n_relay] * shape.M,
        d=[shape.d] * shape.K,
        p_tx_max=[float(p_tx)] * shape.K,
        p_relay_max=[float(p_relay)] * shape.M,
        p_relay_sum_max=float(p_relay_sum),
        sigma2_relay=[float(sigma2)] * shape.M,
        sigma2_rx=[float(sigma2)] * shape.K,
    )


@dataclass
class StoppingRule:
    """Iteration budget and relative-change tolerance for the alternating runs."""

    max_iter: int = 500   # one variable update per iteration
    tol: float = 1e-6     # relative objective change over a full sweep

    def __post_init__(self) -> None:
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
