"""BPSK over AWGN and channel log-likelihood ratios.

LLR convention throughout the package: ``ln(P(bit=1) / P(bit=0))``, so a
positive value hard-decides to 1.  Bit 0 maps to the +1 symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

LLR_MAX = 30.0


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    rate: float = 0.5
    noiseless: bool = False

    @property
    def sigma(self) -> float:
        if self.noiseless:
            return 0.0
        return float(np.sqrt(1.0 / (2.0 * self.rate * 10.0 ** (self.ebn0_db / 10.0))))


def modulate(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def demodulate(symbols) -> np.ndarray:
    return (np.asarray(symbols) < 0).astype(np.uint8)


def awgn(symbols, params: ChannelParams, rng) -> np.ndarray:
    """Add white Gaussian noise; ``rng`` is a seed or a numpy Generator."""
    symbols = np.asarray(symbols, dtype=np.float64)
    if params.noiseless:
        return symbols.copy()
    rng = np.random.default_rng(rng)
    return symbols + params.sigma * rng.standard_normal(symbols.shape)


def channel_llr(y, params: ChannelParams) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if params.noiseless:
        # infinitely reliable observations
        return np.where(y > 0, -LLR_MAX, np.where(y < 0, LLR_MAX, 0.0))
    return np.clip(-2.0 * y / params.sigma**2, -LLR_MAX, LLR_MAX)


def hard_decision(llr) -> np.ndarray:
    return (np.asarray(llr) > 0).astype(np.uint8)


def prob_to_llr(p1):
    p1 = np.asarray(p1, dtype=np.float64)
    return np.log(p1) - np.log1p(-p1)


def llr_to_prob(llr):
    """P(bit=1) for the given LLR."""
    return expit(np.asarray(llr, dtype=np.float64))
