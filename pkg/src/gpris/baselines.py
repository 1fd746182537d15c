"""Reference schemes: regularized zero-forcing precoding and random phases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import PhaseShifts, Precoder, exact_unit_modulus

PRECODER_KINDS = ("rzf", "gpi")
PHASE_KINDS = ("random", "gpi_regularized")


@dataclass(frozen=True)
class BaselineSpec:
    precoder_kind: str = "rzf"
    phase_kind: str = "random"
    rzf_regularizer: float = 1.0

    def __post_init__(self):
        if self.precoder_kind not in PRECODER_KINDS:
            raise ValueError(f"unknown precoder kind {self.precoder_kind!r}")
        if self.phase_kind not in PHASE_KINDS:
            raise ValueError(f"unknown phase kind {self.phase_kind!r}")
        if self.rzf_regularizer <= 0:
            raise ValueError("rzf_regularizer must be > 0")


def rzf_regularizer(k: int, noise_over_p: float) -> float:
    """MMSE-style loading K * sigma^2 / P for the sum-power constraint."""
    return k * noise_over_p


def rzf_precoder(h_hat: np.ndarray, reg: float) -> Precoder:
    """F proportional to (H H^H + reg I)^-1 H, scaled to unit total power.

    ``h_hat`` holds the K estimated effective channels as rows (K, N).
    """
    if reg <= 0:
        raise ValueError("reg must be > 0")
    h = np.asarray(h_hat, dtype=complex).T  # N x K, columns are channels
    n = h.shape[0]
    f = np.linalg.solve(h @ h.conj().T + reg * np.eye(n), h)
    f = f / np.linalg.norm(f)
    return Precoder(f)


def random_phases(l: int, m: int, rng: np.random.Generator) -> PhaseShifts:
    """Each element e^{j theta} with theta uniform on [0, 2 pi)."""
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(l, m))
    return PhaseShifts(exact_unit_modulus(theta), projected=True)
