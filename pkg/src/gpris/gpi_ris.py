"""Regularized generalized power iteration for the RIS phase shifts.

The relaxed unit-norm vector w carries all L*M elements; per-user quadratics
C_k / D_k are block diagonal over RISs, and the max-minus-min modulus penalty
is smoothed with LogSumExp so its gradient contributes diagonal softmax /
softmin weight matrices to the fixed-point pair.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from math import log

import numpy as np
from scipy.special import logsumexp, softmax

from . import _kernel
from .channel import ChannelEstimate
from .gpi_precoder import GpiSettings
from .metrics import PhaseShifts, Precoder, theta_matrices


@dataclass(frozen=True)
class RegularizerSettings:
    """Penalty weight mu with its normalizers and LogSumExp sharpness knobs."""

    mu: float = 0.0
    tau: float = 1.0
    r_sigma: float = 1.0
    alpha1: float = 2.0
    alpha2: float = 2.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        for name in ("tau", "r_sigma", "alpha1", "alpha2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def default_tau(l: int, m: int) -> float:
    return 1.0 / (l * m)


@dataclass
class RisQuadratics:
    """Blockwise C_k / D_k plus the precoder Gram matrices.

    c_blocks[k, l] = Upsilon_{k,l} + Theta_{k,l} and d_blocks[k, l] =
    Upsilon-bar_{k,l} + Theta_{k,l} (both before the sigma^2/P shift),
    with Upsilon_{k,l} = LM * Hhat^H Q Hhat using the l-matched estimate.
    """

    c_blocks: np.ndarray     # (K, L, M, M)
    d_blocks: np.ndarray     # (K, L, M, M)
    q_mat: np.ndarray        # (N, N)
    qbar_mats: np.ndarray    # (K, N, N)
    noise_over_p: float
    u_vecs: np.ndarray | None = None  # (K, L, M), C_k - D_k == u_k u_k^H

    @property
    def k(self) -> int:
        return self.c_blocks.shape[0]

    @property
    def l(self) -> int:
        return self.c_blocks.shape[1]

    @property
    def m(self) -> int:
        return self.c_blocks.shape[2]

    def quad_forms(self, w_blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(w^H C_k w, w^H D_k w) for all k; w_blocks is (L, M)."""
        power = float(np.sum(np.abs(w_blocks) ** 2))
        qc = np.einsum("la,klab,lb->k", w_blocks.conj(), self.c_blocks,
                       w_blocks).real + self.noise_over_p * power
        qd = np.einsum("la,klab,lb->k", w_blocks.conj(), self.d_blocks,
                       w_blocks).real + self.noise_over_p * power
        return qc, qd

    def dense_matrix(self, k: int, numerator: bool) -> np.ndarray:
        """Dense LM x LM C_k (numerator=True) or D_k (test oracle)."""
        blocks = self.c_blocks[k] if numerator else self.d_blocks[k]
        lm = self.l * self.m
        out = np.zeros((lm, lm), dtype=complex)
        for li in range(self.l):
            s = slice(li * self.m, (li + 1) * self.m)
            out[s, s] = blocks[li]
        return out + self.noise_over_p * np.eye(lm)


def build_ris_quadratics(est: ChannelEstimate, precoder: Precoder,
                         noise_over_p: float) -> RisQuadratics:
    n, k, l, m = est.dims
    f = precoder.matrix
    q_mat = f @ f.conj().T
    qbar = q_mat[None, :, :] - np.einsum("nk,mk->knm", f, f.conj())
    lm = l * m
    h = est.cascaded_est  # (K, L, N, M)
    upsilon = lm * np.einsum("klan,ab,klbm->klnm", h.conj(), q_mat, h)
    upsilon_bar = lm * np.einsum("klan,kab,klbm->klnm", h.conj(), qbar, h)
    # theta_matrices is the quadratic for the unit-modulus phases phi; the
    # relaxed vector satisfies phi = sqrt(LM) w, so the same LM factor that
    # scales Upsilon applies to the error term as well
    theta = lm * theta_matrices(est, precoder)
    # signal-column factors: C_k - D_k = LM (Hhat^H f_k)(Hhat^H f_k)^H
    u_vecs = np.sqrt(lm) * np.einsum("klam,ak->klm", h.conj(), f)
    return RisQuadratics(c_blocks=upsilon + theta, d_blocks=upsilon_bar + theta,
                         q_mat=q_mat, qbar_mats=qbar, noise_over_p=noise_over_p,
                         u_vecs=u_vecs)


def penalty_quadratic(w: np.ndarray, i: int) -> float:
    """|w_i|^2 == w^H X_i w without materializing the selector matrix (0-based i)."""
    if not 0 <= i < w.size:
        raise IndexError(f"index {i} out of range for length {w.size}")
    return float(np.abs(w[i]) ** 2)


def smooth_max(values, alpha: float) -> float:
    """LogSumExp upper surrogate (1/alpha) ln sum exp(alpha x_i); >= max."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty value list")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return float(logsumexp(alpha * values) / alpha)


def smooth_min(values, alpha: float) -> float:
    """LogSumExp lower surrogate -alpha ln sum exp(-x_i/alpha); <= min."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty value list")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return float(-alpha * logsumexp(values / (-alpha)))


def penalty_weights(w: np.ndarray, reg: RegularizerSettings
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Simplex weight vectors (softmax over alpha1*|w_i|^2, softmin over |w_i|^2/alpha2)."""
    x = np.abs(w) ** 2
    return softmax(reg.alpha1 * x), softmax(-x / reg.alpha2)


def log2_lambda_ris(q: RisQuadratics, reg: RegularizerSettings,
                    w: np.ndarray) -> float:
    """Smoothed regularized objective log2 lambda_RIS(w), evaluated in log domain."""
    w_blocks = np.asarray(w, dtype=complex).reshape((q.l, q.m))
    qc, qd = q.quad_forms(w_blocks)
    if np.any(qc <= 0) or np.any(qd <= 0):
        raise FloatingPointError("nonpositive quadratic form")
    x = np.abs(w) ** 2
    ratio_term = float(np.sum(np.log2(qc / qd))) / reg.r_sigma
    penalty = (reg.mu / reg.tau) * (smooth_max(x, reg.alpha1)
                                    - smooth_min(x, reg.alpha2))
    return ratio_term - penalty


def lambda_ris(q: RisQuadratics, reg: RegularizerSettings, w: np.ndarray) -> float:
    if abs(np.linalg.norm(w) - 1.0) > 1e-6:
        raise ValueError("w must be unit norm")
    return float(2.0 ** log2_lambda_ris(q, reg, w))


def ris_gpi_matrices(q: RisQuadratics, reg: RegularizerSettings, w: np.ndarray
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-point pair (Cbar, Dbar) as stacked (L, M, M) blocks.

    Cbar = sum_k C_k/(w^H C_k w) / (R_sigma ln 2) + (mu/tau) diag(softmin),
    Dbar = sum_k D_k/(w^H D_k w) / (R_sigma ln 2) + (mu/tau) diag(softmax).

    The objective value lambda_RIS scales Cbar in the underlying fixed-point
    map, but it cancels from the normalized step and from the normalized
    residual ||Dbar^-1 (lam Cbar) w - lam w|| / lam == ||Dbar^-1 Cbar w - w||,
    so it is left out here.  For large mu it underflows a float64 anyway
    (its log is proportional to -mu/tau); use log2_lambda_ris to inspect it.
    """
    w = np.asarray(w, dtype=complex)
    if np.linalg.norm(w) == 0:
        raise ValueError("w must be nonzero")
    w_blocks = w.reshape((q.l, q.m))
    qc, qd = q.quad_forms(w_blocks)
    if np.any(qc <= 0) or np.any(qd <= 0):
        raise FloatingPointError("nonpositive quadratic form")
    scale = 1.0 / (reg.r_sigma * log(2))
    eye = np.eye(q.m)
    cbar = scale * (np.einsum("k,klab->lab", 1.0 / qc, q.c_blocks)
                    + q.noise_over_p * np.sum(1.0 / qc) * eye[None])
    dbar = scale * (np.einsum("k,klab->lab", 1.0 / qd, q.d_blocks)
                    + q.noise_over_p * np.sum(1.0 / qd) * eye[None])
    if reg.mu > 0:
        wmax, wmin = penalty_weights(w, reg)
        idx = np.arange(q.m)
        factor = reg.mu / reg.tau
        cbar[:, idx, idx] += factor * wmin.reshape((q.l, q.m))
        dbar[:, idx, idx] += factor * wmax.reshape((q.l, q.m))
    return cbar, dbar


@dataclass
class RisGpiResult:
    w: np.ndarray                # relaxed unit-norm solution
    phases: PhaseShifts          # projected, all moduli exactly 1
    iterations: int
    residual: float              # fixed-point residual at exit
    nmse: float                  # unit-modulus deviation of the relaxed w
    loop_seconds: float = 0.0    # wall time of the iteration loop body


def _signal_columns(c_blocks: np.ndarray, d_blocks: np.ndarray) -> np.ndarray:
    """Factor the rank-one PSD difference C_k - D_k = u u^H per block."""
    diff = c_blocks - d_blocks
    k, l, m, _ = diff.shape
    u = np.zeros((k, l, m), dtype=np.complex128)
    for ki in range(k):
        for li in range(l):
            d = diff[ki, li].diagonal().real
            j = int(np.argmax(d))
            if d[j] > 0:
                u[ki, li] = diff[ki, li, :, j] / np.sqrt(d[j])
    return u


def run_gpi_ris(q: RisQuadratics, reg: RegularizerSettings, w_init: np.ndarray,
                settings: GpiSettings, backend: str = "auto") -> RisGpiResult:
    """Iterate w <- Dbar^-1 Cbar w with normalization, then project phases.

    backend: "auto" takes the compiled loop when numba is importable,
    "kernel" demands it, "numpy" forces the reference loop.
    """
    from .metrics import nmse_unit_modulus

    if backend not in ("auto", "kernel", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    w = np.asarray(w_init, dtype=complex)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise ValueError("initial w must be nonzero")
    w = w / norm
    use_kernel = backend == "kernel" or (backend == "auto" and _kernel.HAVE_NUMBA)
    if backend == "kernel" and not _kernel.HAVE_NUMBA:
        raise RuntimeError("compiled backend requested but numba is unavailable")

    if use_kernel:
        c_blocks = np.ascontiguousarray(q.c_blocks, dtype=np.complex128)
        d_blocks = np.ascontiguousarray(q.d_blocks, dtype=np.complex128)
        if q.u_vecs is not None:
            u_vecs = np.ascontiguousarray(q.u_vecs, dtype=np.complex128)
        else:  # recover the signal columns from the block difference
            u_vecs = _signal_columns(c_blocks, d_blocks)
        w0 = np.ascontiguousarray(w, dtype=np.complex128)
        prep = _kernel.prepare(c_blocks, d_blocks, u_vecs, w0)
        t0 = time.perf_counter()
        w, iters = _kernel.ris_loop(
            c_blocks, d_blocks, u_vecs, float(q.noise_over_p),
            1.0 / (reg.r_sigma * log(2)), float(reg.mu), float(reg.tau),
            float(reg.alpha1), float(reg.alpha2), w0,
            float(settings.tol), int(settings.max_iters), prep=prep)
        loop_seconds = time.perf_counter() - t0
        if iters < 0:
            raise np.linalg.LinAlgError("denominator block not positive definite")
    else:
        iters = 0
        t0 = time.perf_counter()
        for _ in range(settings.max_iters):
            iters += 1
            cbar, dbar = ris_gpi_matrices(q, reg, w)
            rhs = np.einsum("lab,lb->la", cbar, w.reshape((q.l, q.m)))
            w_new = np.linalg.solve(dbar, rhs[:, :, None])[:, :, 0].flatten()
            w_new = w_new / np.linalg.norm(w_new)
            step = np.linalg.norm(w_new - w)
            w = w_new
            if step <= settings.tol:
                break
        loop_seconds = time.perf_counter() - t0
    cbar, dbar = ris_gpi_matrices(q, reg, w)
    rhs = np.einsum("lab,lb->la", cbar, w.reshape((q.l, q.m)))
    image = np.linalg.solve(dbar, rhs[:, :, None])[:, :, 0].flatten()
    # lambda-free form of ||Dbar^-1 (lam Cbar) w - lam w|| / lam
    residual = float(np.linalg.norm(image - w))
    phases = PhaseShifts.from_normalized(w, q.l, q.m).project()
    return RisGpiResult(w=w, phases=phases, iterations=iters, residual=residual,
                        nmse=nmse_unit_modulus(w), loop_seconds=loop_seconds)
