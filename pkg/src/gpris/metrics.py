"""Spectral-efficiency metrics and the Jensen lower bound in both quadratic forms.

The bound's error term appears either as f_i^H Xi_k f_i (precoder-quadratic,
with Xi_k built from phase shifts) or as phi_l^H Theta_{k,l} phi_l
(phase-quadratic, with Theta built from the precoder through the commutation
matrix).  Both are contractions of the same NM x NM error covariance and agree
exactly; the reshape-based routines below avoid materializing Kronecker
products, and dense Kronecker references are kept for tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelEstimate, _cn_vector, _psd_factor


@dataclass
class Precoder:
    """K beamforming vectors as columns of an N x K matrix, total power <= 1."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.ndim != 2:
            raise ValueError("precoder must be an N x K matrix")
        if self.total_power > 1.0 + 1e-9:
            raise ValueError(f"total power {self.total_power} exceeds 1")

    @classmethod
    def from_stacked(cls, stacked: np.ndarray, n: int, k: int) -> "Precoder":
        return cls(np.asarray(stacked, dtype=complex).reshape((n, k), order="F"))

    @property
    def stacked(self) -> np.ndarray:
        """Column-stacked vector [f_1; ...; f_K] of length NK."""
        return self.matrix.flatten(order="F")

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))


@dataclass
class PhaseShifts:
    """Per-RIS phase vectors, shape (L, M); ``projected`` marks unit modulus."""

    per_ris: np.ndarray
    projected: bool = False

    def __post_init__(self):
        self.per_ris = np.asarray(self.per_ris, dtype=complex)
        if self.per_ris.ndim != 2:
            raise ValueError("per_ris must be (L, M)")
        if self.projected:
            if np.max(np.abs(np.abs(self.per_ris) - 1.0)) > 1e-12:
                raise ValueError("projected phase shifts must be unit modulus")

    @classmethod
    def from_stacked(cls, stacked: np.ndarray, l: int, m: int,
                     projected: bool = False) -> "PhaseShifts":
        return cls(np.asarray(stacked, dtype=complex).reshape((l, m)), projected)

    @classmethod
    def from_normalized(cls, w: np.ndarray, l: int, m: int) -> "PhaseShifts":
        """Undo the 1/sqrt(LM) normalization of a relaxed vector w."""
        return cls.from_stacked(np.sqrt(l * m) * np.asarray(w), l, m)

    @property
    def stacked(self) -> np.ndarray:
        return self.per_ris.flatten()

    @property
    def normalized(self) -> np.ndarray:
        """w = stacked / sqrt(LM); unit norm whenever projected."""
        l, m = self.per_ris.shape
        return self.stacked / np.sqrt(l * m)

    def project(self) -> "PhaseShifts":
        """Nearest unit-modulus configuration e^{j arg(.)}."""
        return PhaseShifts(exact_unit_modulus(np.angle(self.per_ris)),
                           projected=True)


def exact_unit_modulus(angles: np.ndarray) -> np.ndarray:
    """e^{j angle} with every modulus exactly 1.0 in float64.

    np.exp(1j*t) can land one ulp off the unit circle; renormalizing the
    stragglers by their own modulus pulls them onto it exactly.
    """
    z = np.exp(1j * np.asarray(angles, dtype=float))
    off = np.abs(z) != 1.0
    if not np.any(off):
        return z
    # for a float64 component pair a step of at most 2 ulps in each
    # coordinate always reaches a representable point with |.| == 1.0;
    # try the candidates in order of increasing perturbation
    shape = z.shape
    z = z.ravel()
    off = off.ravel()
    re, im = z.real.copy(), z.imag.copy()

    def _step(x, d):
        for _ in range(abs(d)):
            x = np.nextafter(x, np.inf if d > 0 else -np.inf)
        return x

    steps = sorted(((dr, di) for dr in range(-2, 3) for di in range(-2, 3)),
                   key=lambda s: (abs(s[0]) + abs(s[1]), s))
    for dr, di in steps[1:]:
        idx = np.flatnonzero(off)
        if idx.size == 0:
            break
        rr = _step(re[idx], dr)
        ii = _step(im[idx], di)
        good = np.abs(rr + 1j * ii) == 1.0
        sel = idx[good]
        re[sel] = rr[good]
        im[sel] = ii[good]
        off[sel] = False
    if np.any(off):
        raise FloatingPointError("could not renormalize phases to unit modulus")
    return (re + 1j * im).reshape(shape)


def effective_channels(cascaded: np.ndarray, phases: PhaseShifts) -> np.ndarray:
    """h_k = sum_l H^r_{k,l} phi_l for every user, shape (K, N)."""
    return np.einsum("klnm,lm->kn", cascaded, phases.per_ris)


def _sum_se_from_channels(h: np.ndarray, f: np.ndarray, extra_noise: np.ndarray,
                          noise_over_p: float) -> float:
    """Sum of log2(1 + SINR_k); h is (K, N), f is (N, K), extra_noise is (K,)."""
    g = np.abs(h.conj() @ f) ** 2  # g[k, i] = |h_k^H f_i|^2
    signal = np.diag(g)
    interference = g.sum(axis=1) - signal
    sinr = signal / (interference + extra_noise + noise_over_p)
    return float(np.sum(np.log2(1.0 + sinr)))


def exact_sum_se(cascaded: np.ndarray, precoder: Precoder, phases: PhaseShifts,
                 noise_over_p: float) -> float:
    """Sum SE on the given (true or estimated) cascaded channels."""
    h = effective_channels(cascaded, phases)
    k = h.shape[0]
    return _sum_se_from_channels(h, precoder.matrix, np.zeros(k), noise_over_p)


def xi_matrices(est: ChannelEstimate, phases: PhaseShifts) -> np.ndarray:
    """Xi_k = sum_l (phi_l^T kron I_N) R^e_{k,l} (phi_l^T kron I_N)^H, shape (K, N, N)."""
    n, k, l, m = est.dims
    phi = phases.per_ris
    if est.is_isotropic:
        scale = np.einsum("kl,l->k", est.err_scale, np.sum(np.abs(phi) ** 2, axis=1))
        return scale[:, None, None] * np.eye(n)[None, :, :]
    xi = np.zeros((k, n, n), dtype=complex)
    for ki in range(k):
        for li in range(l):
            r4 = est.err_dense[ki][li].reshape(m, n, m, n)
            xi[ki] += np.einsum("a,anbp,b->np", phi[li], r4, phi[li].conj())
    return xi


def theta_matrices(est: ChannelEstimate, precoder: Precoder) -> np.ndarray:
    """Theta_{k,l} = sum_i (f_i^T kron I_M) P (R^e)^* P^T (...)^H, shape (K, L, M, M)."""
    n, k, l, m = est.dims
    f = precoder.matrix
    if est.is_isotropic:
        total_power = float(np.sum(np.abs(f) ** 2))
        return (est.err_scale * total_power)[:, :, None, None] * np.eye(m)[None, None]
    theta = np.zeros((k, l, m, m), dtype=complex)
    for ki in range(k):
        for li in range(l):
            r4c = est.err_dense[ki][li].conj().reshape(m, n, m, n)
            for i in range(f.shape[1]):
                theta[ki, li] += np.einsum("n,anbq,q->ab", f[:, i], r4c,
                                           f[:, i].conj())
    return theta


def lower_bound_sum_se(est: ChannelEstimate, precoder: Precoder,
                       phases: PhaseShifts, noise_over_p: float) -> float:
    """Jensen lower bound on the sum instantaneous SE, precoder-quadratic form."""
    h_hat = effective_channels(est.cascaded_est, phases)
    xi = xi_matrices(est, phases)
    f = precoder.matrix
    extra = np.einsum("ni,knm,mi->k", f.conj(), xi, f).real
    return _sum_se_from_channels(h_hat, f, extra, noise_over_p)


def lower_bound_phase_form(est: ChannelEstimate, precoder: Precoder,
                           phases: PhaseShifts, noise_over_p: float) -> float:
    """Same bound via the phase-quadratic Theta form; equals the Xi form."""
    h_hat = effective_channels(est.cascaded_est, phases)
    theta = theta_matrices(est, precoder)
    phi = phases.per_ris
    extra = np.einsum("la,klab,lb->k", phi.conj(), theta, phi).real
    return _sum_se_from_channels(h_hat, precoder.matrix, extra, noise_over_p)


def commutation_matrix(n: int, m: int) -> np.ndarray:
    """0/1 matrix P with P vec(E) = vec(E^T) for every n x m matrix E.

    Column-major vectorization: vec(E)[i + n*j] = E[i, j].
    """
    if n < 1 or m < 1:
        raise ValueError("dimensions must be >= 1")
    p = np.zeros((n * m, n * m))
    for i in range(n):
        for j in range(m):
            p[j + m * i, i + n * j] = 1.0
    return p


def xi_dense_reference(err_cov: np.ndarray, phi: np.ndarray, n: int) -> np.ndarray:
    """Dense-Kronecker Xi contribution of one (k, l) link (test oracle)."""
    sel = np.kron(phi[np.newaxis, :], np.eye(n))  # phi^T kron I_N, N x NM
    return sel @ err_cov @ sel.conj().T


def theta_dense_reference(err_cov: np.ndarray, f: np.ndarray, m: int) -> np.ndarray:
    """Dense-Kronecker Theta contribution of one (k, l) link and all users."""
    n = f.shape[0]
    p = commutation_matrix(n, m)
    mid = p @ err_cov.conj() @ p.T
    theta = np.zeros((m, m), dtype=complex)
    for i in range(f.shape[1]):
        sel = np.kron(f[:, i][np.newaxis, :], np.eye(m))  # f_i^T kron I_M
        theta += sel @ mid @ sel.conj().T
    return theta


def nmse_unit_modulus(w: np.ndarray) -> float:
    """||sqrt(LM)|w| - 1||^2 / LM: distance of a relaxed vector from unit modulus."""
    w = np.asarray(w)
    if np.all(w == 0):
        raise ValueError("zero vector has no modulus profile")
    lm = w.size
    dev = np.sqrt(lm) * np.abs(w) - 1.0
    return float(np.sum(dev**2) / lm)


def mc_instantaneous_se(est: ChannelEstimate, precoder: Precoder,
                        phases: PhaseShifts, noise_over_p: float,
                        n_draws: int, rng: np.random.Generator
                        ) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the SE over error draws.

    Each draw evaluates the exact sum SE on H^r = hat(H)^r + E with
    E ~ CN(0, R^e) per link.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    n, k, l, m = est.dims
    f = precoder.matrix
    phi = phases.per_ris
    values = np.empty(n_draws)
    if est.is_isotropic:
        std = np.sqrt(np.maximum(est.err_scale, 0.0))
        batch = max(1, min(n_draws, int(2e6 / max(k * l * n * m, 1))))
        done = 0
        while done < n_draws:
            b = min(batch, n_draws - done)
            e = std[None, :, :, None, None] * _cn_vector((b, k, l, n, m), rng)
            h = np.einsum("dklnm,lm->dkn", est.cascaded_est[None] + e, phi)
            g = np.abs(np.einsum("dkn,ni->dki", h.conj(), f)) ** 2
            sig = np.einsum("dkk->dk", g)
            interf = g.sum(axis=2) - sig
            values[done:done + b] = np.log2(1 + sig / (interf + noise_over_p)).sum(axis=1)
            done += b
    else:
        chols = [[_psd_factor(est.err_dense[ki][li]) for li in range(l)]
                 for ki in range(k)]
        for d in range(n_draws):
            h_true = est.cascaded_est.copy()
            for ki in range(k):
                for li in range(l):
                    e_vec = chols[ki][li] @ _cn_vector(n * m, rng)
                    h_true[ki, li] += e_vec.reshape((n, m), order="F")
            ph = PhaseShifts(phi)
            values[d] = exact_sum_se(h_true, precoder, ph, noise_over_p)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else 0.0
    return mean, stderr
