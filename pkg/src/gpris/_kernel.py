"""Compiled inner loop for the RIS-stage fixed-point iteration.

The plain numpy loop spends most of its time in per-call overhead once the
per-RIS blocks are small, which hides the L * (M_tot/L)^3 scaling of the
block solves.  This kernel runs the whole loop in one compiled call, batches
the L independent blocks along the innermost axis (struct-of-arrays, real
and imaginary parts split), and keeps every inner loop free of cross-lane
reductions so it vectorizes without reassociation.  Falls back gracefully:
callers must check HAVE_NUMBA before using it.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap

_FAST = {"error_model": "numpy", "boundscheck": False, "fastmath": False}


@njit(**_FAST)
def _ris_loop_soa(cr, ci, dr, di, ur, ui, noise_over_p, inv_rs_ln2, mu, tau,
                  alpha1, alpha2, wr, wi, tol, max_iters):
    """Iterate w <- normalize(Dbar^-1 Cbar w) on split re/im storage.

    cr/ci and dr/di are (K, M, M, L) stacks of the per-user per-RIS C_k and
    D_k blocks with the RIS index innermost; ur/ui is the (K, M, L) stack of
    signal columns with C_k - D_k = u_k u_k^H, so the D quadratic form is a
    rank-one correction of the C one.  wr/wi hold the (M, L) unit-norm
    iterate and are updated in place.  Mirrors gpi_ris.ris_gpi_matrices.
    A negative return flags a non-positive-definite denominator block.
    """
    k_users, m, _, l_ris = cr.shape
    n_tot = l_ris * m
    iqc = np.empty(k_users)
    iqd = np.empty(k_users)
    ycr = np.empty((k_users, m, l_ris))
    yci = np.empty((k_users, m, l_ris))
    cwr = np.empty((m, l_ris))
    cwi = np.empty((m, l_ris))
    dbr = np.empty((m, m, l_ris))
    dbi = np.empty((m, m, l_ris))
    sr = np.empty(l_ris)
    si = np.empty(l_ris)
    tr = np.empty(l_ris)
    ti = np.empty(l_ris)
    exp_c = np.empty((m, l_ris))
    exp_d = np.empty((m, l_ris))
    iters = 0
    for _ in range(max_iters):
        iters += 1
        # block matvecs y = C_k w reused for both the quadratic forms and
        # the Cbar image (Cbar itself is never assembled); w^H D_k w is the
        # rank-one correction w^H C_k w - |u_k^H w|^2
        for kk in range(k_users):
            for ll in range(l_ris):
                sr[ll] = 0.0      # running Re(w^H C_k w) per block
                tr[ll] = 0.0      # Re/Im of u_k^H w per block
                ti[ll] = 0.0
            for a in range(m):
                yr = ycr[kk, a]
                yi = yci[kk, a]
                for ll in range(l_ris):
                    yr[ll] = 0.0
                    yi[ll] = 0.0
                for b in range(m):
                    crv = cr[kk, a, b]
                    civ = ci[kk, a, b]
                    wrb = wr[b]
                    wib = wi[b]
                    for ll in range(l_ris):
                        yr[ll] += crv[ll] * wrb[ll] - civ[ll] * wib[ll]
                        yi[ll] += crv[ll] * wib[ll] + civ[ll] * wrb[ll]
                urv = ur[kk, a]
                uiv = ui[kk, a]
                for ll in range(l_ris):
                    sr[ll] += wr[a, ll] * yr[ll] + wi[a, ll] * yi[ll]
                    tr[ll] += urv[ll] * wr[a, ll] + uiv[ll] * wi[a, ll]
                    ti[ll] += urv[ll] * wi[a, ll] - uiv[ll] * wr[a, ll]
            acc_c = 0.0
            acc_u = 0.0
            for ll in range(l_ris):
                acc_c += sr[ll]
                acc_u += tr[ll] ** 2 + ti[ll] ** 2
            iqc[kk] = 1.0 / (acc_c + noise_over_p)
            iqd[kk] = 1.0 / (acc_c - acc_u + noise_over_p)
        sum_inv_c = 0.0
        sum_inv_d = 0.0
        for kk in range(k_users):
            sum_inv_c += iqc[kk]
            sum_inv_d += iqd[kk]
        # penalty softmax(-|w_i|^2 / alpha2) and softmax(alpha1 |w_i|^2)
        pen_c = 0.0
        pen_d = 0.0
        if mu > 0.0:
            xmax = -1.0e300
            xmin = 1.0e300
            for a in range(m):
                for ll in range(l_ris):
                    xi = wr[a, ll] ** 2 + wi[a, ll] ** 2
                    if xi > xmax:
                        xmax = xi
                    if xi < xmin:
                        xmin = xi
            zc = 0.0
            zd = 0.0
            for a in range(m):
                for ll in range(l_ris):
                    xi = wr[a, ll] ** 2 + wi[a, ll] ** 2
                    ec = np.exp(-(xi - xmin) / alpha2)
                    ed = np.exp(alpha1 * (xi - xmax))
                    exp_c[a, ll] = ec
                    exp_d[a, ll] = ed
                    zc += ec
                    zd += ed
            pen_c = mu / (tau * zc)
            pen_d = mu / (tau * zd)
        diag_c = inv_rs_ln2 * noise_over_p * sum_inv_c
        diag_d = inv_rs_ln2 * noise_over_p * sum_inv_d
        # image (Cbar w) from the cached matvecs, penalty folded in
        for a in range(m):
            for ll in range(l_ris):
                sr[ll] = 0.0
                si[ll] = 0.0
            for kk in range(k_users):
                yr = ycr[kk, a]
                yi = yci[kk, a]
                q = iqc[kk]
                for ll in range(l_ris):
                    sr[ll] += yr[ll] * q
                    si[ll] += yi[ll] * q
            for ll in range(l_ris):
                extra = diag_c
                if mu > 0.0:
                    extra += pen_c * exp_c[a, ll]
                cwr[a, ll] = inv_rs_ln2 * sr[ll] + extra * wr[a, ll]
                cwi[a, ll] = inv_rs_ln2 * si[ll] + extra * wi[a, ll]
        # Dbar blocks, assembled batched for the solve
        for a in range(m):
            for b in range(m):
                br = dbr[a, b]
                bi = dbi[a, b]
                for ll in range(l_ris):
                    br[ll] = 0.0
                    bi[ll] = 0.0
                for kk in range(k_users):
                    drv = dr[kk, a, b]
                    div = di[kk, a, b]
                    q = iqd[kk]
                    for ll in range(l_ris):
                        br[ll] += drv[ll] * q
                        bi[ll] += div[ll] * q
                for ll in range(l_ris):
                    br[ll] *= inv_rs_ln2
                    bi[ll] *= inv_rs_ln2
            for ll in range(l_ris):
                extra = diag_d
                if mu > 0.0:
                    extra += pen_d * exp_d[a, ll]
                dbr[a, a, ll] += extra
        # batched in-place lower Cholesky of all L blocks at once
        for j in range(m):
            for ll in range(l_ris):
                sr[ll] = dbr[j, j, ll]
            for p in range(j):
                jr = dbr[j, p]
                ji = dbi[j, p]
                for ll in range(l_ris):
                    sr[ll] -= jr[ll] ** 2 + ji[ll] ** 2
            for ll in range(l_ris):
                if sr[ll] <= 0.0:
                    return -iters
                sr[ll] = np.sqrt(sr[ll])
                dbr[j, j, ll] = sr[ll]
                si[ll] = 1.0 / sr[ll]
            for i in range(j + 1, m):
                av = dbr[i, j]
                bv = dbi[i, j]
                for ll in range(l_ris):
                    tr[ll] = av[ll]
                    ti[ll] = bv[ll]
                for p in range(j):
                    ir = dbr[i, p]
                    ii = dbi[i, p]
                    jr = dbr[j, p]
                    ji = dbi[j, p]
                    # acc -= a[i,p] * conj(a[j,p])
                    for ll in range(l_ris):
                        tr[ll] -= ir[ll] * jr[ll] + ii[ll] * ji[ll]
                        ti[ll] -= ii[ll] * jr[ll] - ir[ll] * ji[ll]
                for ll in range(l_ris):
                    av[ll] = tr[ll] * si[ll]
                    bv[ll] = ti[ll] * si[ll]
        # forward substitution L y = Cbar w
        for i in range(m):
            for ll in range(l_ris):
                tr[ll] = cwr[i, ll]
                ti[ll] = cwi[i, ll]
            for p in range(i):
                ir = dbr[i, p]
                ii = dbi[i, p]
                for ll in range(l_ris):
                    tr[ll] -= ir[ll] * cwr[p, ll] - ii[ll] * cwi[p, ll]
                    ti[ll] -= ir[ll] * cwi[p, ll] + ii[ll] * cwr[p, ll]
            for ll in range(l_ris):
                inv = 1.0 / dbr[i, i, ll]
                cwr[i, ll] = tr[ll] * inv
                cwi[i, ll] = ti[ll] * inv
        # backward substitution L^H z = y
        for i in range(m - 1, -1, -1):
            for ll in range(l_ris):
                tr[ll] = cwr[i, ll]
                ti[ll] = cwi[i, ll]
            for p in range(i + 1, m):
                pr = dbr[p, i]
                pi = dbi[p, i]
                # acc -= conj(a[p,i]) * z[p]
                for ll in range(l_ris):
                    tr[ll] -= pr[ll] * cwr[p, ll] + pi[ll] * cwi[p, ll]
                    ti[ll] -= pr[ll] * cwi[p, ll] - pi[ll] * cwr[p, ll]
            for ll in range(l_ris):
                inv = 1.0 / dbr[i, i, ll]
                cwr[i, ll] = tr[ll] * inv
                cwi[i, ll] = ti[ll] * inv
        nrm = 0.0
        for a in range(m):
            for ll in range(l_ris):
                nrm += cwr[a, ll] ** 2 + cwi[a, ll] ** 2
        inv_nrm = 1.0 / np.sqrt(nrm)
        step = 0.0
        for a in range(m):
            for ll in range(l_ris):
                vr = cwr[a, ll] * inv_nrm
                vi = cwi[a, ll] * inv_nrm
                step += (vr - wr[a, ll]) ** 2 + (vi - wi[a, ll]) ** 2
                wr[a, ll] = vr
                wi[a, ll] = vi
        if np.sqrt(step) <= tol:
            break
    return iters


def prepare(c_blocks, d_blocks, u_vecs, w0):
    """Repack (K, L, M, M) complex stacks into the kernel's batched layout.

    The kernel wants the RIS index innermost with real and imaginary parts
    split, so its inner loops run over independent blocks.  This is
    iteration-independent, so callers can keep it outside timed regions.
    """
    def soa(x, axes):
        t = np.transpose(x, axes)
        return np.ascontiguousarray(t.real), np.ascontiguousarray(t.imag)

    l_ris, m = c_blocks.shape[1], c_blocks.shape[2]
    cr, ci = soa(c_blocks, (0, 2, 3, 1))
    dr, di = soa(d_blocks, (0, 2, 3, 1))
    ur, ui = soa(u_vecs, (0, 2, 1))
    wt = np.transpose(np.asarray(w0).reshape(l_ris, m))
    wr = np.ascontiguousarray(wt.real)
    wi = np.ascontiguousarray(wt.imag)
    return cr, ci, dr, di, ur, ui, wr, wi


def ris_loop(c_blocks, d_blocks, u_vecs, noise_over_p, inv_rs_ln2, mu, tau,
             alpha1, alpha2, w0, tol, max_iters, prep=None):
    """Run the compiled iteration; returns (w, iterations).

    c_blocks / d_blocks are (K, L, M, M) complex stacks, u_vecs the (K, L, M)
    signal columns and w0 a unit-norm (L*M,) complex vector.  Pass a
    ``prepare(...)`` result as ``prep`` to keep the repacking cost out of
    timed sections.
    """
    k_users, l_ris, m, _ = c_blocks.shape
    if prep is None:
        prep = prepare(c_blocks, d_blocks, u_vecs, w0)
    cr, ci, dr, di, ur, ui, wr, wi = prep
    iters = _ris_loop_soa(cr, ci, dr, di, ur, ui, float(noise_over_p),
                          float(inv_rs_ln2), float(mu), float(tau),
                          float(alpha1), float(alpha2), wr, wi,
                          float(tol), int(max_iters))
    w = np.transpose(wr + 1j * wi).reshape(l_ris * m)
    return w, iters


def warm_up():
    """Compile the iteration on a tiny instance so timings exclude it."""
    if not HAVE_NUMBA:
        return
    rng = np.random.default_rng(0)
    blocks = np.zeros((1, 1, 2, 2), dtype=np.complex128)
    blocks[0, 0] = np.eye(2)
    w0 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    w0 = (w0 / np.linalg.norm(w0)).astype(np.complex128)
    u0 = np.zeros((1, 1, 2), dtype=np.complex128)
    ris_loop(blocks, blocks.copy(), u0, 0.1, 1.0, 1.0, 0.5, 2.0, 2.0, w0, 1e-3, 2)
