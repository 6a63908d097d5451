"""Vectorized NumPy implementation of the face kernels.

Mirrors ``_kernels.pyx`` exactly; used when the compiled module is missing
or ``CROSSDIFF_PURE_PYTHON`` is set.  Face-major arrays: ``uK``/``uL`` have
shape ``(n_faces, n_species)``.
"""
import numpy as np

# switch points between closed forms and Taylor series, in r = ln(a/b)
LOGMEAN_SERIES = 1e-3
GRAD_SERIES = 1e-2


def _log_ratio(a, b):
    # log1p keeps full accuracy when a and b are close
    q = a / b
    close = (q > 0.5) & (q < 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(close, np.log1p((a - b) / b), np.log(a) - np.log(b))


def log_mean(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    out = np.zeros(a.shape)
    pos = (a > 0) & (b > 0)
    if not np.any(pos):
        return out
    ap, bp = a[pos], b[pos]
    r = _log_ratio(ap, bp)
    small = np.abs(r) < LOGMEAN_SERIES
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (ap - bp) / r
    series = bp * (1 + r * (1 / 2 + r * (1 / 6 + r * (1 / 24 + r / 120))))
    out[pos] = np.where(small, series, direct)
    return out


def log_mean_grad(a, b):
    """Partial derivative of the logarithmic mean w.r.t. its first argument."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    out = np.zeros(a.shape)
    pos = (a > 0) & (b > 0)
    if not np.any(pos):
        return out
    ap, bp = a[pos], b[pos]
    r = _log_ratio(ap, bp)
    small = np.abs(r) < GRAD_SERIES
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (r - 1 + bp / ap) / (r * r)
    series = 1 / 2 + r * (-1 / 6 + r * (1 / 24 + r * (-1 / 120 + r * (1 / 720 - r / 5040))))
    out[pos] = np.where(small, series, direct)
    return out


def edge_values(uK, uL, safeguard):
    """Log-mean edge concentrations, optionally normalized by max(1, sum)."""
    ue = log_mean(uK, uL)
    if safeguard:
        s = ue.sum(axis=1)
        ue = ue / np.maximum(1.0, s)[:, None]
    return ue


def face_fluxes(uK, uL, tau, B, astar, safeguard):
    """Owner-oriented fluxes F_{i,K sigma} on interior faces."""
    ue = edge_values(uK, uL, safeguard)
    du = uL - uK
    bu = ue @ B.T
    bd = du @ B.T
    return -tau[:, None] * ((astar + bu) * du - ue * bd)


def face_blocks(uK, uL, tau, B, astar, safeguard):
    """Fluxes and their derivatives w.r.t. owner and neighbour states.

    Returns ``flux, dK, dL`` with ``dK[f, i, m] = dF_i / du_{m,K}``.
    """
    nf, n = uK.shape
    raw = log_mean(uK, uL)
    gK = log_mean_grad(uK, uL)
    gL = log_mean_grad(uL, uK)
    s = raw.sum(axis=1)
    over = safeguard & (s > 1.0)
    scale = np.where(over, s, 1.0)
    ue = raw / scale[:, None]

    du = uL - uK
    bu = ue @ B.T
    bd = du @ B.T
    t = tau[:, None]
    flux = -t * ((astar + bu) * du - ue * bd)

    eye = np.eye(n)
    # dF_i / d(du_m)
    d_du = -tau[:, None, None] * ((astar + bu)[:, :, None] * eye - ue[:, :, None] * B[None])
    # dF_i / d(ue_k)
    d_ue = -tau[:, None, None] * (du[:, :, None] * B[None] - bd[:, :, None] * eye)
    # chain through the normalization where it is active
    if np.any(over):
        inv = 1.0 / scale
        norm = eye[None] * inv[:, None, None] - (raw * inv[:, None] ** 2)[:, :, None]
        norm[~over] = eye
        d_ue = np.einsum("fik,fkm->fim", d_ue, norm)
    dK = -d_du + d_ue * gK[:, None, :]
    dL = d_du + d_ue * gL[:, None, :]
    return flux, dK, dL
