"""Multi-user SCMA decoding: iterative message passing plus the ML oracle.

Both decoders consume the received tensor y (N_T, R, N_R) and the per-ORE
channel h (R, N_u, N_R) and are vectorized over slots and antennas. AP
antennas decode independently; their final per-user beliefs are combined by
a product (log-domain sum) before the argmax.

sigma2 is the total complex noise variance (see transceiver). A sigma2 of
zero is guarded by an absolute floor of 1e-300; combined with the per-slot
max-rescaling of the likelihood exponent this degrades gracefully to hard
nearest-combination decisions instead of overflowing.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .scma import Codebook, factor_graph

__all__ = ["DecodeResult", "ml_decode", "mpa_decode", "ser"]

_SIGMA_FLOOR = 1e-300
_TINY = 1e-300
_ML_GUARD_BITS = 24


@dataclass
class DecodeResult:
    """Per-slot decoded symbol indices and (for MPA) per-user posteriors."""

    indices: np.ndarray  # (N_T, N_u)
    posteriors: np.ndarray | None = field(default=None, repr=False)  # (N_T, N_u, M)


def _check_inputs(y, h, cb):
    y = np.asarray(y, dtype=complex)
    if y.ndim == 2:
        y = y[None, :, :]
    if y.ndim != 3 or y.shape[1] != cb.n_ores:
        raise ValueError(f"received tensor shape {y.shape} inconsistent with codebook")
    h = np.asarray(h, dtype=complex)
    if h.shape != (cb.n_ores, cb.n_users, y.shape[2]):
        raise ValueError(f"channel shape {h.shape} inconsistent with y {y.shape}")
    return y, h


def ml_decode(y, h, cb: Codebook) -> DecodeResult:
    """Exhaustive joint maximum-likelihood decoding over all M^N_u combinations.

    Ties break toward the smallest joint combination index (user 0 most
    significant digit, base M).
    """
    y, h = _check_inputs(y, h, cb)
    n_u, m = cb.n_users, cb.m
    if n_u * np.log2(m) > _ML_GUARD_BITS:
        raise ValueError(
            f"M^N_u = {m}^{n_u} too large to enumerate (guard: {_ML_GUARD_BITS} bits)"
        )
    n_combos = m**n_u
    cols = np.stack(cb.matrices)  # (N_u, R, M)
    n_t, r_n = y.shape[0], y.shape[1] * y.shape[2]
    y_flat = y.reshape(n_t, r_n)
    y_pow = np.sum(np.abs(y_flat) ** 2, axis=1)[:, None]

    best_d2 = np.full(n_t, np.inf)
    best_idx = np.zeros(n_t, dtype=np.int64)
    chunk = 1 << 16
    for start in range(0, n_combos, chunk):
        idx = np.arange(start, min(start + chunk, n_combos))
        # digits of the combo index, user 0 most significant
        digits = (idx[None, :] // (m ** np.arange(n_u - 1, -1, -1))[:, None]) % m
        # noiseless mean per (combo, r, n): sum_u h[r,u,n] * C_u(m_u, r)
        cw = cols[np.arange(n_u)[:, None], :, digits]  # (N_u, C, R)
        mean = np.einsum("ucr,run->crn", cw, h).reshape(len(idx), r_n)
        d2 = (
            y_pow
            - 2 * np.real(y_flat @ mean.conj().T)
            + np.sum(np.abs(mean) ** 2, axis=1)[None, :]
        )
        arg = np.argmin(d2, axis=1)
        val = d2[np.arange(n_t), arg]
        better = val < best_d2
        best_d2[better] = val[better]
        best_idx[better] = idx[arg[better]]

    digits = (
        best_idx[:, None] // (m ** np.arange(n_u - 1, -1, -1))[None, :]
    ) % m
    return DecodeResult(digits.astype(int))


def _contract_first(arr, msg):
    """Contract axis 1 (one user's M axis) of (B, M, ...) with per-row messages."""
    return np.einsum("bm...,bm->b...", arr, msg)


def _contract_last(arr, msg):
    return np.einsum("b...m,bm->b...", arr, msg)


def mpa_decode(y, h, cb: Codebook, sigma2: float, k_it: int = 10) -> DecodeResult:
    """SCMA iterative message-passing decoding on the codeword-support factor graph.

    Messages start uniform at 1/M, then alternate FN->VN updates (likelihood
    marginalized over the other colliding users) and normalized extrinsic
    VN->FN updates for k_it rounds. Decisions are the per-user argmax of the
    product of incoming FN messages, combined across antennas.
    """
    if k_it < 1:
        raise ValueError("need at least one iteration")
    y, h = _check_inputs(y, h, cb)
    graph = factor_graph(cb)
    n_t, _, n_r = y.shape
    b = n_t * n_r
    m = cb.m
    sigma_eff = max(float(sigma2), _SIGMA_FLOOR)

    # per-FN likelihood tables over the M^L joint symbol grid of its users
    lik = []
    for r, users in enumerate(graph.lambda_r):
        L = len(users)
        combos = m**L
        idx = np.arange(combos)
        digits = (idx[None, :] // (m ** np.arange(L - 1, -1, -1))[:, None]) % m
        cw = np.stack([cb.matrices[u][r, digits[i]] for i, u in enumerate(users)])
        mean = np.einsum("ic,in->nc", cw, h[r][list(users), :])  # (N_R, C)
        d2 = np.abs(y[:, r, :, None] - mean[None, :, :]) ** 2  # (N_T, N_R, C)
        d2 -= d2.min(axis=2, keepdims=True)
        with np.errstate(over="ignore", under="ignore"):
            t = np.exp(-d2 / sigma_eff)
        lik.append(t.reshape((b,) + (m,) * L))

    mu_vf = {
        (u, r): np.full((b, m), 1.0 / m)
        for u in range(cb.n_users)
        for r in graph.omega_u[u]
    }
    mu_fv = {}
    for _ in range(k_it):
        # FN -> VN: marginalize the likelihood grid over the other users,
        # weighting by their incoming messages (prefix/suffix contractions)
        for r, users in enumerate(graph.lambda_r):
            L = len(users)
            msgs = [mu_vf[(u, r)] for u in users]
            prefix = [lik[r]]
            for i in range(L - 1):
                prefix.append(_contract_first(prefix[i], msgs[i]))
            for i in range(L - 1, -1, -1):
                out = prefix[i]
                for j in range(L - 1, i, -1):
                    out = _contract_last(out, msgs[j])
                out = out + _TINY
                mu_fv[(r, users[i])] = out / out.sum(axis=1, keepdims=True)
        # VN -> FN: extrinsic product over the user's other OREs, normalized
        for u in range(cb.n_users):
            ores = graph.omega_u[u]
            for r in ores:
                prod = np.ones((b, m))
                for j in ores:
                    if j != r:
                        prod = prod * mu_fv[(j, u)]
                prod = prod + _TINY
                mu_vf[(u, r)] = prod / prod.sum(axis=1, keepdims=True)

    # final beliefs: product over the user's OREs, antennas combined in log domain
    indices = np.zeros((n_t, cb.n_users), dtype=int)
    posts = np.zeros((n_t, cb.n_users, m))
    for u in range(cb.n_users):
        logb = np.zeros((b, m))
        for j in graph.omega_u[u]:
            logb += np.log(mu_fv[(j, u)] + _TINY)
        logb = logb.reshape(n_t, n_r, m).sum(axis=1)
        logb -= logb.max(axis=1, keepdims=True)
        p = np.exp(logb)
        p /= p.sum(axis=1, keepdims=True)
        posts[:, u, :] = p
        indices[:, u] = np.argmax(p, axis=1)
    return DecodeResult(indices, posts)


def ser(decoded, truth) -> float:
    """Fraction of (slot, user) symbol positions that differ."""
    a = np.asarray(decoded)
    t = np.asarray(truth)
    if a.shape != t.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {t.shape}")
    if a.size == 0:
        raise ValueError("empty inputs")
    return float(np.mean(a != t))
