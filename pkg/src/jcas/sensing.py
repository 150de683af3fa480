"""From received frames and decoded symbols to environment estimates.

Per packet: least-squares channel estimation over the time dimension, exact
subtraction of the known LOS and direct-IRS parts, then stacking the
windowed scatter rows into one compressed-sensing system solved by GAMP,
optionally blended with the previous estimate (momentum).
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .channel import IrsPattern, LinkSet, measurement_matrix, stack_measurements
from .gamp import PriorParams, gamp_solve, lift_complex
from .scma import Codebook, factor_graph
from .transceiver import codeword_tensor, Frame

__all__ = [
    "EstimatedChannel",
    "PacketRecord",
    "SenseWindow",
    "estimate_channel",
    "scatter_component",
    "sense",
]

_COND_LIMIT = 1e10


@dataclass
class EstimatedChannel:
    """Per-ORE channel estimates with an observability mask.

    Only users transmitting on an ORE are identifiable there; h entries for
    unobserved (r, user) pairs are zero and masked out.
    """

    h: np.ndarray = field(repr=False)  # (R, N_u, N_R)
    observed: np.ndarray = field(repr=False)  # (R, N_u) bool
    noise_var: float = 0.0  # mean per-coefficient estimate variance (complex)


def estimate_channel(y, symbol_indices, cb: Codebook, ridge_rel=1e-6) -> EstimatedChannel:
    """Least-squares per (ORE, antenna) channel estimation from known/decoded symbols.

    For ORE r, solves min ||y_r - S_r h||^2 over the d_f users sharing r,
    with a small ridge (ridge_rel * trace(S^H S)/d_f) for ill-conditioned
    symbol matrices. OREs whose symbol matrix stays rank-deficient beyond
    the ridge are flagged unobserved. Needs N_T >= d_f slots per ORE.
    """
    y = np.asarray(y, dtype=complex)
    if y.ndim != 3 or y.shape[1] != cb.n_ores:
        raise ValueError(f"received tensor shape {y.shape} inconsistent with codebook")
    n_t, _, n_r = y.shape
    graph = factor_graph(cb)
    e = codeword_tensor(Frame(symbol_indices), cb)  # (N_T, R, N_u)

    h = np.zeros((cb.n_ores, cb.n_users, n_r), dtype=complex)
    observed = np.zeros((cb.n_ores, cb.n_users), dtype=bool)
    var_terms = []
    for r, users in enumerate(graph.lambda_r):
        users = list(users)
        if n_t < len(users):
            raise ValueError(
                f"ORE {r}: need N_T >= d_f ({len(users)}) slots for identifiability"
            )
        s = e[:, r, users]  # (N_T, L)
        gram = s.conj().T @ s
        tau = ridge_rel * np.real(np.trace(gram)) / len(users)
        reg = gram + tau * np.eye(len(users))
        if np.linalg.cond(reg) > _COND_LIMIT:
            continue  # flagged: left unobserved, excluded from stacking
        reg_inv = np.linalg.inv(reg)
        h_sub = reg_inv @ (s.conj().T @ y[:, r, :])  # (L, N_R)
        h[r, users, :] = h_sub
        observed[r, users] = True
        resid = y[:, r, :] - s @ h_sub
        dof = max(n_t - len(users), 1)
        noise_est = np.sum(np.abs(resid) ** 2) / (dof * n_r)
        var_terms.append(noise_est * np.real(np.trace(reg_inv)) / len(users))
    noise_var = float(np.mean(var_terms)) if var_terms else 0.0
    return EstimatedChannel(h, observed, noise_var)


def scatter_component(h_r, links: LinkSet, irs: IrsPattern, r: int):
    """Isolate the scattered part: subtract the known LOS and direct-IRS parts."""
    h_r = np.asarray(h_r, dtype=complex)
    direct_irs = links.h_irs1[r] @ (irs.coefficients[:, None] * links.h_s1[r])
    return h_r - links.h_los[r] - direct_irs


@dataclass
class PacketRecord:
    """One packet's worth of sensing inputs kept in the sliding window."""

    packet: int
    y: np.ndarray = field(repr=False)  # (N_T, R, N_R)
    symbol_indices: np.ndarray = field(repr=False)  # (N_T, N_u), current decode
    irs: IrsPattern = None
    _mats: dict = field(default_factory=dict, repr=False)

    def matrix(self, links: LinkSet, nu: int, r: int):
        """Measurement matrix for (user, ORE), cached (pattern-dependent only)."""
        key = (nu, r)
        if key not in self._mats:
            self._mats[key] = measurement_matrix(links, self.irs, nu, r)
        return self._mats[key]


@dataclass
class SenseWindow:
    """Ring buffer of the last n_f packets plus momentum state."""

    n_f: int
    mu: float = 0.0
    x_prev: np.ndarray | None = field(default=None, repr=False)
    records: deque = None

    def __post_init__(self):
        if self.n_f < 1:
            raise ValueError("window length must be >= 1")
        if not 0 <= self.mu < 1:
            raise ValueError("momentum coefficient must lie in [0, 1)")
        if self.records is None:
            self.records = deque(maxlen=self.n_f)

    def push(self, record: PacketRecord):
        self.records.append(record)

    def update_symbols(self, packet: int, symbol_indices):
        """Replace the stored decode of a packet (self-iteration / feedback)."""
        for rec in self.records:
            if rec.packet == packet:
                rec.symbol_indices = np.asarray(symbol_indices, dtype=int)
                return True
        return False


def sense(
    window: SenseWindow,
    links: LinkSet,
    cb: Codebook,
    prior: PriorParams,
    mu: float = 0.0,
    ore_mode: str = "user_first",
    damping: float = 0.7,
    max_iter: int = 200,
):
    """Windowed GAMP imaging with optional momentum blending.

    Stacks the scatter rows of every packet in the window. ore_mode
    "user_first" takes one row per (packet, user) at the user's first
    occupied ORE (users transmit nothing on other OREs, so their channels
    are unobservable there); "all_ores" stacks every occupied ORE.
    Blends x = (1-mu)*x_gamp + mu*x_prev, clamped to [0, 1].
    """
    if not window.records:
        raise ValueError("sense window is empty")
    if ore_mode not in ("user_first", "all_ores"):
        raise ValueError(f"unknown ore_mode {ore_mode!r}")
    graph = factor_graph(cb)
    rows, mats, noise_vars = [], [], []
    for rec in window.records:
        est = estimate_channel(rec.y, rec.symbol_indices, cb)
        noise_vars.append(est.noise_var)
        scat = {}
        for nu in range(cb.n_users):
            ores = graph.omega_u[nu]
            if ore_mode == "user_first":
                ores = ores[:1]
            for r in ores:
                if not est.observed[r, nu]:
                    continue
                if r not in scat:
                    scat[r] = scatter_component(est.h[r], links, rec.irs, r)
                rows.append(scat[r][nu])
                mats.append(rec.matrix(links, nu, r))
    if not rows:
        raise ValueError("no observable channel rows in the window")
    h_tilde, a_tilde = stack_measurements(rows, mats)
    phi, yv = lift_complex(a_tilde, h_tilde)
    # lifted real parts carry half the complex estimate variance each
    sigma_w = max(np.mean(noise_vars) / 2.0, 1e-15)
    q = PriorParams(prior.lam, prior.theta, prior.sigma_x, sigma_w, prior.renormalized)
    # stop at the estimation-noise floor: the residual cannot fall below the
    # noise energy in the stacked rows, so a tighter target just spins
    eps_t = max(1e-12 * float(np.sum(yv**2)), sigma_w * len(yv))
    result = gamp_solve(phi, yv, q, eps_t=eps_t, damping=damping, max_iter=max_iter)
    x_hat = result.x
    if mu > 0 and window.x_prev is not None:
        x_hat = (1 - mu) * x_hat + mu * window.x_prev
    return np.clip(x_hat, 0.0, 1.0), result
