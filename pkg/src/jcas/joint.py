"""Closed-loop joint communication and imaging over a packet stream.

Per packet k: draw a fresh binary IRS pattern, transmit a random frame over
the true composite channel, decode it against the channel *predicted* from
the current scene estimate (known LOS/IRS parts plus the estimated scatter),
then re-image from the sliding window of decoded packets. Optional
self-iteration repeats decode+image within a packet until the estimate
stops moving; optional feedback re-decodes the previous n_b packets with
the fresher image after every sensing step and refreshes the window.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import LinkSet, composite_channel, random_binary_pattern
from .gamp import GampDivergence, PriorParams
from .mpa import ml_decode, mpa_decode, ser
from .scma import Codebook
from .scene import ScattererField
from .sensing import PacketRecord, SenseWindow, sense
from .transceiver import noise_sigma, random_frame, transmit

__all__ = ["JointConfig", "PacketTrace", "RunTrace", "JointRunner", "run_joint"]


@dataclass(frozen=True)
class JointConfig:
    """Knobs of the closed loop. eps_k defaults to 0.05*sqrt(N_s*sparsity)."""

    n_packets: int = 30  # packets in the run (K)
    n_slots: int = 64  # time slots per packet (N_T)
    n_pilot: int = 1  # leading packets with receiver-known symbols
    n_f: int = 10  # sliding imaging window length
    n_b: int = 0  # feedback depth (packets re-decoded at the end)
    k_s: int = 1  # decode+image self-iterations per packet
    k_it: int = 10  # MPA message-passing rounds
    mu: float = 0.0  # momentum blend toward the previous image
    eps_k: float | None = None  # convergence gate on ||x_k - x_{k-1}||
    ebn0_db: float = 10.0
    decoder: str = "mpa"  # "mpa" | "ml" | "genie" (mpa with the true channel)
    ore_mode: str = "user_first"
    seed: int = 0

    def __post_init__(self):
        if self.n_packets < 1 or self.n_slots < 1:
            raise ValueError("need at least one packet and one slot")
        if self.n_f < 1 or self.k_s < 1 or self.k_it < 1:
            raise ValueError("n_f, k_s and k_it must be >= 1")
        if self.n_b < 0 or self.n_b > self.n_packets:
            raise ValueError("feedback depth must lie in [0, n_packets]")
        if not 0 <= self.n_pilot <= self.n_packets:
            raise ValueError("pilot count must lie in [0, n_packets]")
        if self.decoder not in ("mpa", "ml", "genie"):
            raise ValueError(f"unknown decoder {self.decoder!r}")


@dataclass
class PacketTrace:
    """Per-packet outcomes of one closed-loop run."""

    packet: int
    mse: float
    ser: float
    ser_post_feedback: float | None = None  # filled by the feedback pass
    pilot: bool = False  # symbols were known a priori, not decoded
    gate: bool = False  # convergence gate held at this packet
    ks_used: int = 1  # self-iterations actually spent
    diverged: bool = False  # GAMP diverged; previous image retained
    wall_ms: float = 0.0


@dataclass
class RunTrace:
    packets: list = field(default_factory=list)
    x_final: np.ndarray | None = field(default=None, repr=False)

    def column(self, name):
        return np.array([getattr(p, name) for p in self.packets])


class JointRunner:
    """Stateful closed loop; run() drives it over config.n_packets packets."""

    def __init__(
        self,
        truth: ScattererField,
        links: LinkSet,
        cb: Codebook,
        prior: PriorParams,
        config: JointConfig,
    ):
        self.truth = truth
        self.links = links
        self.cb = cb
        self.prior = prior
        self.config = config
        n_s = truth.spec.n_voxels
        self.eps_k = (
            config.eps_k
            if config.eps_k is not None
            else 0.05 * np.sqrt(n_s * prior.lam)
        )
        self.sigma2 = noise_sigma(config.ebn0_db, cb)
        self.window = SenseWindow(config.n_f)
        self.x_hat = np.zeros(n_s)
        self.gate_open = False  # once held, self-iteration collapses to 1
        self._frames = {}  # packet -> true Frame (for SER bookkeeping)
        self._x_hist = {0: self.x_hat.copy()}  # packet -> image after packet

    # -- channel helpers ---------------------------------------------------

    def _pattern(self, packet):
        return random_binary_pattern(
            self.links.h_s1.shape[1], packet, self.config.seed
        )

    def _channel(self, irs, x):
        return np.stack(
            [
                composite_channel(self.links, irs, x, r)
                for r in range(self.cb.n_ores)
            ]
        )

    def _decode(self, y, h_dec):
        if self.config.decoder == "ml":
            return ml_decode(y, h_dec, self.cb)
        return mpa_decode(y, h_dec, self.cb, self.sigma2, self.config.k_it)

    # -- loop steps --------------------------------------------------------

    def forward_step(self, packet: int) -> PacketTrace:
        """Transmit, decode against the predicted channel, image, self-iterate."""
        cfg = self.config
        t0 = time.perf_counter()
        irs = self._pattern(packet)
        h_true = self._channel(irs, self.truth.values)
        frame = random_frame(cfg.n_slots, self.cb, packet, cfg.seed)
        self._frames[packet] = frame
        rx = transmit(
            frame, h_true, self.cb, self.sigma2,
            np.random.SeedSequence((cfg.seed, 2, packet)),
        )

        is_pilot = packet <= cfg.n_pilot
        if is_pilot:
            # pilot symbols are known a priori; nothing to decode
            symbols = frame.symbol_indices
        else:
            h_dec = h_true if cfg.decoder == "genie" else self._channel(irs, self.x_hat)
            decoded = self._decode(rx.y, h_dec)
            symbols = decoded.indices
        self.window.push(PacketRecord(packet, rx.y, symbols, irs))

        trace = PacketTrace(
            packet,
            mse=np.inf,
            ser=ser(symbols, frame.symbol_indices),
            pilot=is_pilot,
            gate=self.gate_open,
        )
        k_s = 1 if self.gate_open else cfg.k_s
        for it in range(k_s):
            trace.ks_used = it + 1
            x_old = self.x_hat
            # momentum only engages once the estimate has settled; blending
            # the coarse initial images would slow convergence instead
            mu = cfg.mu if self.gate_open else 0.0
            try:
                self.x_hat, _ = sense(
                    self.window, self.links, self.cb, self.prior,
                    mu=mu, ore_mode=cfg.ore_mode,
                )
            except GampDivergence:
                trace.diverged = True
                self.x_hat = x_old
                break
            self.window.x_prev = self.x_hat
            moved = float(np.linalg.norm(self.x_hat - x_old))
            if moved < self.eps_k:
                if not self.gate_open:
                    self.gate_open = True
                    trace.gate = True
                break
            if not is_pilot and it + 1 < k_s:
                # re-decode this packet with the fresher image
                h_dec = self._channel(irs, self.x_hat)
                decoded = self._decode(rx.y, h_dec)
                self.window.update_symbols(packet, decoded.indices)
                trace.ser = ser(decoded.indices, frame.symbol_indices)
        trace.mse = float(np.mean((self.x_hat - self.truth.values) ** 2))
        trace.wall_ms = (time.perf_counter() - t0) * 1e3
        self._x_hist[packet] = self.x_hat.copy()
        return trace

    def feedback(self, packet: int, trace: RunTrace):
        """Re-decode the previous n_b packets with the packet-k image.

        Refreshes the stored decodes in the window and records each touched
        packet's post-feedback SER. Skipped entirely once the image has
        stopped moving over the feedback span (nothing left to revise).
        """
        cfg = self.config
        if cfg.n_b == 0 or packet <= cfg.n_b:
            return
        anchor = self._x_hist.get(packet - cfg.n_b - 1)
        if (
            anchor is not None
            and float(np.linalg.norm(self.x_hat - anchor)) < self.eps_k
        ):
            return
        by_packet = {p.packet: p for p in trace.packets}
        for rec in self.window.records:
            if not (packet - cfg.n_b <= rec.packet < packet):
                continue
            if rec.packet <= cfg.n_pilot:
                continue  # pilot symbols are already exact
            irs = self._pattern(rec.packet)
            h_dec = self._channel(irs, self.x_hat)
            decoded = self._decode(rec.y, h_dec)
            self.window.update_symbols(rec.packet, decoded.indices)
            row = by_packet.get(rec.packet)
            if row is not None:
                row.ser_post_feedback = ser(
                    decoded.indices, self._frames[rec.packet].symbol_indices
                )

    def run(self) -> RunTrace:
        trace = RunTrace()
        for packet in range(1, self.config.n_packets + 1):
            trace.packets.append(self.forward_step(packet))
            self.feedback(packet, trace)
        trace.x_final = self.x_hat.copy()
        return trace


def run_joint(truth, links, cb, prior, config=None, **overrides) -> RunTrace:
    """One-call closed-loop run; overrides patch the (default) config."""
    config = config or JointConfig()
    if overrides:
        config = replace(config, **overrides)
    return JointRunner(truth, links, cb, prior, config).run()
