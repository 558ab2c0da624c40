"""Per-beam-pair link simulation: pulse shaping, effective channel taps,
least-squares power estimation, and exhaustive beam-pair sweeps.

Power bookkeeping: ray gains are dimensionless link gains (received mW per
1 mW transmitted through isotropic antennas), so a beam pair's received
power ``gamma = sum_n |h[n]|^2`` is also dimensionless.  Transmit power
enters only through the measurement-noise scaling and the rate formula.
Training-sequence structure is never materialized: sequences with ideal
autocorrelation make the LS estimator error white with per-tap variance
``noise_variance / (seq_length * tx_power_linear)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arrays import Codebook, pair_codebook_hash, steering_matrix


@dataclass(frozen=True)
class PulseConfig:
    """Combined pulse shaping / lowpass response and channel truncation."""

    bandwidth: float = 1.76e9
    rolloff: float = 0.1
    channel_length: int = 512

    def __post_init__(self) -> None:
        if not 0 <= self.rolloff <= 1:
            raise ValueError("rolloff must lie in [0, 1]")
        if self.bandwidth <= 0 or self.channel_length < 1:
            raise ValueError("invalid pulse configuration")

    @property
    def symbol_period(self) -> float:
        return 1.0 / self.bandwidth


@dataclass(frozen=True)
class TrainingConfig:
    """Training length and link-budget terms for one measurement campaign.

    ``noise_variance`` is the receiver noise power in mW over the signal
    bandwidth; ``tx_power_dbm`` feeds the estimator noise scaling and the
    rate computation.  ``eirp_dbm`` is recorded for reporting (the regulated
    quantity); it equals tx power plus transmit array gain.
    """

    seq_length: int = 512
    noise_variance: float = 0.0
    tx_power_dbm: float = 0.0
    eirp_dbm: float | None = None

    def __post_init__(self) -> None:
        if self.seq_length < 1:
            raise ValueError("seq_length must be >= 1")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")

    @property
    def tx_power_mw(self) -> float:
        return 10 ** (self.tx_power_dbm / 10)

    @property
    def estimator_tap_variance(self) -> float:
        """Per-tap LS error variance after power normalization."""
        return self.noise_variance / (self.seq_length * self.tx_power_mw)

    @classmethod
    def from_eirp(cls, eirp_dbm: float, n_tx_elements: int,
                  noise_variance: float = 0.0, seq_length: int = 512) -> "TrainingConfig":
        """Set the transmit power from an EIRP and the array gain."""
        tx = eirp_dbm - 10 * math.log10(n_tx_elements)
        return cls(seq_length=seq_length, noise_variance=noise_variance,
                   tx_power_dbm=tx, eirp_dbm=eirp_dbm)


def noise_power_dbm(bandwidth_hz: float) -> float:
    """Thermal noise power over ``bandwidth_hz``: -174 dBm/Hz density."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return -174.0 + 10 * math.log10(bandwidth_hz)


def raised_cosine(t, cfg: PulseConfig):
    """Raised-cosine impulse response g(t), unit peak, Nyquist zeros at kT.

    The removable singularity at ``t = +-T/(2*rolloff)`` evaluates to its
    limit ``(pi/4) * sinc(1/(2*rolloff))``.
    """
    t = np.asarray(t, dtype=float)
    T = cfg.symbol_period
    beta = cfg.rolloff
    x = t / T
    out = np.empty_like(x)
    if beta == 0.0:
        out[...] = np.sinc(x)
        return out if out.ndim else float(out)
    denom = 1.0 - (2 * beta * x) ** 2
    singular = np.abs(denom) < 1e-9
    safe = np.where(singular, 1.0, denom)
    out = np.sinc(x) * np.cos(np.pi * beta * x) / safe
    out = np.where(singular, (np.pi / 4) * np.sinc(1.0 / (2 * beta)), out)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Beam pair indexing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BeamPairIndex:
    """Flat pair id ``i = rx_beam * n_tx + tx_beam`` and its two beam indices."""

    pair_id: int
    rx_beam: int
    tx_beam: int

    @classmethod
    def from_beams(cls, rx_beam: int, tx_beam: int, n_tx: int) -> "BeamPairIndex":
        return cls(pair_id=rx_beam * n_tx + tx_beam, rx_beam=rx_beam, tx_beam=tx_beam)

    @classmethod
    def from_id(cls, pair_id: int, n_tx: int) -> "BeamPairIndex":
        return cls(pair_id=pair_id, rx_beam=pair_id // n_tx, tx_beam=pair_id % n_tx)


# ---------------------------------------------------------------------------
# Effective channel assembly
# ---------------------------------------------------------------------------

def _beam_couplings(ch, rx_book: Codebook, tx_book: Codebook):
    """Per-ray inner products with every beam.

    Returns ``(U, V, delays)`` where ``U[i, l] = w_i^H a_r(ray l)`` scaled by
    ``sqrt(N_r N_t) * gain_l`` and ``V[j, l] = a_t(ray l)^H f_j``.
    """
    gains = np.array([r.gain for r in ch.rays], dtype=complex)
    delays = np.array([r.delay for r in ch.rays], dtype=float)
    aoa_t = np.array([r.aoa[0] for r in ch.rays], dtype=float)
    aoa_p = np.array([r.aoa[1] for r in ch.rays], dtype=float)
    aod_t = np.array([r.aod[0] for r in ch.rays], dtype=float)
    aod_p = np.array([r.aod[1] for r in ch.rays], dtype=float)
    a_r = steering_matrix(rx_book.config, aoa_t, aoa_p)     # (L_p, N_r)
    a_t = steering_matrix(tx_book.config, aod_t, aod_p)     # (L_p, N_t)
    scale = math.sqrt(rx_book.config.n_elements * tx_book.config.n_elements)
    U = rx_book.beams.conj() @ a_r.T * (scale * gains)[None, :]
    V = tx_book.beams @ a_t.conj().T
    return U, V, delays


def _pulse_grid(delays: np.ndarray, pulse: PulseConfig) -> np.ndarray:
    """g(n*T + tau0 - tau_l) on the truncated tap grid, shape (L_p, L)."""
    T = pulse.symbol_period
    tau0 = delays.min()
    n = np.arange(pulse.channel_length)
    return raised_cosine(n[None, :] * T + tau0 - delays[:, None],
                         PulseConfig(pulse.bandwidth, pulse.rolloff,
                                     pulse.channel_length))


@dataclass
class EffectiveChannel:
    """Tap vector of one beam pair; ``gamma`` is its received power."""

    taps: np.ndarray
    pair: BeamPairIndex

    @property
    def gamma(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))


def effective_channel(ch, pair: BeamPairIndex, rx_book: Codebook,
                      tx_book: Codebook, pulse: PulseConfig) -> EffectiveChannel:
    """Assemble the L-tap effective channel of one beam pair.

    ``h[n] = sum_l g(nT + tau0 - tau_l) * w^H H_l f`` with symbol timing
    synchronized to the earliest ray and taps truncated to ``channel_length``.
    """
    if not (0 <= pair.rx_beam < rx_book.n_beams and 0 <= pair.tx_beam < tx_book.n_beams):
        raise IndexError("beam pair outside the codebooks")
    if not ch.rays:
        return EffectiveChannel(taps=np.zeros(pulse.channel_length, dtype=complex),
                                pair=pair)
    U, V, delays = _beam_couplings(ch, rx_book, tx_book)
    coupling = U[pair.rx_beam] * V[pair.tx_beam]
    G = _pulse_grid(delays, pulse)
    return EffectiveChannel(taps=coupling @ G, pair=pair)


def measure_pair(eff: EffectiveChannel, trn: TrainingConfig,
                 rng: np.random.Generator) -> float:
    """LS-estimated received power of one pair: ``||h + v_tilde||^2``.

    The estimation error is white circular Gaussian with per-tap variance
    ``noise_variance / (seq_length * tx_power_linear)``; with zero noise the
    true power is returned exactly.
    """
    var = trn.estimator_tap_variance
    if var == 0.0:
        return eff.gamma
    L = len(eff.taps)
    noise = rng.normal(scale=math.sqrt(var / 2), size=(2, L))
    est = eff.taps + noise[0] + 1j * noise[1]
    return float(np.sum(np.abs(est) ** 2))


# ---------------------------------------------------------------------------
# Exhaustive sweeps
# ---------------------------------------------------------------------------

def pair_gain_matrix(ch, rx_book: Codebook, tx_book: Codebook,
                     pulse: PulseConfig) -> np.ndarray:
    """Noiseless received power of every beam pair, shape (n_rx, n_tx).

    Uses the tap-domain Gram identity: with ``Q = G G^T`` over the pulse
    grid, ``gamma(i, j) = sum_{l,m} Q[l,m] c_l(i,j) conj(c_m(i,j))`` for the
    per-ray couplings ``c``, which avoids materializing taps per pair.
    """
    if not ch.rays:
        return np.zeros((rx_book.n_beams, tx_book.n_beams))
    U, V, delays = _beam_couplings(ch, rx_book, tx_book)
    G = _pulse_grid(delays, pulse)
    Q = G @ G.T                                   # (L_p, L_p)
    L_p = len(delays)
    E = (U[:, :, None] * U.conj()[:, None, :]).reshape(rx_book.n_beams, L_p * L_p)
    D = (V[:, :, None] * V.conj()[:, None, :]).reshape(tx_book.n_beams, L_p * L_p)
    gammas = (E * Q.ravel()[None, :]) @ D.conj().T
    return np.maximum(gammas.real, 0.0)


def noisy_gammas(gammas: np.ndarray, tap_variance: float, channel_length: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Apply LS estimation noise to true powers without materializing taps.

    Exact distributional decomposition of ``||h + v||^2``: the component of
    the white noise along ``h`` contributes ``(sqrt(gamma) + a)^2 + b^2`` and
    the orthogonal complement an independent scaled chi-square with
    ``2(L - 1)`` degrees of freedom.
    """
    if tap_variance == 0.0:
        return np.asarray(gammas, dtype=float).copy()
    g = np.asarray(gammas, dtype=float)
    a, b = rng.normal(scale=math.sqrt(tap_variance / 2), size=(2,) + g.shape)
    out = (np.sqrt(g) + a) ** 2 + b ** 2
    if channel_length > 1:
        out = out + (tap_variance / 2) * rng.chisquare(2 * (channel_length - 1),
                                                       size=g.shape)
    return out


@dataclass
class SweepTable:
    """Estimated powers of all beam pairs, indexed by flat pair id.

    ``powers`` holds dimensionless link gains in pair-id order
    (``pair_id = rx * n_tx + tx``); received milliwatts follow from the
    transmit power used for the sweep.
    """

    powers: np.ndarray
    n_rx: int
    n_tx: int
    codebook_hash: str
    tx_power_dbm: float = 0.0
    seed: int | None = None

    @property
    def n_pairs(self) -> int:
        return self.n_rx * self.n_tx

    @property
    def received_mw(self) -> np.ndarray:
        return self.powers * 10 ** (self.tx_power_dbm / 10)

    def argmax_pair(self) -> BeamPairIndex:
        return BeamPairIndex.from_id(int(np.argmax(self.powers)), self.n_tx)

    def to_csv(self, path) -> None:
        mw = self.received_mw
        with np.errstate(divide="ignore"):
            dbm = 10 * np.log10(mw)
        with open(path, "w", encoding="ascii") as f:
            f.write(f"# codebook_hash={self.codebook_hash} n_rx={self.n_rx} "
                    f"n_tx={self.n_tx} tx_power_dbm={self.tx_power_dbm!r} "
                    f"seed={self.seed}\n")
            f.write("pair_id,rx_beam,tx_beam,power_dbm\n")
            for pid in range(self.n_pairs):
                f.write(f"{pid},{pid // self.n_tx},{pid % self.n_tx},{float(dbm[pid])!r}\n")

    @classmethod
    def from_csv(cls, path) -> "SweepTable":
        meta = {}
        rows = []
        with open(path, "r", encoding="ascii") as f:
            for line in f:
                line = line.strip()
                if line.startswith("#"):
                    for tok in line[1:].split():
                        if "=" in tok:
                            k, v = tok.split("=", 1)
                            meta[k] = v
                    continue
                if not line or line.startswith("pair_id"):
                    continue
                rows.append(line.split(","))
        n_rx, n_tx = int(meta["n_rx"]), int(meta["n_tx"])
        tx_dbm = float(meta.get("tx_power_dbm", "0.0"))
        powers = np.zeros(n_rx * n_tx)
        for pid_s, _rx, _tx, dbm_s in rows:
            powers[int(pid_s)] = 10 ** ((float(dbm_s) - tx_dbm) / 10)
        seed = meta.get("seed")
        return cls(powers=powers, n_rx=n_rx, n_tx=n_tx,
                   codebook_hash=meta.get("codebook_hash", ""),
                   tx_power_dbm=tx_dbm,
                   seed=None if seed in (None, "None") else int(seed))


def exhaustive_sweep(ch, rx_book: Codebook, tx_book: Codebook,
                     pulse: PulseConfig, trn: TrainingConfig,
                     rng: np.random.Generator | None = None) -> SweepTable:
    """Measure every beam pair against one (static) channel snapshot."""
    gammas = pair_gain_matrix(ch, rx_book, tx_book, pulse).ravel()
    var = trn.estimator_tap_variance
    if var > 0.0:
        if rng is None:
            raise ValueError("noisy sweeps need an rng")
        gammas = noisy_gammas(gammas, var, pulse.channel_length, rng)
    return SweepTable(powers=gammas, n_rx=rx_book.n_beams, n_tx=tx_book.n_beams,
                      codebook_hash=pair_codebook_hash(rx_book, tx_book),
                      tx_power_dbm=trn.tx_power_dbm,
                      seed=getattr(ch, "seed", None))
