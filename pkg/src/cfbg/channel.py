"""Frequency-selective, spatially correlated SIMO channels and block simulation.

Channels are L-tap impulse responses per receive antenna, spatially
correlated across the array per path and independent across paths.  The
frequency response over the pilot band is the per-antenna truncated DFT of
the taps.  The simulator works directly in the post-FFT frequency domain:
per subcarrier block it stacks four OFDM symbols of every active node's
rank-one pilot contribution plus white noise.

Conventions: vectors are antenna-major (antenna i owns a contiguous run of
L taps or N_Total subcarriers).  With the default uniform power-delay
profile each tap has unit variance, so a user's full CIR vector has
covariance R (x) I_L and the per-subcarrier channel power is L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .authproto import AttackKind, AttackMode

__all__ = [
    "OfdmConfig",
    "SpatialCorrelation",
    "PilotConfig",
    "ChannelRealization",
    "ula_correlation",
    "exponential_pdp",
    "draw_cir",
    "cir_to_fs",
    "pilot_sequence",
    "block_columns",
    "simulate_rx",
]

PSD_TOL = 1e-10
DEFAULT_QUADRATURE_NODES = 64


@dataclass(frozen=True)
class OfdmConfig:
    """Pilot-band layout: B blocks of N subcarriers over N_T antennas."""

    n_block: int        # N, subcarriers per block
    n_total: int        # total pilot subcarriers
    n_blocks: int       # B
    n_rx: int           # N_T
    n_taps: int         # L
    cp_len: int         # p
    sigma2: float

    def __post_init__(self):
        errors = []
        if self.n_block * self.n_blocks != self.n_total:
            errors.append(
                f"N*B = {self.n_block * self.n_blocks} != N_Total = {self.n_total}"
            )
        if self.cp_len < self.n_taps - 1:
            errors.append(f"cyclic prefix {self.cp_len} < L-1 = {self.n_taps - 1}")
        if self.n_taps > self.n_block:
            errors.append(f"L = {self.n_taps} exceeds block size N = {self.n_block}")
        if self.sigma2 <= 0:
            errors.append("sigma2 must be positive")
        if min(self.n_block, self.n_blocks, self.n_rx, self.n_taps) < 1:
            errors.append("dimensions must be positive")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def nnt(self) -> int:
        """Per-block sample count N * N_T."""
        return self.n_block * self.n_rx


@dataclass(frozen=True)
class SpatialCorrelation:
    """Receive correlation matrix of a ULA with its generating geometry."""

    matrix: np.ndarray
    mean_aoa: float
    angular_spread: float
    spacing: float

    def __post_init__(self):
        m = self.matrix
        if not np.allclose(m, m.conj().T):
            raise ValueError("correlation matrix must be Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev.min() < -PSD_TOL:
            raise ValueError(
                f"correlation not PSD (min eigenvalue {ev.min():.3e}); "
                "increase quadrature nodes"
            )
        if not np.allclose(np.diag(m).real, 1.0, atol=1e-9):
            raise ValueError("correlation diagonal must be unity")

    @property
    def n_rx(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PilotConfig:
    """Constant-modulus pilot tone with a fixed per-symbol phase increment."""

    power: float
    phase0: float
    increment: float
    n_symbols: int = 4


@dataclass(frozen=True)
class ChannelRealization:
    """One user's taps and derived frequency response, with its correlation."""

    user: str  # "B" | "C" | "E"
    cir: np.ndarray          # (N_T * L,)
    fs: np.ndarray           # (N_T * N_Total,)
    corr: SpatialCorrelation


def ula_correlation(
    mean_aoa: float,
    spread: float,
    spacing: float,
    n_rx: int,
    quadrature_nodes: int = DEFAULT_QUADRATURE_NODES,
) -> SpatialCorrelation:
    """Correlation of a half-wavelength-style ULA under a truncated-Gaussian PAS.

    Entry (a, b) integrates exp(-j 2 pi d_ab sin(theta)) against the power
    angle spectrum centred on the mean angle of arrival, using fixed-node
    Gauss-Legendre quadrature on the offset window [-pi, pi]; d_ab is the
    antenna separation in wavelengths.  A zero spread collapses the PAS to
    a point source (rank-one phase ramp).
    """
    if n_rx < 1:
        raise ValueError("need at least one antenna")
    if spread < 0:
        raise ValueError("angular spread must be non-negative")
    a = np.arange(n_rx)
    d = (a[:, None] - a[None, :]) * spacing
    if spread == 0.0:
        steer = np.exp(-2j * np.pi * d * math.sin(mean_aoa))
        return SpatialCorrelation(steer, mean_aoa, spread, spacing)
    nodes, weights = np.polynomial.legendre.leggauss(quadrature_nodes)
    phi = nodes * np.pi
    w = weights * np.pi
    pas = np.exp(-(phi**2) / (2.0 * spread**2))
    pas /= np.sum(pas * w)
    kernel = np.exp(-2j * np.pi * d[:, :, None] * np.sin(phi + mean_aoa)[None, None, :])
    matrix = np.einsum("q,abq->ab", pas * w, kernel)
    np.fill_diagonal(matrix, 1.0)
    return SpatialCorrelation(matrix, mean_aoa, spread, spacing)


def exponential_pdp(n_taps: int, decay: float) -> np.ndarray:
    """Exponentially decaying power-delay profile, normalized to unit sum."""
    p = np.exp(-decay * np.arange(n_taps))
    return p / p.sum()


def _corr_sqrt(matrix: np.ndarray, floor: float = 0.0) -> np.ndarray:
    ev, u = np.linalg.eigh(matrix)
    ev = np.clip(ev.real, floor, None)
    return (u * np.sqrt(ev)) @ u.conj().T


def draw_cir(
    corr: SpatialCorrelation,
    n_taps: int,
    n_rx: int,
    pdp: np.ndarray | None,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw one spatially colored CIR vector of length N_T * L (antenna-major).

    White CN(0,1) taps are colored by the square root of R (x) I_L, computed
    as R^(1/2) (x) I_L on the antenna axis.  The power-delay profile shapes
    tap variances as L * pdp_l (unit sum pdp, so the default uniform profile
    keeps unit tap variance and total per-antenna power L).
    """
    if corr.n_rx != n_rx:
        raise ValueError("correlation size does not match n_rx")
    if pdp is None:
        pdp = np.full(n_taps, 1.0 / n_taps)
    pdp = np.asarray(pdp, dtype=float)
    if pdp.shape != (n_taps,) or not math.isclose(pdp.sum(), 1.0, rel_tol=1e-9):
        raise ValueError("pdp must have length L and unit sum")
    white = rng.standard_normal((n_rx, n_taps)) + 1j * rng.standard_normal((n_rx, n_taps))
    white *= math.sqrt(0.5)
    shaped = white * np.sqrt(n_taps * pdp)[None, :]
    colored = _corr_sqrt(corr.matrix) @ shaped
    return colored.reshape(-1)


def cir_to_fs(g: np.ndarray, n_sub: int, n_taps: int, n_rx: int) -> np.ndarray:
    """Per-antenna truncated DFT of the taps onto n_sub subcarriers.

    Frequency sample p of antenna i is sum_l g[i,l] exp(-j 2 pi p l / n_sub);
    energy satisfies ||h||^2 = n_sub ||g||^2.
    """
    g = np.asarray(g)
    if g.shape != (n_rx * n_taps,):
        raise ValueError(f"expected ({n_rx * n_taps},) taps, got {g.shape}")
    if n_taps > n_sub:
        raise ValueError("more taps than subcarriers")
    taps = g.reshape(n_rx, n_taps)
    return np.fft.fft(taps, n=n_sub, axis=1).reshape(-1)


def pilot_sequence(cfg: PilotConfig) -> np.ndarray:
    """x[k] = sqrt(power) * exp(j (phase0 + k increment)), k = 0..n_symbols-1."""
    k = np.arange(cfg.n_symbols)
    return np.sqrt(cfg.power) * np.exp(1j * (cfg.phase0 + k * cfg.increment))


def block_columns(fs: np.ndarray, cfg: OfdmConfig, b: int) -> np.ndarray:
    """Block b's N * N_T frequency samples gathered across antennas."""
    per_ant = fs.reshape(cfg.n_rx, cfg.n_total)
    return per_ant[:, b * cfg.n_block : (b + 1) * cfg.n_block].reshape(-1)


def simulate_rx(
    cfg: OfdmConfig,
    activations: dict[str, np.ndarray],
    channels: dict[str, np.ndarray],
    pilots: dict[str, PilotConfig],
    attack: AttackMode | None,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-block received 4 x (N * N_T) stacks over four OFDM symbols.

    activations map user tags to boolean length-B block patterns; channels
    map tags to full-band FS vectors; pilots map tags to tone configs.  The
    attack controls Eva: absent under silence, her own pattern and tone
    under imitation, and an all-block wideband signature under jamming (a
    fixed random unit-power per-subcarrier gain, constant across the four
    symbols, scaled by her tone).
    """
    n_sym = 4
    users = [u for u in ("B", "C") if u in activations]
    kind = attack.kind if attack is not None else AttackKind.SILENCE
    eva_active = None
    eva_fs = None
    if kind is AttackKind.IMITATE:
        eva_active = np.asarray(activations["E"], dtype=bool)
        eva_fs = channels["E"]
    elif kind is AttackKind.JAM:
        eva_active = np.ones(cfg.n_blocks, dtype=bool)
        signature = rng.standard_normal(cfg.n_total) + 1j * rng.standard_normal(cfg.n_total)
        signature *= math.sqrt(0.5)
        eva_fs = (channels["E"].reshape(cfg.n_rx, cfg.n_total) * signature[None, :]).reshape(-1)
    for u in users:
        if len(activations[u]) != cfg.n_blocks:
            raise ValueError(f"activation pattern of {u} has wrong length")

    out = rng.standard_normal((cfg.n_blocks, n_sym, cfg.nnt)) * math.sqrt(cfg.sigma2 / 2)
    out = out + 1j * rng.standard_normal((cfg.n_blocks, n_sym, cfg.nnt)) * math.sqrt(
        cfg.sigma2 / 2
    )

    def add(tag: str, active: np.ndarray, fs: np.ndarray):
        tone = pilot_sequence(pilots[tag])
        if len(tone) != n_sym:
            raise ValueError(f"pilot of {tag} must span {n_sym} symbols")
        for b in np.flatnonzero(active):
            hb = block_columns(fs, cfg, int(b))
            out[b] += tone[:, None] * hb[None, :]

    for u in users:
        add(u, np.asarray(activations[u], dtype=bool), channels[u])
    if eva_active is not None:
        add("E", eva_active, eva_fs)
    return out
