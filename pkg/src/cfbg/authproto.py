"""Pilot conveyance protocol: quantization, codeword mapping, BDCD decoding.

Each user's random pilot phase is snapped to a per-user reference grid and
conveyed as the activation pattern of its mapped codeword.  The receiver
turns per-block detected signal counts into an observed double codeword
(presence pattern plus count vector) and runs block-detection based
codeword decoding (BDCD): registry lookup of the presence pattern,
single-count digit reduction to unmask wideband jamming, and a per-half
count cross-check that exposes duplicated codewords as separation errors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .combinatorics import CfbgCodebook

__all__ = [
    "QuantizedPilot",
    "AttackKind",
    "AttackMode",
    "ObservedCodeword",
    "Classification",
    "BdcdVerdict",
    "quantize_phase",
    "encode_pilot",
    "activation_pattern",
    "observe_pattern",
    "bdcd_decode",
    "decode_pilot",
    "sep_formula",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class QuantizedPilot:
    user: str  # "B" | "C"
    grid: int
    index: int
    phase: float

    def __post_init__(self):
        if self.user not in ("B", "C"):
            raise ValueError("user must be 'B' or 'C'")
        if not 0 <= self.index < self.grid:
            raise ValueError("index outside the grid")


class AttackKind(enum.Enum):
    SILENCE = "silence"
    IMITATE = "imitate"
    JAM = "jam"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class AttackMode:
    """Eva's behaviour for one trial (or a hybrid schedule over trials).

    imitate_codeword pins her codeword index; None draws uniformly from the
    full usable codebook (target_half restricts the draw to one user half).
    Hybrid resolves to one of the three concrete kinds per trial with the
    given probabilities.
    """

    kind: AttackKind
    imitate_codeword: int | None = None
    target_half: str | None = None
    hybrid_probs: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)  # silence, imitate, jam

    def __post_init__(self):
        if self.target_half not in (None, "B", "C"):
            raise ValueError("target_half must be None, 'B' or 'C'")
        if self.kind is AttackKind.HYBRID:
            if not math.isclose(sum(self.hybrid_probs), 1.0, rel_tol=1e-9):
                raise ValueError("hybrid probabilities must sum to 1")

    def resolve(self, rng: np.random.Generator) -> "AttackMode":
        """Draw the concrete per-trial variant of a hybrid schedule."""
        if self.kind is not AttackKind.HYBRID:
            return self
        pick = rng.choice(3, p=self.hybrid_probs)
        kind = (AttackKind.SILENCE, AttackKind.IMITATE, AttackKind.JAM)[pick]
        return AttackMode(kind, self.imitate_codeword, self.target_half)

    def draw_codeword(self, book: CfbgCodebook, rng: np.random.Generator) -> int:
        if self.imitate_codeword is not None:
            return self.imitate_codeword
        if self.target_half == "B":
            return int(rng.integers(0, book.half_size))
        if self.target_half == "C":
            return int(rng.integers(book.half_size, book.usable))
        return int(rng.integers(0, book.usable))


@dataclass(frozen=True)
class ObservedCodeword:
    """Presence pattern g_c paired with per-block signal counts g_b."""

    g_c: np.ndarray
    g_b: np.ndarray

    def __post_init__(self):
        g_c = np.asarray(self.g_c)
        g_b = np.asarray(self.g_b)
        if g_c.shape != g_b.shape:
            raise ValueError("pattern and count vectors differ in length")
        if ((g_b > 0).astype(np.int64) != g_c.astype(np.int64)).any():
            raise ValueError("presence pattern inconsistent with counts")
        if (g_b < 0).any() or (g_b > 3).any():
            raise ValueError("counts must lie in 0..3")


class Classification(enum.Enum):
    NO_ATTACK = "no-attack"              # no jamming; three codewords separated
    SILENT_OR_ABSENT = "silent-or-absent"  # two codewords, counts consistent
    JAMMING = "jamming"                  # wideband jamming unmasked
    SEPARATION_ERROR = "separation-error"


@dataclass(frozen=True)
class BdcdVerdict:
    classification: Classification
    codewords: tuple[int, ...]   # recovered codebook indices
    halves: tuple[str, ...]      # per recovered codeword
    ambiguous: bool = False      # two recovered codewords share one user half


def quantize_phase(theta: float, grid: int, user: str = "B") -> QuantizedPilot:
    """Nearest reference phase on the uniform grid over [0, 2 pi).

    Circular distance; ties resolve to the lower index.  The phase is
    wrapped modulo 2 pi first.
    """
    if grid < 1:
        raise ValueError("grid must be at least 1")
    theta = theta % TWO_PI
    step = TWO_PI / grid
    lo = int(math.floor(theta / step)) % grid
    hi = (lo + 1) % grid
    d_lo = _circ_dist(theta, lo * step)
    d_hi = _circ_dist(theta, hi * step)
    if d_lo < d_hi or math.isclose(d_lo, d_hi, rel_tol=0.0, abs_tol=1e-12):
        index = lo
    else:
        index = hi
    # a tie between grid-1 and 0 must still prefer the lower index
    if math.isclose(d_lo, d_hi, rel_tol=0.0, abs_tol=1e-12):
        index = min(lo, hi)
    return QuantizedPilot(user=user, grid=grid, index=index, phase=index * step)


def _circ_dist(a: float, b: float) -> float:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def encode_pilot(qp: QuantizedPilot, book: CfbgCodebook) -> tuple[int, np.ndarray]:
    """Map a quantized pilot to its user-half codeword (bijective per half)."""
    if qp.grid != book.half_size:
        raise ValueError(
            f"grid {qp.grid} does not match the per-user half size {book.half_size}"
        )
    base = 0 if qp.user == "B" else book.half_size
    idx = base + qp.index
    return idx, book.codeword(idx)


def decode_pilot(codeword_index: int, user: str, grid: int, book: CfbgCodebook) -> float:
    """Reference phase conveyed by a recovered codeword index."""
    if grid != book.half_size:
        raise ValueError("grid does not match the codebook half size")
    if book.half_of(codeword_index) != user:
        raise ValueError(f"codeword {codeword_index} is not in half {user!r}")
    base = 0 if user == "B" else book.half_size
    pos = codeword_index - base
    return pos * TWO_PI / grid


def activation_pattern(codeword: np.ndarray) -> np.ndarray:
    """Boolean per-block activation: transmit on block i iff digit i is 1."""
    return np.asarray(codeword) != 0


def observe_pattern(counts) -> ObservedCodeword:
    """Observed codeword from per-block detected counts (presence = count > 0)."""
    g_b = np.asarray(counts, dtype=np.int64)
    return ObservedCodeword(g_c=(g_b > 0).astype(np.int64), g_b=g_b)


def _halves(book: CfbgCodebook, indices) -> tuple[str, ...]:
    return tuple(book.half_of(i) for i in indices)


def _is_ambiguous(halves: tuple[str, ...]) -> bool:
    return len(halves) != len(set(halves)) if len(halves) <= 2 else (
        halves.count("B") > 1 or halves.count("C") > 1
    )


def bdcd_decode(g: ObservedCodeword, book: CfbgCodebook) -> BdcdVerdict:
    """Block-detection based codeword decoding of one observed double codeword.

    Registry lookup of the presence pattern over all sums of up to three
    codewords; an all-ones pattern (when it is itself a registry member) is
    disambiguated by reducing single-count digits, which by the
    block-detection property never leaves a decomposable pattern unless the
    counts carry a jamming offset; a registry miss is treated as jamming and
    retried with all counts reduced by one; a two-codeword split is accepted
    only when both constituents' supports carry equal count mass, otherwise
    a duplicated codeword is declared a separation error.
    """
    g_c = np.asarray(g.g_c, dtype=np.int64)
    g_b = np.asarray(g.g_b, dtype=np.int64)
    if len(g_c) != book.width:
        raise ValueError("observed codeword length does not match the codebook")
    hit = book.decompose(g_c)
    if hit is None:
        # jamming suspected: strip one signal everywhere and retry
        reduced = np.clip(g_b - 1, 0, None)
        again = book.decompose((reduced > 0).astype(np.int64))
        if again is None:
            return BdcdVerdict(Classification.JAMMING, (), ())
        halves = _halves(book, again)
        return BdcdVerdict(
            Classification.JAMMING, tuple(again), halves, _is_ambiguous(halves)
        )
    if g_c.all():
        ones = np.flatnonzero(g_b == 1)
        if ones.size:
            reduced = g_b.copy()
            reduced[ones] = 0
            again = book.decompose((reduced > 0).astype(np.int64))
            if again is not None:
                halves = _halves(book, again)
                return BdcdVerdict(
                    Classification.JAMMING, tuple(again), halves, _is_ambiguous(halves)
                )
            halves = _halves(book, hit)
            return BdcdVerdict(
                Classification.NO_ATTACK, tuple(hit), halves, _is_ambiguous(halves)
            )
        reduced = np.clip(g_b - 1, 0, None)
        again = book.decompose((reduced > 0).astype(np.int64))
        if again is None:
            return BdcdVerdict(Classification.JAMMING, (), ())
        halves = _halves(book, again)
        return BdcdVerdict(
            Classification.JAMMING, tuple(again), halves, _is_ambiguous(halves)
        )
    if len(hit) == 3:
        halves = _halves(book, hit)
        return BdcdVerdict(
            Classification.NO_ATTACK, tuple(hit), halves, _is_ambiguous(halves)
        )
    if len(hit) == 2:
        halves = _halves(book, hit)
        if set(halves) != {"B", "C"}:
            return BdcdVerdict(
                Classification.SEPARATION_ERROR, tuple(hit), halves, True
            )
        first = hit[0] if halves[0] == "B" else hit[1]
        second = hit[1] if halves[0] == "B" else hit[0]
        s1 = int(g_b[book.codeword(first) != 0].sum())
        s2 = int(g_b[book.codeword(second) != 0].sum())
        if s1 == s2:
            return BdcdVerdict(
                Classification.SILENT_OR_ABSENT, (first, second), ("B", "C")
            )
        return BdcdVerdict(
            Classification.SEPARATION_ERROR, (first, second), ("B", "C")
        )
    # single-codeword pattern: one user's activation was lost upstream
    halves = _halves(book, hit)
    return BdcdVerdict(Classification.SEPARATION_ERROR, tuple(hit), halves)


def sep_formula(n_b: float, n_total: float, n_rx: float) -> tuple[float, float]:
    """Separation error probability (and dB value) of the k = 3 construction.

    SEP = (7 N_B / (N_Total N_T))^3, the reciprocal codebook size when the
    implied alphabet q = N_Total N_T / (7 N_B) is at least 3.
    """
    q = n_total * n_rx / (7.0 * n_b)
    if q < 3:
        raise ValueError(f"implied alphabet size {q:.3g} below the k=3 minimum of 3")
    sep = (7.0 * n_b / (n_total * n_rx)) ** 3
    return sep, 10.0 * math.log10(sep)
