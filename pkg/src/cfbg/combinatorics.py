"""Superimposed-code combinatorics: MDS codes, Latin cubes, ZFD/BD codes, codebook.

The block-group codebook is a constant-weight binary code over subcarrier
block-activation patterns, built in three steps:

1. an MDS code over a prime field (polynomial evaluation, extended by the
   leading coefficient when the length requires one extra coordinate);
2. positional expansion of each q-ary digit into a weight-one binary
   q-tuple, giving a zero-false-drop (ZFD) superimposed code of order 3:
   Boolean sums of up to three codewords include no outside codeword and
   are mutually distinct;
3. the same codewords under digitwise integer addition form the
   block-detection (BD) code, whose single-count digits expose wideband
   jamming.

Everything here is value-semantic; a built codebook is immutable and safe
to share across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CodeParameterError",
    "EnumerationBudgetError",
    "sp_sum",
    "asp_sum",
    "includes",
    "MdsCode",
    "build_mds_code",
    "LatinCubeSet",
    "latin_cubes_from_mds",
    "is_latin_cube",
    "are_mutually_orthogonal",
    "mds_to_zfd",
    "VerifyReport",
    "verify_zfd",
    "verify_bd_property",
    "CfbgCodebook",
    "build_cfbg_codebook",
    "save_codebook",
    "load_codebook",
]

VERIFY_BUDGET = 10**8  # hard cap on subset checks; exceeded -> explicit error


class CodeParameterError(ValueError):
    """Code parameters violate the construction's constraints."""


class EnumerationBudgetError(RuntimeError):
    """An exhaustive verification would exceed its subset-check budget."""


# ---------------------------------------------------------------------------
# superposition arithmetic
# ---------------------------------------------------------------------------

def sp_sum(x, y) -> np.ndarray:
    """Digit-by-digit Boolean sum of two binary vectors (0 iff both digits 0)."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return ((x != 0) | (y != 0)).astype(np.int64)


def asp_sum(x, y) -> np.ndarray:
    """Digit-by-digit integer sum of two non-negative integer vectors."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if (x < 0).any() or (y < 0).any():
        raise ValueError("digits must be non-negative")
    return x + y


def includes(x, y) -> bool:
    """True if binary vector x includes y, i.e. sp_sum(x, y) == x."""
    x = np.asarray(x)
    y = np.asarray(y)
    return bool(np.array_equal(sp_sum(x, y), (x != 0).astype(np.int64)))


# ---------------------------------------------------------------------------
# MDS codes over prime fields
# ---------------------------------------------------------------------------

def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    for p in range(2, int(q**0.5) + 1):
        if q % p == 0:
            return False
    return True


@dataclass(frozen=True)
class MdsCode:
    """A q-ary MDS code of size q^k, length n = 3k-2, distance n-k+1."""

    q: int
    k: int
    n: int
    r: int
    codewords: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.codewords)

    @property
    def distance(self) -> int:
        return self.n - self.k + 1

    @property
    def order(self) -> int:
        # superposition order m = (n-1)/(k-1); 3 by construction here
        return (self.n - 1) // (self.k - 1)


def build_mds_code(q: int, k: int) -> MdsCode:
    """Build the order-3 MDS code of dimension k over the prime field GF(q).

    Codewords are evaluations of all degree-<k polynomials at the points
    0, 1, ..., n-1 in canonical order.  When n = q + 1 the final coordinate
    is the leading coefficient (singly extended code); the code stays MDS.
    The first k coordinates biject with the message, which is what the
    Latin-cube view (see latin_cubes_from_mds) relies on.
    """
    if not _is_prime(q):
        raise CodeParameterError(f"alphabet size q={q} must be prime")
    if k < 2:
        raise CodeParameterError(f"dimension k={k} must be at least 2")
    if 3 * k > q + 3:
        raise CodeParameterError(
            f"k={k} exceeds the admissible range 2 <= k <= (q+3)/3 for q={q}"
        )
    n = 3 * k - 2
    if n > q + 1:
        raise CodeParameterError(f"length n={n} exceeds q+1={q+1} evaluation points")
    extended = n == q + 1
    points = list(range(n if not extended else q))
    words = []
    for msg in itertools.product(range(q), repeat=k):
        w = [sum(c * pow(x, e, q) for e, c in enumerate(msg)) % q for x in points]
        if extended:
            w.append(msg[-1])
        words.append(tuple(w))
    return MdsCode(q=q, k=k, n=n, r=n - k, codewords=tuple(words))


# ---------------------------------------------------------------------------
# Latin cubes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatinCubeSet:
    """r mutually orthogonal Latin 3-cubes of order q, entries in 1..q."""

    q: int
    k: int
    cubes: tuple[np.ndarray, ...]


def is_latin_cube(cube: np.ndarray) -> bool:
    """Every axis-aligned line of the cube is a permutation of 1..q."""
    q = cube.shape[0]
    want = frozenset(range(1, q + 1))
    for axis in range(3):
        moved = np.moveaxis(cube, axis, 0)
        for i in range(q):
            for j in range(q):
                if frozenset(moved[:, i, j].tolist()) != want:
                    return False
    return True


def are_mutually_orthogonal(cubes) -> bool:
    """Equal value-tuples across all cubes force equal coordinates."""
    seen = set()
    q = cubes[0].shape[0]
    for idx in itertools.product(range(q), repeat=3):
        key = tuple(int(c[idx]) for c in cubes)
        if key in seen:
            return False
        seen.add(key)
    return True


def latin_cubes_from_mds(mds: MdsCode) -> LatinCubeSet:
    """Reindex a k=3 MDS code as its r orthogonal Latin cubes.

    The first three codeword coordinates address the cube cell; parity
    coordinate l is cube l's entry there.
    """
    if mds.k != 3:
        raise CodeParameterError(f"Latin-cube view requires k=3, got k={mds.k}")
    q = mds.q
    cubes = [np.zeros((q, q, q), dtype=np.int64) for _ in range(mds.r)]
    for w in mds.codewords:
        i1, i2, i3 = w[0], w[1], w[2]
        for l in range(mds.r):
            cubes[l][i1, i2, i3] = w[3 + l] + 1
    return LatinCubeSet(q=q, k=3, cubes=tuple(cubes))


# ---------------------------------------------------------------------------
# ZFD / BD codes
# ---------------------------------------------------------------------------

def mds_to_zfd(mds: MdsCode) -> np.ndarray:
    """Expand each q-ary digit into a weight-one binary q-tuple.

    Digit value s becomes the q-bit group with a single 1 at position s.
    Output shape (C, n*q); every row has weight exactly n.
    """
    q, n = mds.q, mds.n
    out = np.zeros((mds.size, n * q), dtype=np.int8)
    for row, w in enumerate(mds.codewords):
        for i, s in enumerate(w):
            out[row, i * q + s] = 1
    return out


def _pack(bits: np.ndarray) -> int:
    v = 0
    for i, b in enumerate(bits):
        if b:
            v |= 1 << i
    return v


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    checks: int
    violation: tuple | None = None  # (kind, subset indices, offender/extra)


def verify_zfd(code: np.ndarray, m: int = 3, budget: int = VERIFY_BUDGET) -> VerifyReport:
    """Exhaustively verify the order-m zero-false-drop properties.

    For every Boolean sum of <= m distinct codewords: (a) no codeword
    outside the subset is included in the sum; (b) the map from subsets to
    sums is injective.  Returns the first violating subset if any.
    """
    if m > 3:
        raise CodeParameterError("only orders m <= 3 are enumerable here")
    code = np.asarray(code)
    c_count = code.shape[0]
    words = [_pack(code[i]) for i in range(c_count)]
    # budget forecast: each subset costs ~C inclusion checks
    total = 0
    for r in range(1, m + 1):
        binom = 1
        for t in range(r):
            binom = binom * (c_count - t) // (t + 1)
        total += binom
    if total * c_count > budget:
        raise EnumerationBudgetError(
            f"{total} subsets x {c_count} checks exceed budget {budget}"
        )
    seen: dict[int, tuple[int, ...]] = {}
    checks = 0
    for r in range(1, m + 1):
        for subset in itertools.combinations(range(c_count), r):
            s = 0
            for i in subset:
                s |= words[i]
            prev = seen.get(s)
            if prev is not None:
                return VerifyReport(False, checks, ("duplicate-sum", subset, prev))
            seen[s] = subset
            for j in range(c_count):
                checks += 1
                if j not in subset and (words[j] & s) == words[j]:
                    return VerifyReport(False, checks, ("inclusion", subset, j))
    return VerifyReport(True, checks)


def verify_bd_property(code: np.ndarray, budget: int = VERIFY_BUDGET) -> VerifyReport:
    """Exhaustively verify the block-detection property.

    For every digitwise integer sum of <= 3 distinct codewords, zeroing any
    single digit whose count is exactly 1 must leave a Boolean pattern that
    decomposes under no codeword subset (it falls outside the registry of
    all Boolean sums of <= 3 codewords).
    """
    code = np.asarray(code, dtype=np.int16)
    c_count, width = code.shape
    words = [_pack(code[i]) for i in range(c_count)]
    registry = set()
    total = 0
    for r in range(1, 4):
        binom = 1
        for t in range(r):
            binom = binom * (c_count - t) // (t + 1)
        total += binom
    if total * (width + c_count) > budget:
        raise EnumerationBudgetError("subset enumeration exceeds budget")
    for r in range(1, 4):
        for subset in itertools.combinations(range(c_count), r):
            s = 0
            for i in subset:
                s |= words[i]
            registry.add(s)
    checks = 0
    for r in range(1, 4):
        for subset in itertools.combinations(range(c_count), r):
            d = code[list(subset)].sum(axis=0)
            pattern = 0
            for i in range(width):
                if d[i]:
                    pattern |= 1 << i
            for pos in np.flatnonzero(d == 1):
                checks += 1
                reduced = pattern & ~(1 << int(pos))
                if reduced in registry:
                    return VerifyReport(False, checks, ("reducible", subset, int(pos)))
    return VerifyReport(True, checks)


# ---------------------------------------------------------------------------
# the double-codeword codebook
# ---------------------------------------------------------------------------

# triple sums are materialized eagerly only while C'(C'-1)(C'-2)/6 stays small
_TRIPLE_MATERIALIZE_LIMIT = 1_000_000


@dataclass(frozen=True)
class CfbgCodebook:
    """Block-group codebook: ZFD codewords with halves and superposition sums.

    The same binary codewords are read under two arithmetics: Boolean sums
    for presence patterns, integer sums for per-block signal counts.  For
    odd code sizes the last codeword is dropped so both user halves hold
    floor(C/2) entries.  Pairwise sums are always precomputed; triple sums
    are precomputed only for small codebooks, otherwise decomposition falls
    back to an inclusion scan (equivalent by the zero-false-drop property).
    """

    q: int
    k: int
    n: int
    width: int  # B = n * q
    zfd: np.ndarray  # (C, B) int8, full code including any dropped codeword
    usable: int  # C' = 2 * floor(C/2)
    packed: tuple[int, ...] = field(repr=False)
    word_index: dict[int, int] = field(repr=False)
    pair_sums: dict[int, tuple[int, int]] = field(repr=False)
    triple_sums: dict[int, tuple[int, int, int]] | None = field(repr=False)

    @property
    def size(self) -> int:
        return self.zfd.shape[0]

    @property
    def half_size(self) -> int:
        return self.usable // 2

    @property
    def bob(self) -> range:
        return range(0, self.half_size)

    @property
    def charlie(self) -> range:
        return range(self.half_size, self.usable)

    def codeword(self, i: int) -> np.ndarray:
        return self.zfd[i]

    def half_of(self, i: int) -> str:
        if i < 0 or i >= self.usable:
            raise IndexError(f"codeword {i} outside the usable codebook")
        return "B" if i < self.half_size else "C"

    def pack(self, bits: np.ndarray) -> int:
        return _pack(np.asarray(bits))

    def decompose(self, pattern) -> tuple[int, ...] | None:
        """Constituents of a Boolean pattern if it is a sum of <= 3 codewords.

        Uniqueness of the answer is the injectivity half of the
        zero-false-drop property.  Returns None on a registry miss.
        """
        key = pattern if isinstance(pattern, int) else _pack(np.asarray(pattern))
        hit = self.word_index.get(key)
        if hit is not None:
            return (hit,)
        hit = self.pair_sums.get(key)
        if hit is not None:
            return hit
        if self.triple_sums is not None:
            return self.triple_sums.get(key)
        # inclusion scan: constituents are exactly the included codewords
        members = [i for i in range(self.usable) if (self.packed[i] & key) == self.packed[i]]
        if not 1 <= len(members) <= 3:
            return None
        s = 0
        for i in members:
            s |= self.packed[i]
        return tuple(members) if s == key else None


def build_cfbg_codebook(q: int, k: int, materialize_triples: bool | None = None) -> CfbgCodebook:
    """Construct the codebook for parameters (q, k); see build_mds_code for bounds."""
    mds = build_mds_code(q, k)
    zfd = mds_to_zfd(mds)
    c_total = zfd.shape[0]
    usable = 2 * (c_total // 2)
    packed = tuple(_pack(zfd[i]) for i in range(c_total))
    word_index = {packed[i]: i for i in range(usable)}
    pair_sums: dict[int, tuple[int, int]] = {}
    for i, j in itertools.combinations(range(usable), 2):
        pair_sums[packed[i] | packed[j]] = (i, j)
    n_triples = usable * (usable - 1) * (usable - 2) // 6
    if materialize_triples is None:
        materialize_triples = n_triples <= _TRIPLE_MATERIALIZE_LIMIT
    triple_sums = None
    if materialize_triples:
        triple_sums = {}
        for i, j, l in itertools.combinations(range(usable), 3):
            triple_sums[packed[i] | packed[j] | packed[l]] = (i, j, l)
    return CfbgCodebook(
        q=q,
        k=k,
        n=mds.n,
        width=zfd.shape[1],
        zfd=zfd,
        usable=usable,
        packed=packed,
        word_index=word_index,
        pair_sums=pair_sums,
        triple_sums=triple_sums,
    )


def save_codebook(book: CfbgCodebook, path: str) -> None:
    """Write the versioned text format: header then one 0/1 row per codeword."""
    with open(path, "w", encoding="ascii") as f:
        f.write(f"cfbg {book.q} {book.k} {book.n} {book.width} {book.size}\n")
        for i in range(book.size):
            f.write("".join("1" if b else "0" for b in book.zfd[i]) + "\n")


def load_codebook(path: str) -> CfbgCodebook:
    """Load a codebook written by save_codebook; halves and sums are rebuilt."""
    with open(path, encoding="ascii") as f:
        header = f.readline().split()
        if len(header) != 6 or header[0] != "cfbg":
            raise ValueError(f"{path}: not a cfbg codebook file")
        q, k, n, width, count = (int(t) for t in header[1:])
        rows = []
        for _ in range(count):
            line = f.readline().strip()
            if len(line) != width or set(line) - {"0", "1"}:
                raise ValueError(f"{path}: malformed codeword row")
            rows.append([int(ch) for ch in line])
    book = build_cfbg_codebook(q, k)
    if book.n != n or book.width != width or book.size != count:
        raise ValueError(f"{path}: header inconsistent with parameters")
    if not np.array_equal(book.zfd, np.asarray(rows, dtype=np.int8)):
        raise ValueError(f"{path}: codeword rows do not match the canonical construction")
    return book
