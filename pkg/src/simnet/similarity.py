"""Per-feature pairwise similarities and their weighted fusion.

API-call sequences are compared with Nilsimsa locality-sensitive hashing;
the three string-set features use Jaccard.  All four n×n matrices are
computed once into a SimilarityTensor; fusing them under a WeightVector is
a linear reweighting, so weight search never touches raw features again.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .dataset import Dataset, Sample

FEATURES = ("api", "permission", "activity", "file")

# Classic Nilsimsa trigram transition table (the 53-based permutation of
# 0..255 from the original implementation).
_TRAN_HEX = (
    "02D69E6FF91D04ABD022161FD873A1AC"
    "3B7062961E6E8F399D05144AA6BEAE0E"
    "CFB99C9AC76813E12DA4EB518D646B50"
    "23800341ECBB71CC7A867F98F2365EEE"
    "8ECE4FB832B65F59DC1B314C7BF06301"
    "6CBA07E81277493CDA46FE2F791C9B30"
    "E300067E2E0F383321ADA554CAA729FC"
    "5A47697DC595B5F40B90A3816D255535"
    "F575740A26BF195C1AC6FF995D84AA66"
    "3EAF78B32043C1ED24EAE63F18F3A042"
    "57085360C3C0834082D709BD442A67A8"
    "93E0C2569FD9DD8515B48A27289276DE"
    "EFF8B2B7C93D45944B110D65D5348B91"
    "0CFA87E97C5BB14DE5D4CB10A21789BC"
    "DBB0E2978852F748D3612C3A2BD18CFB"
    "F1CDE46AE7A9FDC437C8D2F6DF58724E"
)
TRAN = bytes.fromhex(_TRAN_HEX)
_T = np.frombuffer(TRAN, dtype=np.uint8).astype(np.int64)

_SEPARATOR = b"\n"


class OpCounters:
    """Tallies of expensive raw-feature evaluations.

    Exists so tests can assert that weight optimization only reweights the
    cached tensor: snapshot before, compare after, expect no change.
    """

    def __init__(self):
        self.digest_calls = 0
        self.jaccard_calls = 0
        self.tensor_builds = 0

    def snapshot(self) -> dict[str, int]:
        return {
            "digest_calls": self.digest_calls,
            "jaccard_calls": self.jaccard_calls,
            "tensor_builds": self.tensor_builds,
        }

    def reset(self) -> None:
        self.digest_calls = 0
        self.jaccard_calls = 0
        self.tensor_builds = 0


counters = OpCounters()


# ---------------------------------------------------------------------------
# Nilsimsa
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NilsimsaDigest:
    """A 256-bit Nilsimsa digest."""

    bits: bytes

    def __post_init__(self):
        if len(self.bits) != 32:
            raise ValueError("digest must be exactly 32 bytes")

    def hex(self) -> str:
        return self.bits.hex()


def _tran3(a: np.ndarray, b: np.ndarray, c: np.ndarray, n: int) -> np.ndarray:
    """Hash one trigram family: arrays of window bytes -> bucket indices."""
    return ((_T[(a + n) & 255] ^ (_T[b] * (n + n + 1))) + _T[c ^ _T[n]]) & 255


def _accumulate(x: np.ndarray) -> tuple[np.ndarray, int]:
    """Bucket counts and trigram total for one byte string (as int array).

    A 5-byte window slides over the input; each position past the ramp-up
    contributes 8 trigram combinations.  Slicing per combination reproduces
    the windowed scan without the per-byte loop.
    """
    acc = np.zeros(256, dtype=np.int64)
    total = 0
    n = x.shape[0]
    if n >= 3:
        combos = [(x[2:], x[1:-1], x[:-2], 0)]
        if n >= 4:
            combos += [
                (x[3:], x[2:-1], x[:-3], 1),
                (x[3:], x[1:-2], x[:-3], 2),
            ]
        if n >= 5:
            ch, w0, w1, w2, w3 = x[4:], x[3:-1], x[2:-2], x[1:-3], x[:-4]
            combos += [
                (ch, w0, w3, 3),
                (ch, w1, w3, 4),
                (ch, w2, w3, 5),
                (w3, w0, ch, 6),
                (w3, w2, ch, 7),
            ]
        for a, b, c, k in combos:
            acc += np.bincount(_tran3(a, b, c, k), minlength=256)
            total += a.shape[0]
    return acc, total


def _pack_digest(acc: np.ndarray, total: int) -> bytes:
    if total == 0:
        return bytes(32)
    threshold = total // 256  # mean bucket count, floor — bit set iff strictly above
    bits = acc > threshold
    return np.packbits(bits, bitorder="little")[::-1].tobytes()


def nilsimsa_digest(data: bytes) -> NilsimsaDigest:
    """Digest a byte string; empty or sub-trigram input gives all-zero bits."""
    counters.digest_calls += 1
    x = np.frombuffer(bytes(data), dtype=np.uint8).astype(np.int64)
    return NilsimsaDigest(_pack_digest(*_accumulate(x)))


def nilsimsa_compare(a: NilsimsaDigest, b: NilsimsaDigest) -> int:
    """128 minus the number of differing bits; in [-128, 128]."""
    diff = (int.from_bytes(a.bits, "big") ^ int.from_bytes(b.bits, "big")).bit_count()
    return 128 - diff


def _serialize_sequence(seq: Iterable[str]) -> bytes:
    # separator byte keeps token boundaries from colliding ("ab","c" vs "a","bc")
    return _SEPARATOR.join(tok.encode("utf-8") for tok in seq)


def _score_to_unit(score: int) -> float:
    return (score / 128.0 + 1.0) / 2.0


def api_similarity(a: Sample, b: Sample) -> float:
    """Nilsimsa similarity of two API sequences, rescaled to [0, 1]."""
    da = nilsimsa_digest(_serialize_sequence(a.api_sequence))
    db = nilsimsa_digest(_serialize_sequence(b.api_sequence))
    return _score_to_unit(nilsimsa_compare(da, db))


# ---------------------------------------------------------------------------
# Jaccard
# ---------------------------------------------------------------------------

def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    """|A∩B| / |A∪B|.  Two empty sets are equal (1.0); one empty gives 0.0."""
    counters.jaccard_calls += 1
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    inter = len(sa & sb)
    return inter / (len(sa) + len(sb) - inter)


# ---------------------------------------------------------------------------
# Weights and the tensor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightVector:
    """Simplex weights over (api, permission, activity, file)."""

    w_api: float
    w_permission: float
    w_activity: float
    w_file: float

    def __post_init__(self):
        vals = self.as_tuple()
        if any(v < 0.0 for v in vals):
            raise ValueError(f"weights must be nonnegative: {vals}")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1: {vals}")

    @classmethod
    def equal(cls) -> "WeightVector":
        return cls(0.25, 0.25, 0.25, 0.25)

    @classmethod
    def from_array(cls, arr) -> "WeightVector":
        return cls(*(float(v) for v in arr))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w_api, self.w_permission, self.w_activity, self.w_file)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURES, self.as_tuple()))


@dataclass(frozen=True, eq=False)
class SimilarityTensor:
    """Four symmetric n×n per-feature similarity matrices plus row order."""

    sample_order: tuple[str, ...]
    api: np.ndarray
    permission: np.ndarray
    activity: np.ndarray
    file: np.ndarray

    def __post_init__(self):
        n = len(self.sample_order)
        for name, m in zip(FEATURES, self.matrices()):
            if m.shape != (n, n):
                raise ValueError(f"{name} matrix shape {m.shape} != ({n}, {n})")

    @property
    def n(self) -> int:
        return len(self.sample_order)

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.api, self.permission, self.activity, self.file)

    def matrix(self, feature: str) -> np.ndarray:
        return self.matrices()[FEATURES.index(feature)]

    def subset(self, indices) -> "SimilarityTensor":
        idx = np.asarray(indices, dtype=np.int64)
        order = tuple(self.sample_order[i] for i in idx)
        sub = tuple(np.ascontiguousarray(m[np.ix_(idx, idx)]) for m in self.matrices())
        return SimilarityTensor(order, *sub)

    # Cache format: one JSON header line, then the four float64 matrices as
    # raw C-order blobs.  Hand-rolled instead of npz because zip containers
    # embed timestamps and the cache must be byte-stable across runs.
    FORMAT_VERSION = 1

    def save(self, path) -> None:
        header = {
            "format_version": self.FORMAT_VERSION,
            "n": self.n,
            "features": list(FEATURES),
            "sample_order": list(self.sample_order),
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, separators=(",", ":")).encode("ascii"))
            fh.write(b"\n")
            for m in self.matrices():
                fh.write(np.ascontiguousarray(m, dtype=np.float64).tobytes())

    @classmethod
    def load(cls, path) -> "SimilarityTensor":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("ascii"))
            if header.get("format_version") != cls.FORMAT_VERSION:
                raise ValueError(
                    f"unsupported tensor cache version: {header.get('format_version')!r}")
            n = int(header["n"])
            order = tuple(header["sample_order"])
            if len(order) != n:
                raise ValueError("corrupt tensor cache: sample_order length mismatch")
            mats = []
            for _ in FEATURES:
                buf = fh.read(n * n * 8)
                if len(buf) != n * n * 8:
                    raise ValueError("corrupt tensor cache: truncated matrix block")
                mats.append(np.frombuffer(buf, dtype=np.float64).reshape(n, n).copy())
        return cls(order, *mats)


def _digest_rows(ds: Dataset) -> np.ndarray:
    """Stack every sample's sequence digest into an (n, 32) uint8 array."""
    out = np.empty((len(ds), 32), dtype=np.uint8)
    for i, s in enumerate(ds):
        x = np.frombuffer(_serialize_sequence(s.api_sequence), dtype=np.uint8)
        out[i] = np.frombuffer(_pack_digest(*_accumulate(x.astype(np.int64))), dtype=np.uint8)
    counters.digest_calls += len(ds)
    return out


def _compare_matrix(digests: np.ndarray, block: int = 256) -> np.ndarray:
    """Pairwise rescaled Nilsimsa scores from stacked digests."""
    n = digests.shape[0]
    sim = np.empty((n, n), dtype=np.float64)
    for lo in range(0, n, block):  # block rows to bound the xor cube's memory
        hi = min(lo + block, n)
        xor = digests[lo:hi, None, :] ^ digests[None, :, :]
        diff = np.bitwise_count(xor).sum(axis=2, dtype=np.int64)
        sim[lo:hi] = ((128 - diff) / 128.0 + 1.0) / 2.0
    np.fill_diagonal(sim, 1.0)
    return sim


def _jaccard_matrix(sets: list[frozenset[str]]) -> np.ndarray:
    """Pairwise Jaccard over a list of sets via a token-incidence matrix."""
    n = len(sets)
    vocab = sorted(set().union(*sets)) if sets else []
    index = {tok: j for j, tok in enumerate(vocab)}
    m = np.zeros((n, len(vocab) + 1), dtype=np.int32)  # +1 pads the all-empty case
    for i, s in enumerate(sets):
        for tok in s:
            m[i, index[tok]] = 1
    inter = m @ m.T
    sizes = m.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    counters.jaccard_calls += n * (n - 1) // 2
    with np.errstate(invalid="ignore"):
        sim = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
    np.fill_diagonal(sim, 1.0)
    return sim


def build_similarity_tensor(ds: Dataset) -> SimilarityTensor:
    """Compute all four pairwise similarity matrices for a dataset."""
    if len(ds) == 0:
        raise ValueError("cannot build a similarity tensor from an empty dataset")
    counters.tensor_builds += 1
    api = _compare_matrix(_digest_rows(ds))
    permission = _jaccard_matrix([s.permissions for s in ds])
    activity = _jaccard_matrix([s.activity_names for s in ds])
    file_ = _jaccard_matrix([s.file_names for s in ds])
    return SimilarityTensor(ds.ids, api, permission, activity, file_)


def fused_matrix(t: SimilarityTensor, w: WeightVector) -> np.ndarray:
    """Weighted fusion of all four matrices.

    Accumulates in fixed feature order so every entry is bit-identical to
    the scalar final_similarity value.
    """
    ws = w.as_tuple()
    out = ws[0] * t.api
    out += ws[1] * t.permission
    out += ws[2] * t.activity
    out += ws[3] * t.file
    return out


def final_similarity(t: SimilarityTensor, w: WeightVector, i: int, j: int) -> float:
    """Fused similarity of one pair: w · (S_api, S_perm, S_act, S_file)."""
    n = t.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pair ({i}, {j}) out of range for {n} samples")
    ws = w.as_tuple()
    return float(ws[0] * t.api[i, j] + ws[1] * t.permission[i, j]
                 + ws[2] * t.activity[i, j] + ws[3] * t.file[i, j])
