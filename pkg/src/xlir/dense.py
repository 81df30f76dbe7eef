"""Late-interaction dense retrieval over compressed token embeddings.

Every passage is a matrix of unit-normalized token vectors. Indexing trains a
centroid codebook with spherical k-means, stores each token as its nearest
centroid id plus a b-bit-per-dimension quantized residual, and builds an
inverted map from centroid id to the passages containing it. Search runs in
three stages: centroid probing per query token to collect candidate passages,
ranking candidates by a centroid-only approximation of MaxSim, then exact
MaxSim over decompressed token vectors for the surviving candidates.

Embedding file format (all integers little-endian):

    magic    5 bytes   b"LIEMB"
    version  u32       currently 1
    dim      u32
    count    u64       number of passages
    per passage: key_len u16, key bytes (UTF-8), token_count u32,
                 token_count * dim float32 values (row-major)

Index directory layout: ``meta.json`` (format, version, parameters),
``centroids.npy``, ``bucket_boundaries.npy``, ``bucket_values.npy``,
``keys.txt`` (one passage key per line), ``token_counts.npy``,
``centroid_ids.npy`` (concatenated per passage), ``packed_codes.npy``
(per-passage bit-packed residual codes, each passage padded to a byte
boundary and concatenated).
"""

from __future__ import annotations

import json
import logging
import math
import struct
import time
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

logger = logging.getLogger(__name__)

EMBEDDING_MAGIC = b"LIEMB"
EMBEDDING_VERSION = 1
NORM_TOLERANCE = 1e-4

INDEX_FORMAT = "xlir-dense-index"
INDEX_VERSION = 1

# Mapping from passage key to (token_count, dim) float32 matrix.
TokenEmbeddings = dict[str, np.ndarray]


@dataclass
class DenseIndexParams:
    """Indexing and search parameters.

    ``num_centroids`` of ``None`` selects ``2 ** ceil(log2(16 * sqrt(T)))``
    for T total tokens at training time. ``candidate_cap`` bounds how many
    candidate passages are fully scored per query.
    """

    bits: int = 1
    num_centroids: int | None = None
    nprobe: int = 4
    candidate_cap: int = 2500
    kmeans_iters: int = 20
    sample_per_centroid: int = 256
    seed: int = 0

    def validate(self) -> None:
        if not 1 <= self.bits <= 8:
            raise ValidationError(f"bits must be in [1, 8], got {self.bits}")
        if self.num_centroids is not None and self.num_centroids < 1:
            raise ValidationError(f"num_centroids must be >= 1, got {self.num_centroids}")
        if self.nprobe < 1:
            raise ValidationError(f"nprobe must be >= 1, got {self.nprobe}")
        if self.candidate_cap < 1:
            raise ValidationError(f"candidate_cap must be >= 1, got {self.candidate_cap}")
        if self.kmeans_iters < 1:
            raise ValidationError(f"kmeans_iters must be >= 1, got {self.kmeans_iters}")

    @staticmethod
    def default_num_centroids(total_tokens: int) -> int:
        return 2 ** math.ceil(math.log2(16.0 * math.sqrt(total_tokens)))


def write_embeddings(path: str | Path, embeddings: Mapping[str, np.ndarray]) -> None:
    """Write passage token matrices in the binary embedding format."""
    items = list(embeddings.items())
    if not items:
        raise ValidationError("refusing to write an embedding file with no passages")
    dim = int(items[0][1].shape[1])
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<IIQ", EMBEDDING_VERSION, dim, len(items)))
        for key, matrix in items:
            matrix = np.asarray(matrix, dtype=np.float32)
            if matrix.ndim != 2 or matrix.shape[1] != dim:
                raise ValidationError(f"passage {key!r}: expected shape (*, {dim}), got {matrix.shape}")
            key_bytes = key.encode("utf-8")
            fh.write(struct.pack("<H", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(struct.pack("<I", matrix.shape[0]))
            fh.write(matrix.astype("<f4").tobytes(order="C"))


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated embedding file while reading {what}")
    return data


def load_embeddings(path: str | Path) -> TokenEmbeddings:
    """Read an embedding file, validating the header and per-vector norms."""
    embeddings: TokenEmbeddings = {}
    with open(path, "rb") as fh:
        magic = fh.read(len(EMBEDDING_MAGIC))
        if magic != EMBEDDING_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {EMBEDDING_MAGIC!r}")
        version, dim, count = struct.unpack("<IIQ", _read_exact(fh, 16, "header"))
        if version != EMBEDDING_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if dim < 1:
            raise FormatError(f"{path}: non-positive dimension {dim}")
        for i in range(count):
            (key_len,) = struct.unpack("<H", _read_exact(fh, 2, f"record {i} key length"))
            key = _read_exact(fh, key_len, f"record {i} key").decode("utf-8")
            (token_count,) = struct.unpack("<I", _read_exact(fh, 4, f"{key!r} token count"))
            if token_count == 0:
                raise ValidationError(f"{path}: passage {key!r} has no tokens")
            raw = _read_exact(fh, token_count * dim * 4, f"{key!r} vectors")
            matrix = np.frombuffer(raw, dtype="<f4").reshape(token_count, dim).copy()
            norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
            bad = np.abs(norms - 1.0) > NORM_TOLERANCE
            if bad.any():
                j = int(np.argmax(bad))
                raise ValidationError(
                    f"{path}: passage {key!r} token {j} has norm {norms[j]:.6f}, expected 1"
                )
            if key in embeddings:
                raise ValidationError(f"{path}: duplicate passage key {key!r}")
            embeddings[key] = matrix
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after {count} records")
    return embeddings


@dataclass
class ResidualCodebook:
    """Centroids plus per-dimension residual quantization buckets.

    ``boundaries[d]`` holds the 2**bits - 1 bucket cut points of dimension
    ``d`` and ``values[d]`` the 2**bits reconstruction values, strictly
    increasing. With 1 bit the single boundary sits at zero and the values
    are the mean negative and mean non-negative training residuals.
    """

    centroids: np.ndarray  # (K, dim) float32, unit rows
    boundaries: np.ndarray  # (dim, 2**bits - 1) float64
    values: np.ndarray  # (dim, 2**bits) float64
    bits: int

    @property
    def num_centroids(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    def validate(self) -> None:
        levels = 2**self.bits
        if self.boundaries.shape != (self.dim, levels - 1):
            raise ValidationError(f"boundaries shape {self.boundaries.shape} != {(self.dim, levels - 1)}")
        if self.values.shape != (self.dim, levels):
            raise ValidationError(f"values shape {self.values.shape} != {(self.dim, levels)}")
        if not (np.diff(self.values, axis=1) > 0).all():
            raise ValidationError("bucket reconstruction values must be strictly increasing per dimension")


@dataclass
class CompressedPassage:
    key: str
    centroid_ids: np.ndarray  # (num_tokens,) int32
    packed_codes: np.ndarray  # (ceil(num_tokens * dim * bits / 8),) uint8
    num_tokens: int


def _stack_tokens(embeddings: Mapping[str, np.ndarray]) -> np.ndarray:
    matrices = [np.asarray(m, dtype=np.float64) for m in embeddings.values()]
    if not matrices:
        raise ValidationError("no embeddings to train on")
    return np.vstack(matrices)


def _bucketize(residuals: np.ndarray, boundaries: np.ndarray) -> np.ndarray:
    # searchsorted(side="right") per dimension: count of boundaries <= r.
    return (residuals[:, :, None] >= boundaries[None, :, :]).sum(axis=2).astype(np.uint8)


_ASSIGN_BLOCK = 16384


def _assign_nearest(vectors: np.ndarray, centroids_t: np.ndarray) -> np.ndarray:
    """Argmax dot-product assignment, blocked to bound peak memory."""
    out = np.empty(vectors.shape[0], dtype=np.int64)
    for start in range(0, vectors.shape[0], _ASSIGN_BLOCK):
        block = vectors[start : start + _ASSIGN_BLOCK]
        out[start : start + _ASSIGN_BLOCK] = np.argmax(block @ centroids_t, axis=1)
    return out


def _bucket_stats(residuals: np.ndarray, boundaries: np.ndarray, bits: int) -> np.ndarray:
    """Per-dimension reconstruction values: mean residual per bucket.

    Empty buckets fall back to the bucket midpoint, with the unbounded outer
    edges clipped to the observed residual range extended by one span.
    """
    dim = residuals.shape[1]
    levels = 2**bits
    codes = _bucketize(residuals, boundaries)
    values = np.empty((dim, levels), dtype=np.float64)
    for d in range(dim):
        col = residuals[:, d]
        r_min, r_max = float(col.min()), float(col.max())
        span = max(r_max - r_min, 1e-6)
        edges = np.concatenate(([r_min - span], boundaries[d], [r_max + span]))
        for level in range(levels):
            members = col[codes[:, d] == level]
            if members.size:
                values[d, level] = members.mean()
            else:
                values[d, level] = 0.5 * (edges[level] + edges[level + 1])
    return values


def train_codebook(
    embeddings: Mapping[str, np.ndarray], params: DenseIndexParams | None = None
) -> ResidualCodebook:
    """Spherical k-means over a seeded token sample plus residual bucket fitting.

    Centroids are renormalized to unit length after every update; empty
    clusters keep their previous centroid. Residual buckets are fit on the
    same sample: boundaries at empirical quantiles (fixed at zero for 1 bit)
    and reconstruction values at within-bucket means.
    """
    params = params if params is not None else DenseIndexParams()
    params.validate()
    tokens = _stack_tokens(embeddings)
    total = tokens.shape[0]
    k = params.num_centroids or DenseIndexParams.default_num_centroids(total)
    if total < k:
        raise ValidationError(
            f"{total} training tokens for {k} centroids; set num_centroids <= {total}"
        )
    rng = np.random.default_rng(params.seed)
    sample_size = min(total, params.sample_per_centroid * k)
    sample = tokens[rng.permutation(total)[:sample_size]]

    centroids = sample[rng.choice(sample_size, size=k, replace=False)].copy()
    norms = np.linalg.norm(centroids, axis=1, keepdims=True)
    centroids /= np.where(norms > 0, norms, 1.0)
    for _ in range(params.kmeans_iters):
        assign = _assign_nearest(sample, centroids.T)
        for c in range(k):
            members = sample[assign == c]
            if members.size == 0:
                continue
            mean = members.mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 0:
                centroids[c] = mean / norm

    # Fit residual buckets against the rounded centroids compression will use.
    stored = centroids.astype(np.float32)
    assign = _assign_nearest(sample, stored.astype(np.float64).T)
    residuals = sample - stored.astype(np.float64)[assign]
    levels = 2**params.bits
    if params.bits == 1:
        boundaries = np.zeros((tokens.shape[1], 1), dtype=np.float64)
    else:
        quantiles = np.arange(1, levels) / levels
        boundaries = np.quantile(residuals, quantiles, axis=0).T
    values = _bucket_stats(residuals, boundaries, params.bits)

    codebook = ResidualCodebook(
        centroids=stored,
        boundaries=boundaries,
        values=values,
        bits=params.bits,
    )
    codebook.validate()
    return codebook


def _pack_codes(codes: np.ndarray, bits: int) -> np.ndarray:
    shifts = np.arange(bits - 1, -1, -1, dtype=np.uint8)
    bitstream = ((codes[:, :, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
    return np.packbits(bitstream)


def _unpack_codes(packed: np.ndarray, num_tokens: int, dim: int, bits: int) -> np.ndarray:
    total_bits = num_tokens * dim * bits
    bitstream = np.unpackbits(packed, count=total_bits).reshape(num_tokens, dim, bits)
    shifts = np.arange(bits - 1, -1, -1, dtype=np.uint8)
    return (bitstream.astype(np.uint8) << shifts).sum(axis=2).astype(np.uint8)


def compress(vectors: np.ndarray, codebook: ResidualCodebook, key: str = "") -> CompressedPassage:
    """Encode token vectors as nearest-centroid ids plus packed residual codes."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != codebook.dim:
        raise ValidationError(f"expected shape (*, {codebook.dim}), got {vectors.shape}")
    centroids = codebook.centroids.astype(np.float64)
    ids = np.argmax(vectors @ centroids.T, axis=1).astype(np.int32)
    residuals = vectors - centroids[ids]
    codes = _bucketize(residuals, codebook.boundaries)
    return CompressedPassage(
        key=key,
        centroid_ids=ids,
        packed_codes=_pack_codes(codes, codebook.bits),
        num_tokens=int(vectors.shape[0]),
    )


def decompress(compressed: CompressedPassage, codebook: ResidualCodebook) -> np.ndarray:
    """Reconstruct token vectors: centroid plus per-dimension bucket values.

    The result is intentionally not renormalized.
    """
    ids = compressed.centroid_ids
    if len(ids) != compressed.num_tokens:
        raise FormatError(
            f"passage {compressed.key!r}: {len(ids)} centroid ids for {compressed.num_tokens} tokens"
        )
    if ids.size and (ids.min() < 0 or ids.max() >= codebook.num_centroids):
        raise FormatError(
            f"passage {compressed.key!r}: corrupted centroid id outside [0, {codebook.num_centroids})"
        )
    expected_bytes = (compressed.num_tokens * codebook.dim * codebook.bits + 7) // 8
    if compressed.packed_codes.size != expected_bytes:
        raise FormatError(
            f"passage {compressed.key!r}: expected {expected_bytes} code bytes, "
            f"got {compressed.packed_codes.size}"
        )
    codes = _unpack_codes(compressed.packed_codes, compressed.num_tokens, codebook.dim, codebook.bits)
    offsets = codebook.values[np.arange(codebook.dim)[None, :], codes]
    return (codebook.centroids[ids].astype(np.float64) + offsets).astype(np.float32)


def maxsim(query_vectors: np.ndarray, doc_vectors: np.ndarray) -> float:
    """Late-interaction score: sum over query tokens of the max dot product."""
    doc_vectors = np.asarray(doc_vectors, dtype=np.float64)
    query_vectors = np.asarray(query_vectors, dtype=np.float64)
    if doc_vectors.ndim != 2 or doc_vectors.shape[0] == 0:
        raise ValidationError("document has no token vectors")
    if query_vectors.shape[0] == 0:
        return 0.0
    if query_vectors.shape[1] != doc_vectors.shape[1]:
        raise ValidationError(
            f"dimension mismatch: query {query_vectors.shape[1]} vs document {doc_vectors.shape[1]}"
        )
    return float((query_vectors @ doc_vectors.T).max(axis=1).sum())


class DenseIndex:
    """Compressed passages plus a centroid-to-passages inverted map."""

    def __init__(
        self,
        codebook: ResidualCodebook,
        keys: list[str],
        passages: list[CompressedPassage],
        params: DenseIndexParams,
    ):
        self.codebook = codebook
        self.keys = keys
        self.passages = passages
        self.params = params
        self.inverted: dict[int, np.ndarray] = {}
        buckets: dict[int, set[int]] = {}
        for ordinal, cp in enumerate(passages):
            for cid in np.unique(cp.centroid_ids):
                buckets.setdefault(int(cid), set()).add(ordinal)
        for cid, ordinals in buckets.items():
            self.inverted[cid] = np.fromiter(sorted(ordinals), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.keys)

    def decompress_passage(self, ordinal: int) -> np.ndarray:
        return decompress(self.passages[ordinal], self.codebook)


def build_dense_index(
    embeddings: Mapping[str, np.ndarray], params: DenseIndexParams | None = None
) -> DenseIndex:
    """Train a codebook on the collection and compress every passage."""
    params = params if params is not None else DenseIndexParams()
    params.validate()
    start = time.perf_counter()
    codebook = train_codebook(embeddings, params)
    trained = time.perf_counter()
    keys = list(embeddings.keys())
    passages = [compress(np.asarray(embeddings[key]), codebook, key=key) for key in keys]
    done = time.perf_counter()
    logger.info(
        "event=dense_index_build passages=%d tokens=%d centroids=%d bits=%d "
        "train_ms=%.1f compress_ms=%.1f",
        len(keys),
        sum(p.num_tokens for p in passages),
        codebook.num_centroids,
        codebook.bits,
        (trained - start) * 1e3,
        (done - trained) * 1e3,
    )
    resolved = replace(params, num_centroids=codebook.num_centroids)
    return DenseIndex(codebook, keys, passages, resolved)


def search_dense(
    index: DenseIndex,
    query_vectors: np.ndarray,
    params: DenseIndexParams | None = None,
) -> list[tuple[str, float]]:
    """Staged late-interaction search returning every fully scored passage.

    Stage 1 probes the ``nprobe`` nearest centroids per query token and
    collects passages containing any probed centroid. Stage 2 ranks the
    candidates by MaxSim computed on centroids alone and keeps the top
    ``candidate_cap``. Stage 3 scores the survivors exactly on decompressed
    vectors; results are sorted by descending score, ties by passage key.
    """
    params = params if params is not None else index.params
    params.validate()
    query = np.asarray(query_vectors, dtype=np.float64)
    if query.ndim != 2 or query.shape[0] == 0:
        raise ValidationError("query must contain at least one token vector")
    if query.shape[1] != index.codebook.dim:
        raise ValidationError(
            f"query dimension {query.shape[1]} does not match index dimension {index.codebook.dim}"
        )
    if len(index) == 0:
        return []

    t0 = time.perf_counter()
    centroid_sims = query @ index.codebook.centroids.astype(np.float64).T  # (nq, K)
    nprobe = min(params.nprobe, index.codebook.num_centroids)
    probed: set[int] = set()
    for row in centroid_sims:
        order = np.argsort(-row, kind="stable")
        probed.update(int(c) for c in order[:nprobe])
    candidate_ordinals: set[int] = set()
    for cid in probed:
        ordinals = index.inverted.get(cid)
        if ordinals is not None:
            candidate_ordinals.update(int(o) for o in ordinals)
    t1 = time.perf_counter()

    approx: list[tuple[float, str, int]] = []
    for ordinal in candidate_ordinals:
        cids = index.passages[ordinal].centroid_ids
        score = float(centroid_sims[:, cids].max(axis=1).sum())
        approx.append((score, index.keys[ordinal], ordinal))
    approx.sort(key=lambda entry: (-entry[0], entry[1]))
    survivors = approx[: params.candidate_cap]
    t2 = time.perf_counter()

    results = [
        (key, maxsim(query, index.decompress_passage(ordinal))) for _, key, ordinal in survivors
    ]
    results.sort(key=lambda entry: (-entry[1], entry[0]))
    t3 = time.perf_counter()
    logger.info(
        "event=dense_search query_tokens=%d probed_centroids=%d candidates=%d scored=%d "
        "stage1_ms=%.2f stage2_ms=%.2f stage3_ms=%.2f",
        query.shape[0],
        len(probed),
        len(candidate_ordinals),
        len(results),
        (t1 - t0) * 1e3,
        (t2 - t1) * 1e3,
        (t3 - t2) * 1e3,
    )
    return results


def maxp_aggregate(passage_scores: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    """Document score = max over its passages; descending order, ties by doc id."""
    best: dict[str, float] = {}
    for doc_id, score in passage_scores:
        if doc_id not in best or score > best[doc_id]:
            best[doc_id] = score
    ranked = sorted(best.items(), key=lambda entry: (-entry[1], entry[0]))
    return ranked


def save_dense_index(index: DenseIndex, dirpath: str | Path) -> None:
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "dim": index.codebook.dim,
        "bits": index.codebook.bits,
        "num_centroids": index.codebook.num_centroids,
        "num_passages": len(index),
        "nprobe": index.params.nprobe,
        "candidate_cap": index.params.candidate_cap,
        "kmeans_iters": index.params.kmeans_iters,
        "sample_per_centroid": index.params.sample_per_centroid,
        "seed": index.params.seed,
    }
    (dirpath / "meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    np.save(dirpath / "centroids.npy", index.codebook.centroids)
    np.save(dirpath / "bucket_boundaries.npy", index.codebook.boundaries)
    np.save(dirpath / "bucket_values.npy", index.codebook.values)
    with open(dirpath / "keys.txt", "w", encoding="utf-8") as fh:
        for key in index.keys:
            fh.write(key + "\n")
    token_counts = np.array([p.num_tokens for p in index.passages], dtype=np.int64)
    np.save(dirpath / "token_counts.npy", token_counts)
    if index.passages:
        np.save(dirpath / "centroid_ids.npy", np.concatenate([p.centroid_ids for p in index.passages]))
        np.save(dirpath / "packed_codes.npy", np.concatenate([p.packed_codes for p in index.passages]))
    else:
        np.save(dirpath / "centroid_ids.npy", np.empty(0, dtype=np.int32))
        np.save(dirpath / "packed_codes.npy", np.empty(0, dtype=np.uint8))


def load_dense_index(dirpath: str | Path) -> DenseIndex:
    dirpath = Path(dirpath)
    meta_path = dirpath / "meta.json"
    if not meta_path.exists():
        raise FormatError(f"{dirpath}: missing meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format") != INDEX_FORMAT or meta.get("version") != INDEX_VERSION:
        raise FormatError(
            f"{dirpath}: unsupported index format {meta.get('format')!r} v{meta.get('version')!r}"
        )
    codebook = ResidualCodebook(
        centroids=np.load(dirpath / "centroids.npy"),
        boundaries=np.load(dirpath / "bucket_boundaries.npy"),
        values=np.load(dirpath / "bucket_values.npy"),
        bits=int(meta["bits"]),
    )
    codebook.validate()
    keys = (dirpath / "keys.txt").read_text(encoding="utf-8").splitlines()
    token_counts = np.load(dirpath / "token_counts.npy")
    if len(keys) != len(token_counts) or len(keys) != meta["num_passages"]:
        raise FormatError(f"{dirpath}: passage table sizes disagree with meta.json")
    centroid_ids = np.load(dirpath / "centroid_ids.npy")
    packed = np.load(dirpath / "packed_codes.npy")
    params = DenseIndexParams(
        bits=int(meta["bits"]),
        num_centroids=int(meta["num_centroids"]),
        nprobe=int(meta["nprobe"]),
        candidate_cap=int(meta["candidate_cap"]),
        kmeans_iters=int(meta["kmeans_iters"]),
        sample_per_centroid=int(meta["sample_per_centroid"]),
        seed=int(meta["seed"]),
    )
    passages = []
    id_offset = 0
    byte_offset = 0
    bits = codebook.bits
    for key, count in zip(keys, token_counts):
        count = int(count)
        nbytes = (count * codebook.dim * bits + 7) // 8
        passages.append(
            CompressedPassage(
                key=key,
                centroid_ids=centroid_ids[id_offset : id_offset + count],
                packed_codes=packed[byte_offset : byte_offset + nbytes],
                num_tokens=count,
            )
        )
        id_offset += count
        byte_offset += nbytes
    if id_offset != centroid_ids.size or byte_offset != packed.size:
        raise FormatError(f"{dirpath}: centroid id or code arrays have trailing data")
    return DenseIndex(codebook, keys, passages, params)
