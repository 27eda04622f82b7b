"""Desk-scale pointwise neural ranker.

A (query, document) pair is encoded as a 262-dim feature vector (a 256-bin
hashed term-interaction block plus 6 lexical-overlap scalars) and scored by
a two-layer relu network with two output logits. Backpropagation and Adam
are implemented directly so every gradient is exactly checkable against
finite differences.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from . import retrieval
from .retrieval import InvertedIndex, tokenize
from .smoothing import TargetDistribution, ce_gradient

HASH_BINS = 256
N_SCALARS = 6
FEATURE_DIM = HASH_BINS + N_SCALARS
HIDDEN_DIM = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def _fnv1a(term: str) -> int:
    h = _FNV_OFFSET
    for byte in term.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _U64_MASK
    return h


def _hashed_unit_vector(tokens) -> np.ndarray:
    vec = np.zeros(HASH_BINS)
    for tok in tokens:
        vec[_fnv1a(tok) % HASH_BINS] += 1.0
    norm = math.sqrt(float(vec @ vec))
    if norm > 0.0:
        vec /= norm
    return vec


def extract_features(query_text: str, doc_text: str, index: InvertedIndex) -> np.ndarray:
    """Deterministic feature vector for a (query, document) pair.

    Hashed block: elementwise product of the L2-normalized hashed
    term-frequency vectors of query and document. Scalars (each passed
    through ln(1+x)): BM25 score, unique-term overlap, idf-weighted
    overlap, query length, document length, document/average length ratio.
    """
    q_tokens = tokenize(query_text)
    d_tokens = tokenize(doc_text)
    interaction = _hashed_unit_vector(q_tokens) * _hashed_unit_vector(d_tokens)

    overlap = set(q_tokens) & set(d_tokens)
    idf_overlap = sum(retrieval.idf(index, t) for t in sorted(overlap))
    scalars = np.array(
        [
            retrieval.bm25_score_tokens(index, q_tokens, d_tokens),
            float(len(overlap)),
            idf_overlap,
            float(len(q_tokens)),
            float(len(d_tokens)),
            len(d_tokens) / index.avg_doc_length,
        ]
    )
    return np.concatenate([interaction, np.log1p(scalars)])


@dataclass
class ModelParams:
    """Two-layer network weights: hidden = relu(x W1 + b1), logits = hidden W2 + b2."""

    W1: np.ndarray  # (D, H)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H, 2)
    b2: np.ndarray  # (2,)

    @classmethod
    def zeros(cls, d: int, h: int) -> "ModelParams":
        return cls(np.zeros((d, h)), np.zeros(h), np.zeros((h, 2)), np.zeros(2))

    def zeros_like(self) -> "ModelParams":
        d, h = self.W1.shape
        return ModelParams.zeros(d, h)

    def tensors(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "ModelParams":
        return ModelParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())

    def add_scaled(self, other: "ModelParams", scale: float) -> None:
        self.W1 += scale * other.W1
        self.b1 += scale * other.b1
        self.W2 += scale * other.W2
        self.b2 += scale * other.b2


@dataclass
class AdamState:
    """First/second-moment accumulators and the step counter."""

    m: ModelParams
    v: ModelParams
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like(), 0)


def init_params(seed: int, d: int = FEATURE_DIM, h: int = HIDDEN_DIM) -> ModelParams:
    """Xavier-uniform weights, zero biases, deterministic per seed."""
    if d < 1 or h < 1:
        raise ValueError("feature and hidden dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    a1 = math.sqrt(6.0 / (d + h))
    a2 = math.sqrt(6.0 / (h + 2))
    return ModelParams(
        rng.uniform(-a1, a1, size=(d, h)),
        np.zeros(h),
        rng.uniform(-a2, a2, size=(h, 2)),
        np.zeros(2),
    )


def forward(params: ModelParams, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (logits, hidden); hidden is reused by backward."""
    if features.shape != (params.W1.shape[0],):
        raise ValueError(
            f"feature shape {features.shape} does not match W1 {params.W1.shape}"
        )
    hidden = np.maximum(features @ params.W1 + params.b1, 0.0)
    logits = hidden @ params.W2 + params.b2
    return logits, hidden


def backward(
    params: ModelParams,
    features: np.ndarray,
    hidden: np.ndarray,
    target: TargetDistribution,
) -> ModelParams:
    """Exact cross-entropy gradients for every parameter tensor.

    The relu subgradient at 0 is taken as 0, so dead units propagate
    nothing.
    """
    logits = hidden @ params.W2 + params.b2
    dlogits = np.array(ce_gradient(target, logits))
    d_w2 = np.outer(hidden, dlogits)
    d_b2 = dlogits
    d_hidden = params.W2 @ dlogits
    d_pre = np.where(hidden > 0.0, d_hidden, 0.0)
    d_w1 = np.outer(features, d_pre)
    d_b1 = d_pre
    return ModelParams(d_w1, d_b1, d_w2, d_b2)


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_adam: float = 1e-8,
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update, applied in place."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name, param in params.tensors().items():
        g = grads.tensors()[name]
        m = state.m.tensors()[name]
        v = state.v.tensors()[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps_adam)
    return params, state


class CheckpointError(Exception):
    """Base class for checkpoint file problems."""


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


_MAGIC = b"SMRK"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIIIQ")


def save_checkpoint(params: ModelParams, state: AdamState, path) -> None:
    """Little-endian binary dump; written atomically (temp file + rename)."""
    d, h = params.W1.shape
    chunks = [_HEADER.pack(_MAGIC, CHECKPOINT_VERSION, d, h, state.t)]
    for container in (params, state.m, state.v):
        for tensor in container.tensors().values():
            chunks.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    payload = b"".join(chunks)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_checkpoint(path, expected_dims: tuple[int, int] | None = None) -> tuple[ModelParams, AdamState]:
    """Bit-exact inverse of save_checkpoint.

    Raises CheckpointVersionError / CheckpointDimensionError /
    CheckpointCorruptError for the three distinct failure modes.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise CheckpointCorruptError(f"{path}: file too short for a checkpoint header")
    magic, version, d, h, t = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise CheckpointCorruptError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version}, expected {CHECKPOINT_VERSION}"
        )
    if expected_dims is not None and (d, h) != tuple(expected_dims):
        raise CheckpointDimensionError(
            f"{path}: dims ({d}, {h}) do not match expected {tuple(expected_dims)}"
        )
    shapes = [(d, h), (h,), (h, 2), (2,)]
    n_values = 3 * sum(int(np.prod(s)) for s in shapes)
    expected_len = _HEADER.size + 8 * n_values
    if len(blob) != expected_len:
        raise CheckpointCorruptError(
            f"{path}: {len(blob)} bytes, expected {expected_len} for dims ({d}, {h})"
        )
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    containers = []
    cursor = 0
    for _ in range(3):
        tensors = []
        for shape in shapes:
            size = int(np.prod(shape))
            tensors.append(values[cursor : cursor + size].reshape(shape).copy())
            cursor += size
        containers.append(ModelParams(*tensors))
    params, m, v = containers
    return params, AdamState(m, v, t)
