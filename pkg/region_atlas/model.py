"""
ReLU GCN model

Architecture description, parameter storage, forward evaluation
X^(l) = ReLU(Â X^(l-1) W_l + 1 b_l^T), activation patterns and parameter
counting. Every function accepts a single input (D x N_0) or a batch
(S x D x N_0).
"""

import json
import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from region_atlas.errors import InvalidInputError
from region_atlas.graph import NormalizedAdjacency

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


class GcnSpec(BaseModel):
    """Layer widths [N_0, N_1, ..., N_L] of a ReLU GCN"""

    model_config = ConfigDict(frozen=True)

    widths: Tuple[int, ...] = Field(..., description="Feature counts per layer, input first")

    @field_validator("widths")
    @classmethod
    def _check_widths(cls, value):
        if len(value) < 2:
            raise InvalidInputError(f"Need at least one layer, got widths {list(value)}")
        if any(w < 1 for w in value):
            raise InvalidInputError(f"All widths must be positive, got {list(value)}")
        return value

    @property
    def layers(self) -> int:
        return len(self.widths) - 1


class Parameters(BaseModel):
    """Per-layer weights W_l (N_(l-1) x N_l) and biases b_l

    A bias is either shared by all nodes (length N_l) or node-wise (D x N_l).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    weights: Tuple[np.ndarray, ...] = Field(..., description="W_1..W_L")
    biases: Tuple[np.ndarray, ...] = Field(..., description="b_1..b_L")

    def check(self, spec: GcnSpec, node_count: int) -> None:
        if len(self.weights) != spec.layers or len(self.biases) != spec.layers:
            raise InvalidInputError(f"Expected {spec.layers} layers of parameters, "
                                    f"got {len(self.weights)} weights and {len(self.biases)} biases")
        for l, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            n_in, n_out = spec.widths[l - 1], spec.widths[l]
            if w.shape != (n_in, n_out):
                raise InvalidInputError(f"Layer {l}: weight shape {w.shape}, expected {(n_in, n_out)}")
            if b.shape not in ((n_out,), (node_count, n_out)):
                raise InvalidInputError(f"Layer {l}: bias shape {b.shape}, expected {(n_out,)} "
                                        f"or {(node_count, n_out)}")

    def entry_count(self) -> int:
        return int(sum(w.size for w in self.weights) + sum(b.size for b in self.biases))

    def to_json(self) -> str:
        return json.dumps({
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        })

    @classmethod
    def from_json(cls, text: str) -> "Parameters":
        payload = json.loads(text)
        return cls(
            weights=tuple(np.asarray(w, dtype=float) for w in payload["weights"]),
            biases=tuple(np.asarray(b, dtype=float) for b in payload["biases"]),
        )


class ActivationPattern(BaseModel):
    """Sign word over all neurons in (layer, node, feature) order; True is +1"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: np.ndarray = Field(..., description="Boolean vector, True where the neuron is active")

    @property
    def key(self) -> bytes:
        return pack_bits(self.bits[None, :])[0]

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, ActivationPattern) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.bits.size, self.key))

    def __str__(self) -> str:
        return "".join("+" if bit else "-" for bit in self.bits)


def count_neurons(spec: GcnSpec, node_count: int) -> int:
    """n = D * (N_1 + ... + N_L)"""
    return node_count * sum(spec.widths[1:])


def param_count(spec: GcnSpec) -> int:
    """Sum over layers of N_(l-1)*N_l + N_l."""
    return sum(n_in * n_out + n_out for n_in, n_out in zip(spec.widths[:-1], spec.widths[1:]))


def layer_rng(seed: int, layer: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, layer, stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & SEED_MASK, layer, stream])))


def init_kaiming(spec: GcnSpec, seed: int) -> Parameters:
    """
    Kaiming He initialization.

    W_l entries ~ N(0, 2/N_(l-1)); b_l entries ~ U(-1/sqrt(N_(l-1)), 1/sqrt(N_(l-1))).
    """
    weights, biases = [], []
    for l in range(1, spec.layers + 1):
        fan_in, fan_out = spec.widths[l - 1], spec.widths[l]
        weights.append(layer_rng(seed, l, 0).normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        bound = 1.0 / np.sqrt(fan_in)
        biases.append(layer_rng(seed, l, 1).uniform(-bound, bound, size=fan_out))
    return Parameters(weights=tuple(weights), biases=tuple(biases))


def forward(spec: GcnSpec, adj: NormalizedAdjacency, params: Parameters,
            x0: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Evaluate the network.

    Args:
        x0: input features, D x N_0 or a batch S x D x N_0

    Returns:
        (outputs, preacts), one array per layer with the batch shape of x0
    """
    x = np.asarray(x0, dtype=float)
    d = adj.node_count
    if x.shape[-2:] != (d, spec.widths[0]):
        raise InvalidInputError(f"Layer 1: input shape {x.shape}, expected (..., {d}, {spec.widths[0]})")
    params.check(spec, d)
    outputs, preacts = [], []
    for w, b in zip(params.weights, params.biases):
        z = np.einsum("ij,...jk->...ik", adj.a_hat, x) @ w + b
        x = np.maximum(z, 0.0)
        preacts.append(z)
        outputs.append(x)
    return outputs, preacts


def pattern_bits(preacts: List[np.ndarray], tol: float = 1e-9) -> np.ndarray:
    """Active flags in canonical order; shape (n,) or (S, n) for a batch."""
    batch_shape = preacts[0].shape[:-2]
    flat = [z.reshape(batch_shape + (-1,)) for z in preacts]
    return np.concatenate(flat, axis=-1) > tol


def pack_bits(bits: np.ndarray) -> List[bytes]:
    """Pack an (S, n) boolean array into one bytes key per row."""
    packed = np.packbits(bits, axis=-1)
    return [row.tobytes() for row in packed]


def pattern(preacts: List[np.ndarray], tol: float = 1e-9) -> ActivationPattern:
    """Activation pattern of a single input; |z| <= tol counts as inactive."""
    bits = pattern_bits(preacts, tol)
    if bits.ndim != 1:
        raise InvalidInputError("pattern() takes the preactivations of a single input")
    return ActivationPattern(bits=bits)


def jacobian(spec: GcnSpec, adj: NormalizedAdjacency, params: Parameters,
             x0: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of the flattened output w.r.t. the flattened input."""
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    probes = np.repeat(x0.reshape(1, -1), 2 * dim, axis=0)
    steps = np.eye(dim) * eps
    probes[:dim] += steps
    probes[dim:] -= steps
    outputs, _ = forward(spec, adj, params, probes.reshape((2 * dim,) + x0.shape))
    out = outputs[-1].reshape(2 * dim, -1)
    return ((out[:dim] - out[dim:]) / (2 * eps)).T


def load_spec(source: Union[str, Path, List[int]]) -> GcnSpec:
    """Build a spec from a width list, "2,2,3", or a JSON file {"widths": [...]}."""
    if isinstance(source, (list, tuple)):
        return GcnSpec(widths=tuple(int(w) for w in source))
    text = str(source)
    if Path(text).exists():
        with open(text, "r", encoding="utf-8") as f:
            return GcnSpec.model_validate_json(f.read())
    try:
        return GcnSpec(widths=tuple(int(w) for w in text.split(",")))
    except ValueError as e:
        raise InvalidInputError(f"Cannot parse widths '{text}'") from e
