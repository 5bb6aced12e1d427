"""
Graph representation and adjacency normalization

This module holds the undirected graph type, the symmetric normalization
Â = M^(-1/2)(I+A)M^(-1/2), duplicate-row removal (Ã, D*) and the small
fixture graphs used throughout the experiments.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from region_atlas.errors import InvalidInputError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9


class Graph(BaseModel):
    """Undirected simple graph on nodes 0..D-1 (self-loops come from I+A)"""

    model_config = ConfigDict(frozen=True)

    node_count: int = Field(..., ge=1, description="Number of nodes D")
    edges: Tuple[Tuple[int, int], ...] = Field(default=(), description="Unordered node pairs, stored as (i, j) with i < j")

    @field_validator("edges", mode="before")
    @classmethod
    def _canonical_edges(cls, value):
        pairs = set()
        for edge in value:
            i, j = (int(v) for v in edge)
            pairs.add((min(i, j), max(i, j)))
        return tuple(sorted(pairs))

    @model_validator(mode="after")
    def _check_edges(self):
        for i, j in self.edges:
            if i == j:
                raise InvalidInputError(f"Self-loop ({i}, {j}) is not allowed; I+A adds it")
            if i < 0 or j >= self.node_count:
                raise InvalidInputError(f"Edge ({i}, {j}) out of range for {self.node_count} nodes")
        return self

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a


class NormalizedAdjacency(BaseModel):
    """The operator Â with its degree vector and deduplicated rows Ã"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    a_hat: np.ndarray = Field(..., description="D x D normalized adjacency")
    degrees: np.ndarray = Field(..., description="Diagonal of M, the degree matrix of I+A")
    a_tilde: np.ndarray = Field(..., description="Â with duplicate rows removed")
    d_star: int = Field(..., ge=1, description="Row count of Ã")

    @property
    def node_count(self) -> int:
        return self.a_hat.shape[0]

    @property
    def rank(self) -> int:
        """Numeric rank of Â, the rank(A) of the multi-layer lower bound"""
        return numeric_rank(self.a_hat)


def numeric_rank(matrix: np.ndarray, tol: float = DEFAULT_TOL) -> int:
    """Count singular values above tol times the largest one."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return 0
    sv = np.linalg.svd(matrix, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


def dedup_rows(a_hat: np.ndarray, tol: float = DEFAULT_TOL) -> Tuple[np.ndarray, int]:
    """
    Drop repeated rows, keeping the first occurrence of each. Any 2-D
    matrix is accepted, so Ã can be passed back in unchanged.

    Two rows are duplicates when their largest absolute entry difference is
    at most tol.
    """
    a_hat = np.asarray(a_hat, dtype=float)
    if a_hat.ndim != 2 or a_hat.shape[0] == 0:
        raise InvalidInputError(f"Expected a non-empty 2-D matrix, got shape {a_hat.shape}")
    kept: List[np.ndarray] = []
    for row in a_hat:
        if not any(np.max(np.abs(row - other)) <= tol for other in kept):
            kept.append(row)
    a_tilde = np.vstack(kept)
    return a_tilde, a_tilde.shape[0]


def normalize(graph: Graph, tol: float = DEFAULT_TOL) -> NormalizedAdjacency:
    """Build Â[i][j] = (I+A)[i][j] / sqrt(m_i m_j) with m_i = 1 + deg(i)."""
    self_looped = graph.adjacency() + np.eye(graph.node_count)
    degrees = self_looped.sum(axis=1)
    scale = 1.0 / np.sqrt(degrees)
    a_hat = scale[:, None] * self_looped * scale[None, :]
    a_tilde, d_star = dedup_rows(a_hat, tol)
    return NormalizedAdjacency(a_hat=a_hat, degrees=degrees, a_tilde=a_tilde, d_star=d_star)


def eigen_residual(adj: NormalizedAdjacency) -> float:
    """Infinity norm of Â·v - v for v = M^(1/2)·1; zero up to rounding."""
    v = np.sqrt(adj.degrees)
    return float(np.max(np.abs(adj.a_hat @ v - v)))


def check_rank_lemma(adj: NormalizedAdjacency, tol: float = DEFAULT_TOL) -> bool:
    """Check rank(Ã) == D* numerically, warning instead of assuming it."""
    rank = numeric_rank(adj.a_tilde, tol)
    if rank != adj.d_star:
        logger.warning(f"Rank of deduplicated adjacency is {rank} but D* = {adj.d_star}; "
                       f"one-layer formulas assume independent rows")
        return False
    return True


# Fixture graphs; edges written 1-based as in the experiments, stored 0-based
_FIXTURE_EDGES: Dict[str, Tuple[int, List[Tuple[int, int]]]] = {
    "path3": (3, [(1, 2), (2, 3)]),
    "star3": (3, [(1, 2), (1, 3)]),
    "fig2_graph4": (4, [(1, 2), (1, 3), (2, 4)]),
    "triangle3": (3, [(1, 2), (2, 3), (1, 3)]),
    "single1": (1, []),
}

FIXTURE_NAMES = tuple(_FIXTURE_EDGES)


def fixture(name: str) -> Graph:
    """Return one of the named fixture graphs."""
    if name not in _FIXTURE_EDGES:
        raise InvalidInputError(f"Unknown fixture '{name}'; available: {', '.join(FIXTURE_NAMES)}")
    nodes, edges = _FIXTURE_EDGES[name]
    return Graph(node_count=nodes, edges=[(i - 1, j - 1) for i, j in edges])


def load_graph(source: str) -> Graph:
    """Resolve a fixture name or a JSON file {"nodes": D, "edges": [[i, j], ...]}."""
    if source in _FIXTURE_EDGES:
        return fixture(source)
    path = Path(source)
    if not path.exists():
        raise InvalidInputError(f"'{source}' is neither a fixture ({', '.join(FIXTURE_NAMES)}) nor a file")
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        graph = Graph(node_count=payload["nodes"], edges=payload.get("edges", []))
    except (KeyError, TypeError, ValidationError, json.JSONDecodeError) as e:
        raise InvalidInputError(f"Malformed graph file {path}: {str(e)}") from e
    logger.info(f"Loaded graph with {graph.node_count} nodes and {len(graph.edges)} edges from {path}")
    return graph
