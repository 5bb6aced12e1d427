"""
Exact linear-region counting

One-layer networks are counted as hyperplane arrangements in the flattened
input space R^(D*N_0); multi-layer networks by recursive subdivision, where
each region of the first l-1 layers carries the affine map of its layer-l
preactivations. All feasibility questions go to simplex.solve_slack.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from region_atlas.errors import CapExceededError, InvalidInputError, SolverError
from region_atlas.graph import NormalizedAdjacency, numeric_rank
from region_atlas.model import ActivationPattern, GcnSpec, Parameters, count_neurons
from region_atlas.simplex import SLACK_THRESHOLD, ZERO_NORMAL, solve_slack

logger = logging.getLogger(__name__)

DEFAULT_BOX = 1e4
PLANE_CAP = 40
NEURON_CAP = 24
DEGENERACY_TOL = 1e-6


class Hyperplane(BaseModel):
    """The set {x : normal . x + offset = 0} in the flattened input space"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    normal: np.ndarray = Field(..., description="Length-d normal vector")
    offset: float = Field(..., description="Constant term")
    node: Optional[int] = Field(None, description="Graph node of the neuron, when known")
    feature: Optional[int] = Field(None, description="Output feature of the neuron, when known")


class Region(BaseModel):
    """A feasible sign vector over the inserted hyperplanes with an interior point"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    signs: Tuple[int, ...] = Field(..., description="+1 / -1 per hyperplane, in insertion order")
    witness: np.ndarray = Field(..., description="Point strictly inside the region")
    slack: float = Field(..., description="Normalized margin of the witness")

    def sign_word(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.signs)


class _Cell:
    """Working state of one region: its constraint system and a witness."""

    __slots__ = ("normals", "offsets", "signs", "witness", "slack", "labels")

    def __init__(self, normals, offsets, signs, witness, slack, labels):
        self.normals = normals
        self.offsets = offsets
        self.signs = signs
        self.witness = witness
        self.slack = slack
        self.labels = labels

    def with_plane(self, normal, offset, sign, witness, slack) -> "_Cell":
        return _Cell(
            np.vstack([self.normals, normal[None, :]]),
            np.append(self.offsets, offset),
            np.append(self.signs, sign),
            witness,
            slack,
            self.labels + (sign,),
        )

    def with_fixed(self, sign) -> "_Cell":
        return _Cell(self.normals, self.offsets, self.signs, self.witness, self.slack, self.labels + (sign,))


def _root_cell(dim: int) -> _Cell:
    return _Cell(np.empty((0, dim)), np.empty(0), np.empty(0), np.zeros(dim), 1.0, ())


def _split(cell: _Cell, normal: np.ndarray, offset: float, box: float,
           threshold: float, fixed_tol: float) -> List[_Cell]:
    """Children of cell on each feasible side of one hyperplane, + side first."""
    norm = np.linalg.norm(normal)
    if np.max(np.abs(normal)) <= ZERO_NORMAL:
        return [cell.with_fixed(1 if offset > fixed_tol else -1)]

    value = (normal @ cell.witness + offset) / norm
    children = []
    for sign in (1, -1):
        if sign * value > threshold:
            children.append(cell.with_plane(normal, offset, sign, cell.witness, min(cell.slack, sign * value)))
            continue
        result = solve_slack(np.vstack([cell.normals, normal[None, :]]),
                             np.append(cell.offsets, offset),
                             np.append(cell.signs, sign), box, threshold=threshold)
        if result.feasible:
            children.append(cell.with_plane(normal, offset, sign, result.point, result.max_slack))
    return children


def _insert_all(cells: List[_Cell], normals: np.ndarray, offsets: np.ndarray, box: float,
                threshold: float, fixed_tol: float, pool: Optional[ThreadPoolExecutor] = None) -> List[_Cell]:
    """Insert planes one at a time into every cell; order of the output is deterministic."""
    for normal, offset in zip(normals, offsets):
        if pool is not None and len(cells) > 1:
            parts = list(pool.map(lambda c: _split(c, normal, offset, box, threshold, fixed_tol), cells))
        else:
            parts = [_split(c, normal, offset, box, threshold, fixed_tol) for c in cells]
        cells = [child for part in parts for child in part]
    return cells


def _base_cell(base: Sequence[Tuple[Hyperplane, int]], dim: int, box: float, threshold: float,
               start: Optional[np.ndarray]) -> Optional[_Cell]:
    """The cell cut out by (plane, sign) pairs, or None when it is empty."""
    if not base:
        return _root_cell(dim)
    normals = np.array([p.normal for p, _ in base], dtype=float).reshape(len(base), dim)
    offsets = np.array([p.offset for p, _ in base], dtype=float)
    signs = np.array([1.0 if s > 0 else -1.0 for _, s in base])
    if np.any(np.max(np.abs(normals), axis=1) <= ZERO_NORMAL):
        raise InvalidInputError("Base constraints need nonzero normals")
    if start is None:
        result = solve_slack(normals, offsets, signs, box, threshold=threshold)
        if not result.feasible:
            return None
        return _Cell(normals, offsets, signs, result.point, result.max_slack, ())
    start = np.asarray(start, dtype=float)
    margins = signs * (normals @ start + offsets) / np.linalg.norm(normals, axis=1)
    return _Cell(normals, offsets, signs, start, float(margins.min()), ())


def build_one_layer_arrangement(adj: NormalizedAdjacency, w: np.ndarray, b: np.ndarray) -> List[Hyperplane]:
    """
    One hyperplane per (node i, output feature j) with normal vec(a_i w_j^T)
    over the row-major flattened D x N input and offset b_j.

    Zero normals are dropped and reported in the log.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    b = np.asarray(b, dtype=float)
    d = adj.node_count
    if b.shape not in ((w.shape[1],), (d, w.shape[1])):
        raise InvalidInputError(f"Bias shape {b.shape} does not match weight shape {w.shape}")
    offsets = np.broadcast_to(b, (d, w.shape[1]))
    planes, dropped = [], 0
    for i in range(d):
        for j in range(w.shape[1]):
            normal = np.outer(adj.a_hat[i], w[:, j]).ravel()
            if np.max(np.abs(normal)) <= ZERO_NORMAL:
                dropped += 1
                continue
            planes.append(Hyperplane(normal=normal, offset=float(offsets[i, j]), node=i, feature=j))
    if dropped:
        logger.info(f"Dropped {dropped} zero-normal hyperplane(s) from the one-layer arrangement")
    return planes


def count_regions(planes: Sequence[Hyperplane], box: float = DEFAULT_BOX, cap: int = PLANE_CAP,
                  threshold: float = SLACK_THRESHOLD, dim: Optional[int] = None, workers: int = 1,
                  base: Sequence[Tuple[Hyperplane, int]] = (), start: Optional[np.ndarray] = None,
                  tol: float = 1e-9, executor: Optional[ThreadPoolExecutor] = None) -> Tuple[int, List[Region]]:
    """
    Count the regions of an arrangement inside [-box, box]^d by incremental
    insertion: a region splits when both sides of the new plane are feasible.

    base restricts the count to the open cell where each (plane, sign) pair
    has sign * (normal . x + offset) > 0; start is a point inside that cell
    and is found by the solver when omitted. A plane with a zero normal
    splits nothing and is labelled + when its offset exceeds tol.
    Region signs cover the inserted planes only.
    """
    if len(planes) > cap:
        raise CapExceededError(f"{len(planes)} hyperplanes exceed the exact-count cap of {cap}; "
                               f"use the sampler for an estimate")
    if dim is None:
        if planes:
            dim = planes[0].normal.size
        elif base:
            dim = base[0][0].normal.size
        else:
            return 1, [Region(signs=(), witness=np.zeros(0), slack=1.0)]
    root = _base_cell(base, dim, box, threshold, start)
    if root is None:
        return 0, []
    normals = np.array([p.normal for p in planes], dtype=float).reshape(len(planes), dim)
    offsets = np.array([p.offset for p in planes], dtype=float)
    if executor is None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = _insert_all([root], normals, offsets, box, threshold, tol, pool)
    else:
        cells = _insert_all([root], normals, offsets, box, threshold, tol, executor)
    regions = [Region(signs=c.labels, witness=c.witness, slack=c.slack) for c in cells]
    return len(regions), regions


def exact_count_one_layer(adj: NormalizedAdjacency, w: np.ndarray, b: np.ndarray,
                          box: float = DEFAULT_BOX, cap: int = PLANE_CAP, workers: int = 1) -> int:
    w = np.atleast_2d(np.asarray(w, dtype=float))
    planes = build_one_layer_arrangement(adj, w, b)
    count, _ = count_regions(planes, box, cap=cap, dim=adj.node_count * w.shape[0], workers=workers)
    return count


def _same_plane(p: Hyperplane, q: Hyperplane, tol: float) -> bool:
    u = np.append(p.normal, p.offset) / np.linalg.norm(p.normal)
    v = np.append(q.normal, q.offset) / np.linalg.norm(q.normal)
    return min(np.max(np.abs(u - v)), np.max(np.abs(u + v))) <= tol


def _near_singular(rows: np.ndarray, tol: float) -> bool:
    sv = np.linalg.svd(rows, compute_uv=False)
    return sv[0] == 0.0 or sv[-1] <= tol * sv[0]


def is_degenerate(planes: Sequence[Hyperplane], feature_dim: Optional[int] = None,
                  tol: float = DEGENERACY_TOL) -> bool:
    """
    Flag an arrangement whose intersections are not the generic ones.

    Planes are grouped by graph node; unlabelled planes form one group.
    A node's planes live in a feature_dim-dimensional subspace, an
    unlabelled group in the whole space. The arrangement is generic when
    - the groups span independent subspaces,
    - in each group of k planes in n dimensions every min(k, n) normals are
      independent, and for k > n no n + 1 planes share a point.
    A plane repeating another node's plane is the same hyperplane and is
    skipped. Near means a relative singular value at most tol.
    """
    if not planes:
        return False
    if any(np.max(np.abs(p.normal)) <= ZERO_NORMAL for p in planes):
        return True
    dim = planes[0].normal.size
    kept: List[Hyperplane] = []
    groups: Dict[Optional[int], List[Hyperplane]] = {}
    for plane in planes:
        if any(other.node != plane.node and _same_plane(plane, other, tol) for other in kept):
            continue
        kept.append(plane)
        groups.setdefault(plane.node, []).append(plane)

    group_rank = 0
    for node, members in groups.items():
        n = dim if node is None or feature_dim is None else feature_dim
        normals = np.array([p.normal for p in members])
        augmented = np.column_stack([normals, [p.offset for p in members]])
        k = len(members)
        if any(_near_singular(normals[list(s)], tol) for s in combinations(range(k), min(k, n))):
            return True
        if k > n and any(_near_singular(augmented[list(s)], tol) for s in combinations(range(k), n + 1)):
            return True
        group_rank += numeric_rank(normals, tol)
    return group_rank != numeric_rank(np.array([p.normal for p in kept]), tol)


def _layer_preacts(adj: NormalizedAdjacency, g: np.ndarray, h: np.ndarray,
                   w: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Affine map of Â X W + B given X = g . x + h (g is D x N x d)."""
    g_z = np.einsum("ik,kfd,fj->ijd", adj.a_hat, g, w)
    h_z = adj.a_hat @ h @ w + b
    return g_z, np.broadcast_to(h_z, g_z.shape[:2])


def enumerate_regions_multi(spec: GcnSpec, adj: NormalizedAdjacency, params: Parameters,
                            box: float = DEFAULT_BOX, cap: int = NEURON_CAP, threshold: float = SLACK_THRESHOLD,
                            tol: float = 1e-9, workers: int = 1) -> List[Region]:
    """
    Enumerate the regions of a multi-layer GCN by depth-first subdivision.

    Within a region fixed by the signs of layers 1..l-1 the layer-l
    preactivations are affine in the input; their hyperplanes subdivide the
    region further. Each leaf carries its full sign word and a witness.
    """
    d = adj.node_count
    neurons = count_neurons(spec, d)
    if neurons > cap:
        raise CapExceededError(f"{neurons} neurons exceed the exact-count cap of {cap}; "
                               f"use the sampler for an estimate")
    params.check(spec, d)
    dim = d * spec.widths[0]
    start_time = time.time()
    leaves: List[Region] = []

    def descend(base: List[Tuple[Hyperplane, int]], start: Optional[np.ndarray], layer: int,
                g: np.ndarray, h: np.ndarray, prefix: Tuple[int, ...]) -> None:
        w, b = params.weights[layer], params.biases[layer]
        g_z, h_z = _layer_preacts(adj, g, h, w, b)
        n_out = w.shape[1]
        planes = [Hyperplane(normal=g_z[i, j], offset=float(h_z[i, j]), node=i, feature=j)
                  for i in range(d) for j in range(n_out)]
        try:
            _, regions = count_regions(planes, box, cap=len(planes), threshold=threshold, dim=dim,
                                       base=base, start=start, tol=tol, executor=pool)
        except SolverError as e:
            partial = "".join("+" if s > 0 else "-" for s in prefix)
            raise SolverError(f"{str(e)} (layer {layer + 1}, pattern prefix '{partial}')",
                              basis=e.basis, pattern=partial) from e
        for region in regions:
            bits = prefix + region.signs
            if layer + 1 == spec.layers:
                leaves.append(Region(signs=bits, witness=region.witness, slack=region.slack))
                continue
            mask = (np.array(region.signs) > 0).reshape(d, n_out)
            cuts = [(p, s) for p, s in zip(planes, region.signs) if np.max(np.abs(p.normal)) > ZERO_NORMAL]
            descend(base + cuts, region.witness, layer + 1, g_z * mask[:, :, None], h_z * mask, bits)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        identity = np.eye(dim).reshape(d, spec.widths[0], dim)
        descend([], None, 0, identity, np.zeros((d, spec.widths[0])), ())
    finally:
        if pool is not None:
            pool.shutdown()
    logger.info(f"Exact multi-layer count: {len(leaves)} regions for widths {list(spec.widths)} "
                f"in {time.time() - start_time:.2f}s")
    return leaves


def exact_count_multi(spec: GcnSpec, adj: NormalizedAdjacency, params: Parameters,
                      box: float = DEFAULT_BOX, cap: int = NEURON_CAP, threshold: float = SLACK_THRESHOLD,
                      tol: float = 1e-9, workers: int = 1) -> Tuple[int, List[ActivationPattern]]:
    """Number of regions of a multi-layer GCN and the activation pattern of each."""
    leaves = enumerate_regions_multi(spec, adj, params, box, cap, threshold, tol, workers)
    patterns = [ActivationPattern(bits=np.array([s > 0 for s in r.signs], dtype=bool)) for r in leaves]
    return len(patterns), patterns


def dump_regions(regions: Sequence[Region], path: Path) -> None:
    """Write one JSON object per region: signs, witness, slack."""
    with open(path, "w", encoding="utf-8") as f:
        for region in regions:
            f.write(json.dumps({
                "signs": region.sign_word(),
                "witness": region.witness.tolist(),
                "slack": region.slack,
            }) + "\n")
