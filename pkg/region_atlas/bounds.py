"""
Closed-form region-count bounds

All arithmetic is exact: Python integers for counts and Fractions for
per-parameter ratios. Widths are [N_0, ..., N_L]; D is the node count, D*
the number of distinct rows of Â.
"""

import logging
from fractions import Fraction
from math import comb, prod
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, model_validator
from typing_extensions import Annotated

from region_atlas.errors import CapExceededError, HypothesisError
from region_atlas.graph import NormalizedAdjacency
from region_atlas.model import GcnSpec, count_neurons, param_count

logger = logging.getLogger(__name__)

BigInt = Annotated[int, PlainSerializer(lambda v: str(v), return_type=str, when_used="json")]
Ratio = Annotated[Fraction, PlainSerializer(lambda f: f"{f.numerator}/{f.denominator}", return_type=str,
                                            when_used="json")]


class BoundReport(BaseModel):
    """Every bound the formulas give for one (spec, graph) pair"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    widths: List[int] = Field(..., description="Layer widths N_0..N_L")
    node_count: int = Field(..., description="Number of graph nodes D")
    d_star: int = Field(..., description="Distinct rows of the normalized adjacency")
    naive: BigInt = Field(..., description="2^n over all n neurons")
    one_layer_max: Optional[BigInt] = Field(None, description="Exact maximum for one-layer networks")
    multi_lower: Optional[BigInt] = Field(None, description="Lower bound on the maximal region count")
    multi_upper: Optional[BigInt] = Field(None, description="Upper bound on the region count")
    params: BigInt = Field(..., description="Number of weights and biases")
    ratio_lower: Optional[Ratio] = Field(None, description="multi_lower / params")
    ratio_upper: Optional[Ratio] = Field(None, description="multi_upper / params")
    exact: Optional[BigInt] = Field(None, description="Exact count, when one was computed")

    @model_validator(mode="after")
    def _check_order(self):
        if self.multi_lower is not None and self.multi_upper is not None:
            if self.multi_lower > self.multi_upper:
                raise ValueError(f"lower bound {self.multi_lower} exceeds upper bound {self.multi_upper}")
        for name in ("one_layer_max", "multi_lower", "multi_upper"):
            value = getattr(self, name)
            if value is not None and value > self.naive:
                raise ValueError(f"{name} = {value} exceeds the naive bound {self.naive}")
        return self


def binom_sum(n0: int, n1: int) -> int:
    """Sum of C(n1, i) for i = 0..min(n0, n1): regions of n1 generic hyperplanes in R^n0."""
    return sum(comb(n1, i) for i in range(min(n0, n1) + 1))


def naive_bound(n: int) -> int:
    return 2 ** n


def one_layer_max(d_star: int, n_in: int, n_out: int) -> int:
    """(sum_{i<=N} C(N', i))^D*, equal to 2^(N' D*) once N >= N'."""
    return binom_sum(n_in, n_out) ** d_star


def asymptotic_exponent(d_star: int, n_in: int) -> int:
    """Exponent of N' in the growth rate of the one-layer count."""
    return d_star * n_in


def kset_count(adj: NormalizedAdjacency, w: np.ndarray, cap: int = 20, tol: float = 1e-9) -> int:
    """
    Count linearly independent subsets (empty set included) of the rank-1
    normals a_i (x) w_j over distinct adjacency rows a_i and weight columns w_j.

    Repeated normals are counted once. Subsets are grown depth-first in index
    order; a dependent set is never extended since all its supersets are
    dependent too.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    elements = adj.d_star * w.shape[1]
    if elements > cap:
        raise CapExceededError(f"K-set enumeration over {elements} normals exceeds the cap of {cap}; "
                               f"use one_layer_max for generic weights")
    normals: List[np.ndarray] = []
    for a in adj.a_tilde:
        for j in range(w.shape[1]):
            v = np.outer(a, w[:, j]).ravel()
            # the normals form a set: a repeated weight column adds nothing new
            if not any(np.max(np.abs(v - u)) <= tol for u in normals):
                normals.append(v)
    scale = max((np.linalg.norm(v) for v in normals), default=0.0)

    def extend(basis: np.ndarray, start: int) -> int:
        total = 1
        for k in range(start, len(normals)):
            v = normals[k]
            residual = v - basis.T @ (basis @ v) if basis.size else v
            norm = np.linalg.norm(residual)
            if norm > tol * max(scale, 1.0):
                total += extend(np.vstack([basis, residual / norm]) if basis.size else (residual / norm)[None, :],
                                k + 1)
        return total

    return extend(np.empty((0, 0)), 0)


def multi_upper(spec: GcnSpec, adj: NormalizedAdjacency) -> int:
    """R_N'' * prod_{l>=2} sum_{i<=D N_0} C(D N_l, i)"""
    d = adj.node_count
    n0 = spec.widths[0]
    first = one_layer_max(adj.d_star, n0, spec.widths[1])
    return first * prod(binom_sum(d * n0, d * n_l) for n_l in spec.widths[2:])


def check_intermediate_widths(spec: GcnSpec) -> None:
    """Raise HypothesisError unless N_l >= N_0 for l = 1..L-1."""
    n0 = spec.widths[0]
    short = [l for l in range(1, spec.layers) if spec.widths[l] < n0]
    if short:
        raise HypothesisError(f"Assume that N_l >= N_0: layer(s) {short} have fewer than {n0} features "
                              f"(widths {list(spec.widths)})")


def multi_lower(spec: GcnSpec, adj: NormalizedAdjacency, rank_a: Optional[int] = None) -> int:
    """R_N' * prod_{l<L} floor(N_l / N_0)^(N_0 rank(A))"""
    check_intermediate_widths(spec)
    if rank_a is None:
        rank_a = adj.rank
    n0 = spec.widths[0]
    last = one_layer_max(adj.d_star, n0, spec.widths[-1])
    return last * prod((n_l // n0) ** (n0 * rank_a) for n_l in spec.widths[1:-1])


def nn_upper(input_dim: int, widths: Sequence[int]) -> int:
    """Upper bound for a fully connected ReLU net: product of per-layer binomial sums."""
    return prod(binom_sum(input_dim, w) for w in widths)


def cnn_upper(first_layer_regions: int, input_dim: int, widths: Sequence[int]) -> int:
    """Comparator for a CNN: one-layer count times binomial sums of the later layers."""
    return first_layer_regions * nn_upper(input_dim, widths)


def central_regions(m: int, n: int) -> int:
    """Regions of m central hyperplanes in general position in R^n: 2 sum_{j<n} C(m-1, j)."""
    if m == 0:
        return 1
    return 2 * sum(comb(m - 1, j) for j in range(n))


def per_param_ratio(region_bound: int, spec: GcnSpec) -> Fraction:
    return Fraction(region_bound, param_count(spec))


def depth_comparison(adj: NormalizedAdjacency, n_in: int, n_out: int, layers: int) -> Tuple[Fraction, Fraction]:
    """
    Per-parameter ratios of a deep and a shallow GCN of comparable size.

    The deep net has widths [N, N', ..., N'] over `layers` layers and is
    scored by its lower bound; the shallow one has widths [N, L N'] and is
    scored by its exact one-layer maximum.
    """
    deep = GcnSpec(widths=(n_in,) + (n_out,) * layers)
    shallow = GcnSpec(widths=(n_in, layers * n_out))
    deep_ratio = per_param_ratio(multi_lower(deep, adj), deep)
    shallow_ratio = per_param_ratio(one_layer_max(adj.d_star, n_in, layers * n_out), shallow)
    return deep_ratio, shallow_ratio


def gcn_vs_mlp(adj: NormalizedAdjacency, n_in: int, width: int, layers: int) -> Tuple[int, int]:
    """Lower bound of an L-layer GCN against the upper bound of an L-layer MLP on D*N_0 inputs."""
    spec = GcnSpec(widths=(n_in,) + (width,) * layers)
    return multi_lower(spec, adj), nn_upper(adj.node_count * n_in, [width] * layers)


def bound_report(spec: GcnSpec, adj: NormalizedAdjacency, exact: Optional[int] = None) -> BoundReport:
    """Collect every applicable bound for the pair."""
    params = param_count(spec)
    upper = multi_upper(spec, adj)
    try:
        lower = multi_lower(spec, adj)
    except HypothesisError as e:
        logger.warning(f"Skipping lower bound: {str(e)}")
        lower = None
    single = one_layer_max(adj.d_star, spec.widths[0], spec.widths[1]) if spec.layers == 1 else None
    return BoundReport(
        widths=list(spec.widths),
        node_count=adj.node_count,
        d_star=adj.d_star,
        naive=naive_bound(count_neurons(spec, adj.node_count)),
        one_layer_max=single,
        multi_lower=lower,
        multi_upper=upper,
        params=params,
        ratio_lower=Fraction(lower, params) if lower is not None else None,
        ratio_upper=Fraction(upper, params),
        exact=exact,
    )
