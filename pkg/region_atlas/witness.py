"""
Lower-bound witness network

Builds a GCN whose intermediate layers fold the cube prod_a [0, sqrt(r_a)]^N_0
onto itself p times per coordinate (sawtooth maps), followed by a generic
last layer, and checks the construction numerically. r_a is the degree of
node a in I+A, so M^(1/2) 1 is a fixed point of Â and the cube is invariant.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from region_atlas.arrangement import DEFAULT_BOX, NEURON_CAP, exact_count_multi
from region_atlas.bounds import BigInt, check_intermediate_widths, multi_lower
from region_atlas.graph import NormalizedAdjacency
from region_atlas.model import GcnSpec, Parameters, forward, layer_rng

logger = logging.getLogger(__name__)

INACTIVE_BIAS = -1.0
CENTRE_JITTER = 0.02
FOLD_TOL = 1e-9


class WitnessPlan(BaseModel):
    """Parameters of the folding construction"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p_per_layer: Tuple[int, ...] = Field(..., description="floor(N_l / N_0) for l = 1..L-1")
    r: np.ndarray = Field(..., description="r_a per node; the cube side is sqrt(r_a)")
    widths: Tuple[int, ...] = Field(..., description="Layer widths of the witness")
    final_seed: int = Field(..., description="Seed of the generic last layer")

    @property
    def sides(self) -> np.ndarray:
        return np.sqrt(self.r)


class FoldingReport(BaseModel):
    """Per-check outcome of verify_folding"""

    checks: Dict[str, bool] = Field(..., description="cube_invariance, sawtooth_composition, cell_surjectivity")
    residuals: Dict[str, float] = Field(..., description="Worst residual per check")
    failures: List[str] = Field(default_factory=list, description="Failing cell or point descriptions")

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


class WitnessCheck(BaseModel):
    """Exact count of the witness network against the lower bound"""

    exact: BigInt
    lower: BigInt
    passed: bool


def sawtooth_fold(p: int, c: float, y):
    """
    relu(p y) + sum_{m=2..p} (-1)^(m+1) relu(2 (p y - (m-1) c))

    The map the folding layer applies coordinatewise: every interval
    [i c/p, (i+1) c/p] goes onto [0, c], alternately up and down.
    """
    y = np.asarray(y, dtype=float)
    total = np.maximum(p * y, 0.0)
    for m in range(2, p + 1):
        total = total + (-1) ** (m + 1) * np.maximum(2.0 * (p * y - (m - 1) * c), 0.0)
    return total if total.ndim else float(total)


def folding_layer(p: int, n0: int, n_out: int, sides: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Weights W (N_0 x N_out), node-wise biases B (D x N_out) and the signed
    recombination W* (N_out x N_0) of one folding layer.

    Output feature b = p k + (m - 1) reads input feature k with weight p
    (m = 1) or 2p (m > 1) and bias -2 (m - 1) sqrt(r_a). Features beyond
    p N_0 are switched off.
    """
    w = np.zeros((n0, n_out))
    b = np.tile(np.full(n_out, INACTIVE_BIAS), (sides.size, 1))
    w_star = np.zeros((n_out, n0))
    for k in range(n0):
        for m in range(1, p + 1):
            col = p * k + m - 1
            w[k, col] = p if m == 1 else 2 * p
            b[:, col] = -2.0 * (m - 1) * sides
            w_star[col, k] = (-1) ** (m + 1)
    return w, b, w_star


def _final_layer(spec: GcnSpec, adj: NormalizedAdjacency, sides: np.ndarray,
                 final_seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Generic weights with hyperplanes centred on the cube midpoint."""
    n0, n_last = spec.widths[0], spec.widths[-1]
    g = layer_rng(final_seed, spec.layers, 0).normal(0.0, 1.0, size=(n0, n_last))
    jitter = layer_rng(final_seed, spec.layers, 1).normal(0.0, 1.0, size=n_last)
    centre = np.tile((sides / 2.0)[:, None], (1, n0))
    # offsets measured along each unit normal stay within CENTRE_JITTER * |jitter| of the centre
    spread = CENTRE_JITTER * float(sides.min()) * jitter * np.linalg.norm(g, axis=0)
    bias = -(adj.a_hat @ centre @ g) + spread
    return g, bias


def build_witness(spec: GcnSpec, adj: NormalizedAdjacency, final_seed: int) -> Tuple[Parameters, WitnessPlan]:
    """
    Assemble the witness as a plain L-layer GCN.

    The recombination W* of each folding layer has no activation, so it is
    merged into the next layer's weight: W'_(l+1) = W*_l W_(l+1).
    """
    check_intermediate_widths(spec)
    n0 = spec.widths[0]
    r = np.asarray(adj.degrees, dtype=float)
    sides = np.sqrt(r)
    p_per_layer = tuple(spec.widths[l] // n0 for l in range(1, spec.layers))

    weights, biases = [], []
    carry: Optional[np.ndarray] = None
    for l, p in enumerate(p_per_layer, start=1):
        w, b, w_star = folding_layer(p, n0, spec.widths[l], sides)
        weights.append(w if carry is None else carry @ w)
        biases.append(b)
        carry = w_star
    g, bias = _final_layer(spec, adj, sides, final_seed)
    weights.append(g if carry is None else carry @ g)
    biases.append(bias)

    plan = WitnessPlan(p_per_layer=p_per_layer, r=r, widths=tuple(spec.widths), final_seed=final_seed)
    logger.info(f"Built witness for widths {list(spec.widths)} with folds {list(p_per_layer)}")
    return Parameters(weights=tuple(weights), biases=tuple(biases)), plan


def verify_folding(spec: GcnSpec, adj: NormalizedAdjacency, plan: WitnessPlan,
                   probes: int = 200, seed: int = 0, params: Optional[Parameters] = None) -> FoldingReport:
    """
    Check the three properties the lower bound rests on:
    cube_invariance (Â maps the cube into itself), sawtooth_composition
    (each folding layer acts as sawtooth_fold on (Â U)) and
    cell_surjectivity (each 1-D cell goes monotonically onto [0, c]).

    params are the witness built from plan; they are rebuilt when omitted.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xF01D])))
    sides = plan.sides
    d, n0 = adj.node_count, spec.widths[0]
    failures: List[str] = []

    # cube invariance
    cube = rng.uniform(0.0, 1.0, size=(probes, d, n0)) * sides[None, :, None]
    mixed = np.einsum("ij,sjk->sik", adj.a_hat, cube)
    below = float(max(0.0, -mixed.min()))
    above = float(max(0.0, (mixed - sides[None, :, None]).max()))
    corner = float(np.max(np.abs(adj.a_hat @ sides - sides)))
    invariance_residual = max(below, above, corner)
    if invariance_residual > FOLD_TOL:
        failures.append(f"cube_invariance: residual {invariance_residual:.3e}")

    # composed layer maps
    if params is None:
        params, _ = build_witness(spec, adj, plan.final_seed)
    outputs, _ = forward(spec, adj, params, cube)
    composition_residual = 0.0
    u = cube
    for l, p in enumerate(plan.p_per_layer, start=1):
        _, _, w_star = folding_layer(p, n0, spec.widths[l], sides)
        expected = sawtooth_fold(p, sides[None, :, None], np.einsum("ij,sjk->sik", adj.a_hat, u))
        actual = outputs[l - 1] @ w_star
        residual = float(np.max(np.abs(actual - expected)))
        composition_residual = max(composition_residual, residual)
        if residual > FOLD_TOL:
            worst = np.unravel_index(np.argmax(np.abs(actual - expected)), actual.shape)
            failures.append(f"sawtooth_composition: layer {l} probe {worst[0]} node {worst[1]} "
                            f"residual {residual:.3e}")
        u = actual

    # 1-D cells
    surjectivity_residual = 0.0
    for p in sorted(set(plan.p_per_layer)):
        for a, c in enumerate(sides):
            for i in range(p):
                lo, hi = i * c / p, (i + 1) * c / p
                ends = (sawtooth_fold(p, c, lo), sawtooth_fold(p, c, hi))
                target = (0.0, c) if i % 2 == 0 else (c, 0.0)
                end_err = max(abs(ends[0] - target[0]), abs(ends[1] - target[1]))
                inner = np.sort(rng.uniform(lo, hi, size=probes))
                inner = inner[(inner > lo) & (inner < hi)]
                images = sawtooth_fold(p, c, inner)
                steps = np.diff(images) if i % 2 == 0 else -np.diff(images)
                interior_ok = bool(np.all(images > 0.0) and np.all(images < c) and np.all(steps >= -FOLD_TOL))
                surjectivity_residual = max(surjectivity_residual, end_err)
                if end_err > FOLD_TOL or not interior_ok:
                    failures.append(f"cell_surjectivity: p={p} node {a} cell {i} endpoints {ends}")

    checks = {
        "cube_invariance": invariance_residual <= FOLD_TOL,
        "sawtooth_composition": composition_residual <= FOLD_TOL,
        "cell_surjectivity": not any(f.startswith("cell_surjectivity") for f in failures),
    }
    for failure in failures:
        logger.warning(f"Folding check failed: {failure}")
    return FoldingReport(
        checks=checks,
        residuals={
            "cube_invariance": invariance_residual,
            "sawtooth_composition": composition_residual,
            "cell_surjectivity": surjectivity_residual,
        },
        failures=failures,
    )


def witness_region_check(spec: GcnSpec, adj: NormalizedAdjacency, final_seed: int,
                         box: float = DEFAULT_BOX, cap: int = NEURON_CAP, workers: int = 1,
                         params: Optional[Parameters] = None) -> WitnessCheck:
    """Exact region count of the witness against the lower bound."""
    if params is None:
        params, _ = build_witness(spec, adj, final_seed)
    exact, _ = exact_count_multi(spec, adj, params, box=box, cap=cap, workers=workers)
    lower = multi_lower(spec, adj)
    if exact < lower:
        logger.warning(f"Witness for widths {list(spec.widths)} has {exact} regions, below the bound {lower}")
    return WitnessCheck(exact=exact, lower=lower, passed=exact >= lower)
