"""
Tables, figure curves and 2-D region slices

Reproduces the one- and two-layer bound tables, the bound curves for the
4-node and star graphs, and pattern-coloured slices through the input space.
"""

import csv
import hashlib
import logging
import time
from math import comb
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

from region_atlas.bounds import binom_sum, multi_lower, multi_upper, naive_bound, one_layer_max
from region_atlas.errors import InvalidInputError
from region_atlas.graph import NormalizedAdjacency, fixture, normalize
from region_atlas.model import GcnSpec, Parameters, forward, init_kaiming, pack_bits, pattern_bits
from region_atlas.sampler import paper_sweep

logger = logging.getLogger(__name__)

Cell = Union[int, str, bool, None]


class Table(BaseModel):
    """A labelled table: one header row, then data rows"""

    header: List[str]
    rows: List[List[Cell]]
    notes: List[str] = Field(default_factory=list)


class SliceSpec(BaseModel):
    """A 2-D affine slice through the flattened input space"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    anchors: Optional[np.ndarray] = Field(None, description="3 x d anchor points; random when absent")
    grid: int = Field(300, ge=1, description="Pixels per axis")
    range: float = Field(10.0, gt=0, description="Half-width of the slice coordinates")
    seed: int = Field(0, description="Seed for random anchors")


class SliceImage(BaseModel):
    """Pattern-coloured raster of a slice"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    width: int
    height: int
    pixels: np.ndarray = Field(..., description="height x width x 3 uint8")
    distinct_patterns: int


class FigureConfig(BaseModel):
    """Architecture swept by a bound-curve figure"""

    n0: int = Field(..., description="Input features")
    n1_values: List[int] = Field(..., description="First-layer widths on the x axis")
    last_width: int = Field(3, description="Output features of the second layer")


FIGURE_CONFIGS: Dict[str, FigureConfig] = {
    "fig2_graph4": FigureConfig(n0=1, n1_values=list(range(1, 20)), last_width=3),
    "star3": FigureConfig(n0=2, n1_values=list(range(2, 21)), last_width=3),
}


def _slice_basis(anchors: np.ndarray, tol: float = 1e-9):
    a0, a1, a2 = anchors
    e1 = a1 - a0
    scale = max(np.linalg.norm(e1), np.linalg.norm(a2 - a0), 1.0)
    if np.linalg.norm(e1) <= tol * scale:
        raise InvalidInputError("Slice anchors are not affinely independent")
    e1 = e1 / np.linalg.norm(e1)
    e2 = (a2 - a0) - ((a2 - a0) @ e1) * e1
    if np.linalg.norm(e2) <= tol * scale:
        raise InvalidInputError("Slice anchors are not affinely independent")
    return a0, e1, e2 / np.linalg.norm(e2)


def pattern_colors(keys: Sequence[bytes]) -> Dict[bytes, tuple]:
    """Stable RGB per pattern key, rehashed with a counter until colors are unique."""
    colors: Dict[bytes, tuple] = {}
    used = set()
    for key in sorted(set(keys)):
        salt = 0
        while True:
            digest = hashlib.blake2b(key + salt.to_bytes(4, "little"), digest_size=3).digest()
            if digest not in used:
                break
            salt += 1
        used.add(digest)
        colors[key] = tuple(digest)
    return colors


def rasterize_slice(spec: GcnSpec, adj: NormalizedAdjacency, params: Parameters,
                    slice_spec: SliceSpec) -> SliceImage:
    """Colour each pixel of the slice by its activation pattern."""
    start_time = time.time()
    dim = adj.node_count * spec.widths[0]
    anchors = slice_spec.anchors
    if anchors is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([slice_spec.seed, 0x511CE])))
        anchors = rng.normal(0.0, 1.0, size=(3, dim))
    anchors = np.asarray(anchors, dtype=float)
    if anchors.shape != (3, dim):
        raise InvalidInputError(f"Slice anchors must have shape (3, {dim}), got {anchors.shape}")
    origin, e1, e2 = _slice_basis(anchors)

    axis = np.linspace(-slice_spec.range, slice_spec.range, slice_spec.grid)
    t, s = np.meshgrid(axis, axis, indexing="ij")
    points = origin + s.reshape(-1, 1) * e1 + t.reshape(-1, 1) * e2
    _, preacts = forward(spec, adj, params, points.reshape(-1, adj.node_count, spec.widths[0]))
    keys = pack_bits(pattern_bits(preacts))
    colors = pattern_colors(keys)
    pixels = np.array([colors[k] for k in keys], dtype=np.uint8).reshape(slice_spec.grid, slice_spec.grid, 3)
    logger.info(f"Rasterized {slice_spec.grid}x{slice_spec.grid} slice: {len(colors)} patterns "
                f"in {time.time() - start_time:.2f}s")
    return SliceImage(width=slice_spec.grid, height=slice_spec.grid, pixels=pixels, distinct_patterns=len(colors))


def write_ppm(image: SliceImage, path: Union[str, Path]) -> None:
    """Binary PPM (P6) via Pillow."""
    Image.fromarray(image.pixels, mode="RGB").save(Path(path), format="PPM")


def emit_table1(n1_range: Sequence[int] = range(1, 6)) -> Table:
    """One-layer GCN on the 3-node path with one input feature."""
    n1_range = list(n1_range)
    return Table(
        header=["N1"] + [str(n) for n in n1_range],
        rows=[
            ["R_N"] + [one_layer_max(3, 1, n) for n in n1_range],
            ["General position bound"] + [binom_sum(3, 3 * n) for n in n1_range],
            ["Naive bound"] + [naive_bound(3 * n) for n in n1_range],
        ],
    )


def emit_table2(n2_range: Sequence[int] = range(1, 6), seed: int = 0, samples: int = 2_000_000,
                batch: int = 50_000, workers: int = 1) -> Table:
    """Two-layer GCN on the 3-node path, widths [2, 2, N2]: lower bound, sampled estimate, upper bound."""
    adj = normalize(fixture("path3"))
    n2_range = list(n2_range)
    lower, estimate, upper = [], [], []
    notes = []
    for n2 in n2_range:
        spec = GcnSpec(widths=(2, 2, n2))
        lo, hi = multi_lower(spec, adj), multi_upper(spec, adj)
        found = paper_sweep(spec, adj, init_kaiming(spec, seed), seed, samples, batch, workers).max_over_configs
        if not lo <= found <= hi:
            message = f"N2={n2}: estimate {found} outside [{lo}, {hi}] for seed {seed}"
            logger.warning(message)
            notes.append(message)
        lower.append(lo)
        estimate.append(found)
        upper.append(hi)
    return Table(
        header=["N2"] + [str(n) for n in n2_range],
        rows=[["Lower bound"] + lower, ["Simulated Estimate"] + estimate, ["Upper bound"] + upper],
        notes=notes,
    )


def _printed_bounds(graph_fixture: str, n1: int):
    """The two-layer bounds exactly as printed beside the figures."""
    if graph_fixture == "fig2_graph4":
        return 625 * n1 ** 4, (1 + n1) ** 4 * sum(comb(4 * n1, i) for i in range(4 * n1 + 1))
    half = (n1 * n1 + n1) // 2 + 1
    return 343 * (n1 // 2) ** 3, half ** 3 * sum(comb(3 * n1, i) for i in range(3 * n1 + 1))


def emit_figure_curves(graph_fixture: str, config: Optional[FigureConfig] = None) -> Table:
    """
    Per-N1 bound curves for a one-layer GCN [N0, N1] and a two-layer GCN
    [N0, N1, 3]. Printed and formula-derived two-layer bounds are emitted
    side by side with a flag wherever they disagree.
    """
    if graph_fixture not in FIGURE_CONFIGS:
        raise InvalidInputError(f"No figure for '{graph_fixture}'; choose from {', '.join(FIGURE_CONFIGS)}")
    config = config or FIGURE_CONFIGS[graph_fixture]
    adj = normalize(fixture(graph_fixture))
    d, n0 = adj.node_count, config.n0
    rows = []
    lower_conflicts, upper_conflicts = 0, 0
    for n1 in config.n1_values:
        spec = GcnSpec(widths=(n0, n1, config.last_width))
        lower = multi_lower(spec, adj) if n1 >= n0 else None
        upper = multi_upper(spec, adj)
        printed_lower, printed_upper = _printed_bounds(graph_fixture, n1)
        lower_flag = lower != printed_lower
        upper_flag = upper != printed_upper
        lower_conflicts += lower_flag
        upper_conflicts += upper_flag
        rows.append([
            n1,
            one_layer_max(adj.d_star, n0, n1),
            binom_sum(d * n0, d * n1),
            naive_bound(d * n1),
            lower,
            printed_lower,
            upper,
            printed_upper,
            lower_flag,
            upper_flag,
        ])
    notes = []
    if lower_conflicts:
        notes.append(f"two-layer lower bound: printed formula differs from the derived one in "
                     f"{lower_conflicts} of {len(rows)} rows")
    if upper_conflicts:
        notes.append(f"two-layer upper bound: printed formula differs from the derived one in "
                     f"{upper_conflicts} of {len(rows)} rows")
    for note in notes:
        logger.warning(f"{graph_fixture}: {note}")
    return Table(
        header=["N1", "one_layer_optimal", "general_position_bound", "naive_bound",
                "two_layer_lower_formula_derived", "two_layer_lower_paper_printed",
                "two_layer_upper_formula_derived", "two_layer_upper_paper_printed",
                "lower_discrepancy", "upper_discrepancy"],
        rows=rows,
        notes=notes,
    )


def _cell_text(value: Cell) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    return str(value)


def write_csv(table: Table, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([_cell_text(v) for v in row])


def format_table(table: Table) -> str:
    """Aligned plain-text rendering, first column left-aligned."""
    cells = [table.header] + [[_cell_text(v) for v in row] for row in table.rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(table.header))]
    lines = []
    for row in cells:
        first = row[0].ljust(widths[0])
        rest = [value.rjust(widths[i + 1]) for i, value in enumerate(row[1:])]
        lines.append("  ".join([first] + rest))
    lines.extend(f"# {note}" for note in table.notes)
    return "\n".join(lines) + "\n"
