"""
Command-line front end

Subcommands bounds, count, estimate, witness, slice and reproduce. Settings
come from the environment (.env), then a JSON --config file, then flags.
Every run writes its resolved configuration to run_config.json next to
its artifacts.
"""

import argparse
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError

from region_atlas.arrangement import build_one_layer_arrangement, count_regions, dump_regions, \
    enumerate_regions_multi, is_degenerate
from region_atlas.bounds import BigInt, bound_report, check_intermediate_widths, kset_count
from region_atlas.config import Settings
from region_atlas.errors import CapExceededError, HypothesisError, InvalidInputError, SolverError
from region_atlas.graph import check_rank_lemma, load_graph, normalize
from region_atlas.model import GcnSpec, Parameters, count_neurons, init_kaiming, load_spec
from region_atlas.render import SliceSpec, emit_figure_curves, emit_table1, emit_table2, format_table, \
    rasterize_slice, write_csv, write_ppm
from region_atlas.sampler import SamplingConfig, estimate_regions, parse_distribution
from region_atlas.witness import build_witness, verify_folding, witness_region_check

logger = logging.getLogger(__name__)

COMMANDS = ("bounds", "count", "estimate", "witness", "slice", "reproduce")
EXIT_OK, EXIT_INVALID, EXIT_CAP = 0, 2, 3

# path3 networks rendered by `reproduce`
REPRODUCE_SLICES = {
    "slice_1layer.ppm": [1, 4],
    "slice_2layer.ppm": [1, 4, 4],
    "slice_3layer.ppm": [1, 4, 4, 4],
}


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run"""

    command: Literal["bounds", "count", "estimate", "witness", "slice", "reproduce"]
    graph: str = Field("path3", description="Fixture name or graph JSON file")
    widths: List[int] = Field(default_factory=lambda: [2, 2, 3], description="Layer widths N_0..N_L")
    seed: int = Field(0, description="Seed for parameter draws, sampling and slices")
    box: float = Field(1e4, description="Half-width of the bounding box for exact counts")
    samples: int = Field(2_000_000, description="Inputs per sampling configuration")
    dist: str = Field("normal:1", description="normal:SIGMA or uniform:U")
    output: str = Field("./out", description="Directory for all artifacts")
    threads: int = Field(1, description="Worker cap")
    fast: bool = Field(False, description="Use the reduced sample count")
    params: Optional[str] = Field(None, description="Parameters JSON file; Kaiming draw from seed when absent")


class CountReport(BaseModel):
    """Exact region count of one network"""

    graph: str
    widths: List[int]
    seed: int
    exact: BigInt
    kset: Optional[BigInt] = Field(None, description="Independent-subset bound, one-layer networks within the cap")
    degenerate: Optional[bool] = Field(None, description="Near-degeneracy flag, one-layer networks only")
    rank_lemma: bool = Field(True, description="Whether rank(Ã) == D* held for the graph")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="region_atlas",
                                     description="Count, bound and draw the linear regions of ReLU GCNs")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--graph", help="Fixture name (path3, star3, fig2_graph4, triangle3, single1) or JSON file")
    parser.add_argument("--widths", help="Comma-separated widths, e.g. 2,2,3")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--dist", help="normal:SIGMA or uniform:U")
    parser.add_argument("--box", type=float)
    parser.add_argument("--threads", type=int, help="Worker cap (default REGION_ATLAS_THREADS)")
    parser.add_argument("--out", dest="output", help="Output directory")
    parser.add_argument("--fast", action="store_true", default=None, help="Reduced sample count for quick runs")
    parser.add_argument("--params", help="Parameters JSON file")
    parser.add_argument("--config", help="JSON file with any of the settings above")
    return parser


def resolve_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    """Merge settings, the --config file and flags; later sources win."""
    values: Dict[str, Any] = {
        "box": settings.BOX,
        "samples": settings.SAMPLES,
        "output": settings.OUTPUT_DIR,
        "threads": settings.THREADS,
    }
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                values.update(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidInputError(f"Cannot read config file {args.config}: {str(e)}") from e
    flags = {k: v for k, v in vars(args).items() if k != "config" and v is not None}
    if isinstance(flags.get("widths"), str):
        flags["widths"] = [int(w) for w in flags["widths"].split(",")]
    values.update(flags)
    if values.get("fast") and "samples" not in flags:
        values["samples"] = settings.FAST_SAMPLES
    return RunConfig.model_validate(values)


def _load_params(config: RunConfig, spec: GcnSpec, node_count: int) -> Parameters:
    if config.params is None:
        return init_kaiming(spec, config.seed)
    try:
        with open(config.params, "r", encoding="utf-8") as f:
            params = Parameters.from_json(f.read())
    except (OSError, KeyError, json.JSONDecodeError) as e:
        raise InvalidInputError(f"Cannot read parameters from {config.params}: {str(e)}") from e
    params.check(spec, node_count)
    return params


def validate(config: RunConfig, settings: Optional[Settings] = None) -> List[str]:
    """Every violated precondition of the run, without running it."""
    settings = settings or Settings()
    violations: List[str] = []
    try:
        graph = load_graph(config.graph)
    except (InvalidInputError, ValidationError) as e:
        violations.append(f"graph: {str(e)}")
        graph = None
    try:
        spec = GcnSpec(widths=tuple(config.widths))
    except (InvalidInputError, ValidationError) as e:
        violations.append(f"widths: {str(e)}")
        spec = None
    if config.box <= 0:
        violations.append(f"box: half-width must be positive, got {config.box}")
    if config.samples < 1:
        violations.append(f"samples: need at least one sample, got {config.samples}")
    if config.threads < 1:
        violations.append(f"threads: need at least one worker, got {config.threads}")
    if config.command == "estimate":
        try:
            parse_distribution(config.dist)
        except InvalidInputError as e:
            violations.append(f"dist: {str(e)}")
    if config.params is not None and not Path(config.params).exists():
        violations.append(f"params: file {config.params} not found")

    if spec is not None and config.command == "witness":
        try:
            check_intermediate_widths(spec)
        except HypothesisError as e:
            violations.append(f"witness: {str(e)}")
    if spec is not None and graph is not None and config.command == "count":
        d = graph.node_count
        if spec.layers == 1 and d * spec.widths[1] > settings.PLANE_CAP:
            violations.append(f"count: {d * spec.widths[1]} hyperplanes exceed the cap of {settings.PLANE_CAP}; "
                              f"use `estimate` instead")
        elif spec.layers > 1 and count_neurons(spec, d) > settings.NEURON_CAP:
            violations.append(f"count: {count_neurons(spec, d)} neurons exceed the cap of {settings.NEURON_CAP}; "
                              f"use `estimate` instead")
    return violations


def _write_json(path: Path, payload: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(payload + "\n")


def _run_bounds(config: RunConfig, settings: Settings, out: Path) -> None:
    adj = normalize(load_graph(config.graph))
    check_rank_lemma(adj)
    report = bound_report(load_spec(config.widths), adj)
    _write_json(out / "bounds.json", report.model_dump_json(indent=2))
    logger.info(f"Bounds: lower {report.multi_lower}, upper {report.multi_upper}, naive {report.naive}")


def _run_count(config: RunConfig, settings: Settings, out: Path) -> None:
    adj = normalize(load_graph(config.graph))
    rank_lemma = check_rank_lemma(adj)
    spec = load_spec(config.widths)
    params = _load_params(config, spec, adj.node_count)
    degenerate, kset = None, None
    if spec.layers == 1:
        w, b = params.weights[0], params.biases[0]
        planes = build_one_layer_arrangement(adj, w, b)
        # zero-normal planes were dropped, so fewer planes also means degenerate
        degenerate = len(planes) < adj.node_count * spec.widths[1] or is_degenerate(planes, spec.widths[0])
        if degenerate:
            logger.warning("One-layer arrangement is near-degenerate; the count may fall below one_layer_max")
        if adj.d_star * spec.widths[1] <= settings.KSET_CAP:
            kset = kset_count(adj, w, cap=settings.KSET_CAP, tol=settings.TOLERANCE)
        count, regions = count_regions(planes, config.box, cap=settings.PLANE_CAP,
                                       threshold=settings.SLACK_THRESHOLD, dim=adj.node_count * spec.widths[0],
                                       workers=config.threads)
    else:
        regions = enumerate_regions_multi(spec, adj, params, box=config.box, cap=settings.NEURON_CAP,
                                          threshold=settings.SLACK_THRESHOLD, tol=settings.TOLERANCE,
                                          workers=config.threads)
        count = len(regions)
    report = CountReport(graph=config.graph, widths=config.widths, seed=config.seed, exact=count,
                         kset=kset, degenerate=degenerate, rank_lemma=rank_lemma)
    _write_json(out / "count.json", report.model_dump_json(indent=2))
    dump_regions(regions, out / "regions.jsonl")
    logger.info(f"Exact count: {count} regions")


def _run_estimate(config: RunConfig, settings: Settings, out: Path) -> None:
    adj = normalize(load_graph(config.graph))
    check_rank_lemma(adj)
    spec = load_spec(config.widths)
    params = _load_params(config, spec, adj.node_count)
    distribution, scale = parse_distribution(config.dist)
    cfg = SamplingConfig(distribution=distribution, scale=scale, samples=config.samples, seed=config.seed,
                         batch=settings.BATCH)
    report = estimate_regions(spec, adj, params, cfg, workers=config.threads)
    _write_json(out / "estimate.json", report.model_dump_json(indent=2))


def _run_witness(config: RunConfig, settings: Settings, out: Path) -> None:
    adj = normalize(load_graph(config.graph))
    check_rank_lemma(adj)
    spec = load_spec(config.widths)
    params, plan = build_witness(spec, adj, config.seed)
    folding = verify_folding(spec, adj, plan, seed=config.seed, params=params)
    try:
        check = witness_region_check(spec, adj, config.seed, box=config.box, cap=settings.NEURON_CAP,
                                     workers=config.threads, params=params)
    except CapExceededError as e:
        logger.warning(f"Skipping the witness region check: {str(e)}")
        check = None
    payload = {
        "params": json.loads(params.to_json()),
        "plan": {"p_per_layer": list(plan.p_per_layer), "r": plan.r.tolist(), "widths": list(plan.widths),
                 "final_seed": plan.final_seed},
        "folding": json.loads(folding.model_dump_json()),
        "region_check": json.loads(check.model_dump_json()) if check is not None else None,
    }
    _write_json(out / "witness.json", json.dumps(payload, indent=2))
    if not folding.passed:
        logger.warning(f"Folding verification failed: {folding.failures[:3]}")


def _run_slice(config: RunConfig, settings: Settings, out: Path) -> None:
    adj = normalize(load_graph(config.graph))
    spec = load_spec(config.widths)
    params = _load_params(config, spec, adj.node_count)
    image = rasterize_slice(spec, adj, params,
                            SliceSpec(grid=settings.SLICE_GRID, range=settings.SLICE_RANGE, seed=config.seed))
    write_ppm(image, out / "slice.ppm")
    _write_json(out / "slice.json", json.dumps({"distinct_patterns": image.distinct_patterns}))


def _run_reproduce(config: RunConfig, settings: Settings, out: Path) -> None:
    start_time = time.time()
    table1 = emit_table1()
    write_csv(table1, out / "table1.csv")
    print(format_table(table1))

    logger.info(f"Sampling two-layer table estimates with {config.samples} inputs per configuration")
    table2 = emit_table2(seed=config.seed, samples=config.samples, batch=min(settings.BATCH, config.samples),
                         workers=config.threads)
    write_csv(table2, out / "table2.csv")
    print(format_table(table2))

    write_csv(emit_figure_curves("fig2_graph4"), out / "fig2_curves.csv")
    write_csv(emit_figure_curves("star3"), out / "fig3_curves.csv")

    adj = normalize(load_graph("path3"))
    for name, widths in REPRODUCE_SLICES.items():
        spec = GcnSpec(widths=tuple(widths))
        image = rasterize_slice(spec, adj, init_kaiming(spec, config.seed),
                                SliceSpec(grid=settings.SLICE_GRID, range=settings.SLICE_RANGE, seed=config.seed))
        write_ppm(image, out / name)
        logger.info(f"{name}: {image.distinct_patterns} patterns for widths {widths}")
    logger.info(f"Reproduction finished in {time.time() - start_time:.2f}s")


_RUNNERS = {
    "bounds": _run_bounds,
    "count": _run_count,
    "estimate": _run_estimate,
    "witness": _run_witness,
    "slice": _run_slice,
    "reproduce": _run_reproduce,
}


def run(config: RunConfig, settings: Optional[Settings] = None) -> int:
    """Execute one command; returns the process exit code."""
    settings = settings or Settings()
    start_time = time.time()
    # reproduce always works on its own fixed networks
    violations = [] if config.command == "reproduce" else validate(config, settings)
    if violations:
        for violation in violations:
            logger.error(f"Invalid configuration: {violation}")
        return EXIT_INVALID

    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "run_config.json", config.model_dump_json(indent=2))
    try:
        _RUNNERS[config.command](config, settings, out)
    except (InvalidInputError, HypothesisError, ValidationError) as e:
        logger.error(f"{config.command} failed: {str(e)}")
        return EXIT_INVALID
    except (CapExceededError, SolverError) as e:
        logger.error(f"{config.command} failed: {str(e)}")
        return EXIT_CAP
    logger.info(f"{config.command} finished in {time.time() - start_time:.2f}s; artifacts in {out}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = Settings()
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler()]
    )
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args, settings)
    except (InvalidInputError, ValidationError, ValueError) as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return EXIT_INVALID
    return run(config, settings)


if __name__ == "__main__":
    raise SystemExit(main())
