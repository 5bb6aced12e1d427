"""
Monte Carlo region estimation

Draws inputs from a normal or uniform distribution, records the activation
pattern of each, and counts distinct patterns. Samples are cut into batches
with their own Philox streams keyed by (seed, stream, batch index), so the
result does not depend on how many worker threads process the batches.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from region_atlas.bounds import BigInt
from region_atlas.errors import InvalidInputError
from region_atlas.graph import NormalizedAdjacency
from region_atlas.model import GcnSpec, Parameters, SEED_MASK, forward, pack_bits, pattern_bits

logger = logging.getLogger(__name__)

SWEEP_VARIANCES = (1, 3, 5, 7, 9)
SWEEP_HALF_WIDTHS = (1, 5, 10)
SWEEP_SAMPLES = 2_000_000


class SamplingConfig(BaseModel):
    """Input distribution and sample budget for one estimate"""

    model_config = ConfigDict(frozen=True)

    distribution: Literal["normal", "uniform"] = Field(..., description="Entrywise input distribution")
    scale: float = Field(..., gt=0, description="Standard deviation sigma (normal) or half-width u (uniform)")
    samples: int = Field(..., ge=1, description="Number of inputs S")
    seed: int = Field(0, description="Base seed")
    batch: int = Field(50_000, ge=1, description="Inputs per batch")
    stream: int = Field(0, ge=0, description="Stream index, distinct per configuration of a sweep")

    @field_validator("seed")
    @classmethod
    def _mask_seed(cls, value):
        return value & SEED_MASK

    def label(self) -> str:
        if self.distribution == "normal":
            return f"normal:{self.scale:g}"
        return f"uniform:{self.scale:g}"


class ConfigCount(BaseModel):
    """Distinct patterns found under one sampling configuration"""

    config: SamplingConfig
    count: BigInt


class EstimateReport(BaseModel):
    """Distinct activation patterns found by sampling"""

    distinct_patterns: BigInt = Field(..., description="Distinct patterns of the run (max for sweeps)")
    samples_used: int = Field(..., description="Inputs evaluated per configuration")
    per_config: List[ConfigCount] = Field(default_factory=list, description="Count for each configuration")
    max_over_configs: BigInt = Field(..., description="Largest per-configuration count")
    seed: int = Field(..., description="Seed the run was drawn from")


def parse_distribution(text: str) -> Tuple[str, float]:
    """Parse "normal:sigma" or "uniform:u"."""
    try:
        name, value = text.split(":", 1)
        scale = float(value)
    except ValueError as e:
        raise InvalidInputError(f"Distribution must look like normal:SIGMA or uniform:U, got '{text}'") from e
    if name not in ("normal", "uniform") or scale <= 0:
        raise InvalidInputError(f"Distribution must look like normal:SIGMA or uniform:U, got '{text}'")
    return name, scale


def draw_inputs(cfg: SamplingConfig, shape: Tuple[int, int], batch_index: int) -> np.ndarray:
    """The full batch `batch_index` of inputs, shape (cfg.batch, D, N_0)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, cfg.stream, batch_index])))
    size = (cfg.batch,) + shape
    if cfg.distribution == "normal":
        return rng.normal(0.0, cfg.scale, size=size)
    return rng.uniform(-cfg.scale, cfg.scale, size=size)


def _batch_keys(spec: GcnSpec, adj: NormalizedAdjacency, params: Parameters,
                cfg: SamplingConfig, batch_index: int, take: int) -> List[bytes]:
    x0 = draw_inputs(cfg, (adj.node_count, spec.widths[0]), batch_index)[:take]
    _, preacts = forward(spec, adj, params, x0)
    return pack_bits(pattern_bits(preacts))


def estimate_regions(spec: GcnSpec, adj: NormalizedAdjacency, params: Parameters,
                     cfg: SamplingConfig, workers: int = 1) -> EstimateReport:
    """Count distinct activation patterns over cfg.samples random inputs."""
    start_time = time.time()
    batches = math.ceil(cfg.samples / cfg.batch)

    def run(index: int) -> Set[bytes]:
        take = min(cfg.batch, cfg.samples - index * cfg.batch)
        return set(_batch_keys(spec, adj, params, cfg, index, take))

    seen: Set[bytes] = set()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(run, range(batches)):
                seen |= part
    else:
        for index in range(batches):
            seen |= run(index)

    count = len(seen)
    logger.info(f"Sampled {cfg.samples} inputs from {cfg.label()}: {count} distinct patterns "
                f"in {time.time() - start_time:.2f}s")
    return EstimateReport(
        distinct_patterns=count,
        samples_used=cfg.samples,
        per_config=[ConfigCount(config=cfg, count=count)],
        max_over_configs=count,
        seed=cfg.seed,
    )


def sweep_configs(seed: int, samples: int = SWEEP_SAMPLES, batch: int = 50_000) -> List[SamplingConfig]:
    """Normal inputs with variance 1, 3, 5, 7, 9 and uniform inputs on (-u, u) for u = 1, 5, 10."""
    configs = [SamplingConfig(distribution="normal", scale=math.sqrt(v), samples=samples, seed=seed,
                              batch=batch, stream=i)
               for i, v in enumerate(SWEEP_VARIANCES)]
    configs += [SamplingConfig(distribution="uniform", scale=float(u), samples=samples, seed=seed,
                               batch=batch, stream=len(SWEEP_VARIANCES) + i)
                for i, u in enumerate(SWEEP_HALF_WIDTHS)]
    return configs


def paper_sweep(spec: GcnSpec, adj: NormalizedAdjacency, params: Parameters, seed: int,
                samples: int = SWEEP_SAMPLES, batch: int = 50_000, workers: int = 1) -> EstimateReport:
    """Run all eight sampling configurations and keep the largest count."""
    start_time = time.time()
    per_config = []
    for cfg in sweep_configs(seed, samples, batch):
        report = estimate_regions(spec, adj, params, cfg, workers)
        per_config.append(ConfigCount(config=cfg, count=report.distinct_patterns))
    best = max(entry.count for entry in per_config)
    logger.info(f"Sampling sweep for widths {list(spec.widths)}: max {best} patterns "
                f"in {time.time() - start_time:.2f}s")
    return EstimateReport(
        distinct_patterns=best,
        samples_used=samples,
        per_config=per_config,
        max_over_configs=best,
        seed=seed & SEED_MASK,
    )


def saturation_curve(spec: GcnSpec, adj: NormalizedAdjacency, params: Parameters,
                     cfg: SamplingConfig, checkpoints: Sequence[int]) -> List[Tuple[int, int]]:
    """Distinct-pattern counts after each prefix of the same sample stream."""
    checkpoints = list(checkpoints)
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])) or not checkpoints or checkpoints[0] < 1:
        raise InvalidInputError(f"Checkpoints must be positive and strictly ascending, got {checkpoints}")
    seen: Set[bytes] = set()
    curve = []
    consumed = 0
    batch_index = 0
    pending = list(checkpoints)
    while pending:
        keys = _batch_keys(spec, adj, params, cfg, batch_index, cfg.batch)
        batch_index += 1
        cursor = 0
        while pending and pending[0] <= consumed + len(keys):
            upto = pending.pop(0) - consumed
            seen.update(keys[cursor:upto])
            cursor = upto
            curve.append((consumed + upto, len(seen)))
        seen.update(keys[cursor:])
        consumed += len(keys)
    return curve
