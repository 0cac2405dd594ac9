"""Genetic-algorithm search over the learned scheduler's design space.

This module provides:
- The genome encoding: one gene per state attribute (excluded or a bucket
  count) followed by five parameter genes indexing the value palettes
- ``random_genome`` / ``crossover`` / ``mutate`` / ``select_parent``
- ``decode`` and ``evaluate_fitness`` (geomean speedup over a baseline)
- ``GaState`` / ``next_generation`` and the best-so-far archive
- ``run_ga``: the generation loop with per-generation CSVs, an archive file
  and a resumable checkpoint

Attribute genes hold ``0`` for excluded and ``i`` for ``BUCKET_COUNTS[i - 1]``;
boolean attributes only take ``0`` or ``1`` (two buckets). The random source
of generation ``g`` is derived from ``(seed, g)``, so a resumed run repeats
an uninterrupted one exactly.
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import csv
import hashlib
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import yaml

from warpsched.buckets import ATTRIBUTES, BOOLEAN_ATTRIBUTES, BUCKET_COUNTS
from warpsched.config import GaConfig, Palettes, RlParams, RlwsConfig, validate_config
from warpsched.errors import ConfigError, SimulationFault
from warpsched.experiment import resolve_kernels
from warpsched.report import geomean
from warpsched.rlws import RlwsMetaScheduler, RlwsScheduler
from warpsched.schedulers import make_policy
from warpsched.sim import simulate
from warpsched.workload import KernelSpec

logger = logging.getLogger(__name__)

Genome = tuple[int, ...]

ATTRIBUTE_GENES = tuple(ATTRIBUTES)
PARAM_GENES = ("alpha", "epsilon", "gamma", "reward", "penalty")
NUM_ATTRIBUTE_GENES = len(ATTRIBUTE_GENES)


def gene_options(palettes: Palettes) -> tuple[int, ...]:
    """Number of values each locus can take."""
    attrs = tuple(2 if a in BOOLEAN_ATTRIBUTES else len(BUCKET_COUNTS) + 1 for a in ATTRIBUTE_GENES)
    return attrs + tuple(len(getattr(palettes, p)) for p in PARAM_GENES)


def space_log2(palettes: Palettes) -> float:
    """log2 of the number of distinct genomes (repair ignored).

    Example:
        >>> round(space_log2(Palettes()), 1)
        70.6

    """
    return sum(math.log2(n) for n in gene_options(palettes))


def included(genome: Genome) -> list[int]:
    return [i for i in range(NUM_ATTRIBUTE_GENES) if genome[i]]


def repair(genome: Genome, palettes: Palettes, rng: np.random.Generator) -> Genome:
    """Include one uniformly chosen attribute when none is included."""
    if included(genome):
        return genome
    options = gene_options(palettes)
    locus = int(rng.integers(NUM_ATTRIBUTE_GENES))
    genes = list(genome)
    genes[locus] = int(rng.integers(1, options[locus]))
    return tuple(genes)


def random_genome(rng: np.random.Generator, palettes: Palettes) -> Genome:
    """Uniform draw over every locus, repaired to include an attribute."""
    genome = tuple(int(rng.integers(n)) for n in gene_options(palettes))
    return repair(genome, palettes, rng)


def crossover(
    p1: Genome, p2: Genome, point: int, palettes: Palettes, rng: np.random.Generator
) -> tuple[Genome, Genome]:
    """One-point crossover: ``c1 = p1[:point] + p2[point:]`` and the mirror.

    Raises:
        ValueError: If ``point`` is not in ``1 .. len(p1) - 1``

    """
    if not 1 <= point < len(p1):
        raise ValueError(f"crossover point must be in 1..{len(p1) - 1}, got {point}")
    c1 = p1[:point] + p2[point:]
    c2 = p2[:point] + p1[point:]
    return repair(c1, palettes, rng), repair(c2, palettes, rng)


def mutation_probability(parent_fitnesses: Sequence[float], c: float, p_max: float) -> float:
    mean = sum(parent_fitnesses) / len(parent_fitnesses)
    if mean <= 0:
        return p_max
    return min(max(c / mean, 0.0), p_max)


def mutate(
    child: Genome,
    parent_fitnesses: Sequence[float],
    rng: np.random.Generator,
    palettes: Palettes,
    c: float = 0.02,
    p_max: float = 0.25,
) -> Genome:
    """Re-draw at most one gene, with probability falling as parents get fitter.

    The re-drawn gene always changes value and never removes the only
    included attribute.
    """
    p = mutation_probability(parent_fitnesses, c, p_max)
    if rng.random() >= p:
        return child
    options = gene_options(palettes)
    inc = included(child)
    sole = inc[0] if len(inc) == 1 else None
    loci = [i for i in range(len(child)) if not (i == sole and options[i] == 2)]
    locus = loci[int(rng.integers(len(loci)))]
    values = [v for v in range(options[locus]) if v != child[locus] and not (locus == sole and v == 0)]
    genes = list(child)
    genes[locus] = values[int(rng.integers(len(values)))]
    return tuple(genes)


def select_parent(
    population: Sequence[Genome], fitnesses: Sequence[float], rng: np.random.Generator
) -> Genome:
    """Roulette-wheel selection; uniform when every fitness is zero."""
    f = np.asarray(fitnesses, dtype=float)
    total = f.sum()
    if total <= 0:
        return population[int(rng.integers(len(population)))]
    return population[int(rng.choice(len(population), p=f / total))]


def decode(genome: Genome, palettes: Palettes, decision_interval: int = 1) -> RlwsConfig:
    """Learned-scheduler configuration encoded by ``genome``."""
    attrs = {
        name: BUCKET_COUNTS[gene - 1] if name not in BOOLEAN_ATTRIBUTES else 2
        for name, gene in zip(ATTRIBUTE_GENES, genome[:NUM_ATTRIBUTE_GENES], strict=True)
        if gene
    }
    values = {
        p: getattr(palettes, p)[g]
        for p, g in zip(PARAM_GENES, genome[NUM_ATTRIBUTE_GENES:], strict=True)
    }
    return validate_config(
        {
            "params": RlParams(**values).model_dump(),
            "attributes": attrs,
            "decision_interval": decision_interval,
        },
        RlwsConfig,
        source="genome",
    )


def genome_hash(genome: Genome) -> str:
    return hashlib.sha1(",".join(map(str, genome)).encode()).hexdigest()[:12]


def genome_summary(genome: Genome, palettes: Palettes) -> str:
    cfg = decode(genome, palettes)
    attrs = " ".join(f"{k}:{v}" for k, v in cfg.attributes.items())
    p = cfg.params
    return f"{attrs} | a={p.alpha} e={p.epsilon} g={p.gamma} r={p.reward} p={p.penalty}"


def baseline_cycles(kernels: Sequence[KernelSpec], config: GaConfig) -> list[int]:
    """Cycles of the baseline policy on each kernel."""
    out = []
    for i, kernel in enumerate(kernels):
        policy = make_policy(config.baseline, seed=_kernel_seed(config.seed, i))
        out.append(simulate(kernel, policy, config.gpu).cycles)
    return out


def _kernel_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def evaluate_fitness(
    genome: Genome,
    kernels: Sequence[KernelSpec],
    baseline: Sequence[int],
    config: GaConfig,
) -> float:
    """Geomean over ``kernels`` of baseline cycles over learned-policy cycles.

    A simulation fault yields fitness 0 and a warning.

    Example:
        >>> # speedups 2.0 and 0.5 on a two-kernel suite
        >>> evaluate_fitness(genome, kernels, baseline, config)  # doctest: +SKIP
        1.0

    """
    rl_config = decode(genome, config.palettes, config.decision_interval)
    cls = RlwsMetaScheduler if config.variant == "rlws_ms" else RlwsScheduler
    speedups = []
    try:
        for i, (kernel, base) in enumerate(zip(kernels, baseline, strict=True)):
            policy = cls(rl_config, seed=_kernel_seed(config.seed, i))
            speedups.append(base / simulate(kernel, policy, config.gpu).cycles)
    except SimulationFault as e:
        logger.warning("genome %s faulted: %s %s", genome_hash(genome), e, e.state)
        return 0.0
    return geomean(speedups)


@dataclass(slots=True)
class GaState:
    """Population of one generation plus the best-so-far archive.

    ``archive`` holds ``(fitness, genome)`` pairs of distinct genomes, best
    first, ties broken by genome order.
    """

    generation: int
    population: list[Genome]
    fitnesses: list[float] | None = None
    archive: list[tuple[float, Genome]] = field(default_factory=list)

    @property
    def best(self) -> float:
        return self.archive[0][0] if self.archive else 0.0


def update_archive(state: GaState, size: int) -> None:
    best: dict[Genome, float] = {g: f for f, g in state.archive}
    for genome, fitness in zip(state.population, state.fitnesses or (), strict=True):
        best[genome] = max(fitness, best.get(genome, fitness))
    ranked = sorted(((f, g) for g, f in best.items()), key=lambda e: (-e[0], e[1]))
    state.archive = ranked[:size]


def initial_state(config: GaConfig) -> GaState:
    rng = np.random.default_rng([config.seed, 0])
    return GaState(0, [random_genome(rng, config.palettes) for _ in range(config.population_size)])


def next_generation(state: GaState, config: GaConfig, rng: np.random.Generator) -> GaState:
    """Breed the next population from an evaluated one.

    Children come from roulette selection, one-point crossover and mutation.
    The rest are random genomes, except every ``elite_reinjection_period``-th
    generation, where the archive's top ``elite_count`` genomes replace them.
    """
    if state.fitnesses is None:
        raise ValueError("next_generation needs an evaluated population")
    pal = config.palettes
    pop, fit = state.population, state.fitnesses
    fitness_of = dict(zip(pop, fit, strict=True))
    children: list[Genome] = []
    while len(children) < config.children_per_gen:
        p1 = select_parent(pop, fit, rng)
        p2 = select_parent(pop, fit, rng)
        point = int(rng.integers(1, len(p1)))
        parents = (fitness_of[p1], fitness_of[p2])
        for child in crossover(p1, p2, point, pal, rng):
            if len(children) < config.children_per_gen:
                children.append(
                    mutate(child, parents, rng, pal, config.mutation_c, config.mutation_p_max)
                )
    generation = state.generation + 1
    extra: list[Genome] = []
    if generation % config.elite_reinjection_period == 0 and state.archive:
        extra = [g for _, g in state.archive[: config.elite_count]]
    while len(extra) < config.randoms_per_gen:
        extra.append(random_genome(rng, pal))
    return GaState(generation, children + extra, None, list(state.archive))


def evaluate_population(
    population: Sequence[Genome],
    kernels: Sequence[KernelSpec],
    baseline: Sequence[int],
    config: GaConfig,
) -> list[float]:
    """Fitness of every genome, in population order."""
    task = partial(evaluate_fitness, kernels=kernels, baseline=baseline, config=config)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(task, population, chunksize=max(1, len(population) // (4 * config.workers))))
    return [task(g) for g in population]


# -- run directory -------------------------------------------------------------


def write_generation(state: GaState, config: GaConfig, out_dir: Path) -> Path:
    path = out_dir / f"generation_{state.generation:03d}.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "genome_hash", "fitness", "genome", "summary"])
        for i, (g, f) in enumerate(zip(state.population, state.fitnesses or (), strict=True)):
            writer.writerow(
                [i, genome_hash(g), f"{f:.6f}", " ".join(map(str, g)), genome_summary(g, config.palettes)]
            )
    return path


def write_archive(state: GaState, config: GaConfig, out_dir: Path) -> Path:
    path = out_dir / "archive.yaml"
    entries = [
        {
            "fitness": f,
            "hash": genome_hash(g),
            "genome": list(g),
            "config": decode(g, config.palettes, config.decision_interval).model_dump(),
        }
        for f, g in state.archive
    ]
    path.write_text(yaml.safe_dump({"generation": state.generation, "archive": entries}, sort_keys=False))
    return path


def save_checkpoint(state: GaState, out_dir: Path) -> Path:
    path = out_dir / "checkpoint.yaml"
    data = {
        "generation": state.generation,
        "population": [list(g) for g in state.population],
        "fitnesses": state.fitnesses,
        "archive": [{"fitness": f, "genome": list(g)} for f, g in state.archive],
    }
    tmp = path.with_suffix(".tmp")
    tmp.write_text(yaml.safe_dump(data, sort_keys=False))
    tmp.replace(path)
    return path


def load_checkpoint(out_dir: Path) -> GaState:
    path = out_dir / "checkpoint.yaml"
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"{path}: no checkpoint to resume from") from e
    return GaState(
        generation=int(data["generation"]),
        population=[tuple(g) for g in data["population"]],
        fitnesses=data["fitnesses"],
        archive=[(float(e["fitness"]), tuple(e["genome"])) for e in data["archive"]],
    )


@dataclass(slots=True)
class GaResult:
    state: GaState
    history: list[tuple[int, float, float]]
    final: list[tuple[Genome, float]] = field(default_factory=list)


def run_ga(config: GaConfig, out_dir: str | Path, resume: bool = False) -> GaResult:
    """Run the search, writing a per-generation CSV, the archive and a checkpoint.

    Args:
        config: Search configuration
        out_dir: Run directory
        resume: Continue from ``checkpoint.yaml`` in ``out_dir``

    Returns:
        GaResult: Final state, ``(generation, best, mean)`` per generation, and
            the archive re-evaluated on ``final_suite`` when one is configured

    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kernels = [k for ref in config.suite for k in resolve_kernels(ref, config.seed)]
    baseline = baseline_cycles(kernels, config)
    logger.info(
        "GA: %d kernels, baseline %s, design space 2^%.1f",
        len(kernels),
        config.baseline,
        space_log2(config.palettes),
    )

    state = load_checkpoint(out) if resume else initial_state(config)
    history: list[tuple[int, float, float]] = []
    while True:
        if state.fitnesses is None:
            state.fitnesses = evaluate_population(state.population, kernels, baseline, config)
            update_archive(state, max(config.elite_count, 10))
            write_generation(state, config, out)
            write_archive(state, config, out)
            save_checkpoint(state, out)
        mean = sum(state.fitnesses) / len(state.fitnesses)
        history.append((state.generation, max(state.fitnesses), mean))
        logger.info(
            "generation %d: best %.4f mean %.4f archive best %.4f",
            state.generation,
            max(state.fitnesses),
            mean,
            state.best,
        )
        if state.generation + 1 >= config.generations:
            break
        state = next_generation(state, config, np.random.default_rng([config.seed, state.generation + 1]))

    result = GaResult(state, history)
    if config.final_suite:
        final_kernels = [k for ref in config.final_suite for k in resolve_kernels(ref, config.seed)]
        final_base = baseline_cycles(final_kernels, config)
        genomes = [g for _, g in state.archive]
        scores = evaluate_population(genomes, final_kernels, final_base, config)
        result.final = list(zip(genomes, scores, strict=True))
        path = out / "final.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["genome_hash", "fitness", "summary"])
            for g, f in sorted(result.final, key=lambda e: -e[1]):
                writer.writerow([genome_hash(g), f"{f:.6f}", genome_summary(g, config.palettes)])
    return result
