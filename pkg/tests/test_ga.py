"""Test the genome encoding and the genetic operators of the design-space search."""

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from builders import tiny_template_file

from warpsched.config import GaConfig, GpuConfig, Palettes
from warpsched.ga import (
    ATTRIBUTE_GENES,
    NUM_ATTRIBUTE_GENES,
    GaState,
    crossover,
    decode,
    gene_options,
    included,
    load_checkpoint,
    mutate,
    mutation_probability,
    next_generation,
    random_genome,
    run_ga,
    save_checkpoint,
    select_parent,
    space_log2,
    update_archive,
)

PALETTES = Palettes()


def _genomes(n: int, seed: int = 0) -> list[tuple[int, ...]]:
    rng = np.random.default_rng(seed)
    return [random_genome(rng, PALETTES) for _ in range(n)]


def test_design_space_size():
    """Test that the encoding spans roughly 2^70 configurations."""
    assert 69 <= space_log2(PALETTES) <= 72
    options = gene_options(PALETTES)
    assert len(options) == NUM_ATTRIBUTE_GENES + 5 == 39
    assert options[ATTRIBUTE_GENES.index("TBW")] == 2
    assert options[ATTRIBUTE_GENES.index("GNMIE")] == 4


def test_random_genomes_are_valid():
    """Test that random genomes stay in range and include an attribute."""
    options = gene_options(PALETTES)
    for genome in _genomes(200):
        assert all(0 <= g < n for g, n in zip(genome, options, strict=True))
        assert included(genome)


def test_decode():
    """Test the attribute and parameter values a genome encodes."""
    genome = [0] * NUM_ATTRIBUTE_GENES + [3, 3, 3, 1, 3]
    genome[ATTRIBUTE_GENES.index("GNMIE")] = 3
    genome[ATTRIBUTE_GENES.index("RSPI")] = 1
    genome[ATTRIBUTE_GENES.index("L1MP")] = 1
    cfg = decode(tuple(genome), PALETTES, decision_interval=4)
    assert cfg.attributes == {"RSPI": 2, "L1MP": 2, "GNMIE": 8}
    assert (cfg.params.alpha, cfg.params.epsilon, cfg.params.gamma) == (0.09, 0.04, 0.95)
    assert (cfg.params.reward, cfg.params.penalty) == (1.0, 0.0)
    assert cfg.decision_interval == 4


def test_crossover_conserves_loci():
    """Test that one-point crossover keeps the multiset of genes at every locus."""
    p1, p2 = _genomes(2, seed=3)
    rng = np.random.default_rng(0)
    for point in (1, 17, 38):
        c1, c2 = crossover(p1, p2, point, PALETTES, rng)
        assert c1[:point] == p1[:point] and c1[point:] == p2[point:]
        for i in range(len(p1)):
            assert Counter((c1[i], c2[i])) == Counter((p1[i], p2[i]))
    with pytest.raises(ValueError):
        crossover(p1, p2, 0, PALETTES, rng)


def test_crossover_repairs_empty_attribute_set():
    """Test that a child without attributes gets one attribute back."""
    p1 = tuple([0] * NUM_ATTRIBUTE_GENES + [0] * 5)
    p2 = tuple([1] * NUM_ATTRIBUTE_GENES + [0] * 5)
    c1, _ = crossover(p1, p2, NUM_ATTRIBUTE_GENES, PALETTES, np.random.default_rng(0))
    assert len(included(c1)) == 1


def test_mutation_probability():
    """Test c / mean fitness capped at p_max."""
    assert mutation_probability([1.0, 1.0], 0.02, 0.25) == pytest.approx(0.02)
    assert mutation_probability([0.01, 0.03], 0.02, 0.25) == 0.25
    assert mutation_probability([0.0, 0.0], 0.02, 0.25) == 0.25


def test_mutate_never_and_always():
    """Test that p=0 keeps the child and p=1 changes exactly one gene."""
    rng = np.random.default_rng(5)
    for child in _genomes(50, seed=8):
        assert mutate(child, [1.0, 1.0], rng, PALETTES, c=0.0, p_max=0.25) == child
        mutated = mutate(child, [0.0, 0.0], rng, PALETTES, c=0.02, p_max=1.0)
        assert sum(a != b for a, b in zip(child, mutated, strict=True)) == 1
        assert included(mutated)


def test_mutate_keeps_sole_attribute():
    """Test that mutation never removes the only included attribute."""
    rng = np.random.default_rng(2)
    child = [0] * NUM_ATTRIBUTE_GENES + [0] * 5
    child[ATTRIBUTE_GENES.index("TBW")] = 1
    for _ in range(500):
        assert included(mutate(tuple(child), [0.0, 0.0], rng, PALETTES, p_max=1.0))


def test_select_parent():
    """Test that zero-fitness genomes are never picked while others score."""
    pop = _genomes(4)
    rng = np.random.default_rng(0)
    picks = Counter(select_parent(pop, [0.0, 3.0, 1.0, 0.0], rng) for _ in range(2000))
    assert set(picks) <= {pop[1], pop[2]}
    assert picks[pop[1]] > picks[pop[2]]
    assert select_parent(pop, [0.0] * 4, rng) in pop


def test_next_generation_composition():
    """Test children plus randoms, and elites injected every period."""
    config = GaConfig(
        population_size=20,
        children_per_gen=15,
        randoms_per_gen=5,
        elite_count=3,
        elite_reinjection_period=2,
    )
    state = GaState(0, _genomes(20), [float(i) for i in range(20)])
    update_archive(state, 10)
    assert [f for f, _ in state.archive] == [float(i) for i in range(19, 9, -1)]

    gen1 = next_generation(state, config, np.random.default_rng([0, 1]))
    assert gen1.generation == 1
    assert len(gen1.population) == 20
    assert gen1.fitnesses is None

    gen1.fitnesses = [0.5] * 20
    gen2 = next_generation(gen1, config, np.random.default_rng([0, 2]))
    elites = [g for _, g in state.archive[:3]]
    assert gen2.population[15:18] == elites


def test_archive_best_never_decreases():
    """Test that the archive keeps its best across worse generations."""
    pop = _genomes(10)
    state = GaState(0, pop, [float(i) for i in range(10)])
    update_archive(state, 10)
    best = state.best
    state.population, state.fitnesses = _genomes(10, seed=1), [0.1] * 10
    update_archive(state, 10)
    assert state.best == best == 9.0
    assert len({g for _, g in state.archive}) == len(state.archive) == 10


def test_checkpoint_round_trip(tmp_path: Path):
    """Test that a saved state loads back equal."""
    state = GaState(3, _genomes(4), [0.1, 0.2, 0.3, 0.4])
    update_archive(state, 10)
    save_checkpoint(state, tmp_path)
    loaded = load_checkpoint(tmp_path)
    assert loaded.generation == 3
    assert loaded.population == state.population
    assert loaded.archive == state.archive


def _tiny_ga(suite: Path, **overrides) -> GaConfig:
    fields = {
        "population_size": 4,
        "children_per_gen": 2,
        "randoms_per_gen": 2,
        "elite_count": 1,
        "elite_reinjection_period": 2,
        "generations": 3,
        "suite": [str(suite)],
        "gpu": GpuConfig(num_sms=2),
        "seed": 7,
    }
    fields.update(overrides)
    return GaConfig(**fields)


def test_run_and_resume(tmp_path: Path):
    """Test that a run writes its files and a resumed run reaches the same archive."""
    suite = tiny_template_file(tmp_path)
    config = _tiny_ga(suite)
    full = run_ga(config, tmp_path / "full")
    assert [h[0] for h in full.history] == [0, 1, 2]
    assert sorted(p.name for p in (tmp_path / "full").iterdir()) == [
        "archive.yaml",
        "checkpoint.yaml",
        "generation_000.csv",
        "generation_001.csv",
        "generation_002.csv",
    ]

    part = tmp_path / "part"
    run_ga(_tiny_ga(suite, generations=2), part)
    resumed = run_ga(config, part, resume=True)
    assert resumed.state.archive == full.state.archive
