"""warpsched command-line interface.

This module provides the Click-based CLI, offering commands for:
- Listing the shipped kernel templates and writing kernel files (``gen``)
- Running kernels x policies x seeds experiments (``run``)
- Recomputing speedup and rank tables from a ``stats.csv`` (``compare``)
- Searching the learned scheduler's design space (``ga run``)
- Summarising learned-scheduler decision logs (``inspect-log``)

Exit codes: 0 success, 2 configuration error, 3 simulation fault. The
``WARPSCHED_OUTPUT_DIR`` environment variable overrides the output directory
of ``run`` and ``ga run``.
"""

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import click

from warpsched import workload
from warpsched.errors import (
    ConfigError,
    KernelFormatError,
    SimulationFault,
    UnschedulableKernelError,
)

OUTPUT_ENV = "WARPSCHED_OUTPUT_DIR"


class ConfigErrorExit(click.ClickException):
    exit_code = 2


class SimulationFaultExit(click.ClickException):
    exit_code = 3


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Translate library errors into CLI exit codes."""
    try:
        yield
    except (ConfigError, KernelFormatError, UnschedulableKernelError) as e:
        raise ConfigErrorExit(str(e)) from e
    except SimulationFault as e:
        detail = f" (state: {e.state})" if e.state else ""
        raise SimulationFaultExit(f"simulation fault: {e}{detail}") from e


@click.group()
@click.option("-v", "--verbose", is_flag=True, default=False, help="Log at DEBUG level")
def main(verbose):
    """warpsched - GPU warp scheduling simulator and learned schedulers.

    Simulates kernels on a multi-SM GPU model under heuristic (LRR, GTO,
    two-level, random) and learned (SARSA) warp schedulers, compares them,
    and searches the learned scheduler's design space with a GA.

    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command("gen")
@click.option("--list", "list_only", is_flag=True, default=False, help="List shipped templates and exit")
@click.option("--template", "templates", multiple=True, help="Shipped template name (repeatable)")
@click.option("--suite", default=None, help="Generated suite: streaming, desk or templates")
@click.option("--from-yaml", "yaml_files", multiple=True, type=click.Path(dir_okay=False), help="Template YAML file (repeatable)")
@click.option("--seed", default=None, type=int, help="Derive a per-seed variant of each template")
@click.option("--out", default="kernels", help="Directory for the .kernel files")
def gen_cmd(list_only, templates, suite, yaml_files, seed, out):
    """Generate kernel files from templates.

    Without ``--seed`` the templates' own seeds are used; with it each template
    is re-seeded the way experiment runs do.

    """
    with _exit_codes():
        shipped = workload.template_suite()
        if list_only:
            for name, t in shipped.items():
                click.echo(
                    f"{name:18s} {t.num_tbs:4d} TBs x {t.warps_per_tb:2d} warps x "
                    f"{t.instr_count:4d} instrs  {t.description}"
                )
            return
        chosen = [workload.get_template(n) for n in templates]
        if suite == "templates":
            chosen += list(shipped.values())
        elif suite:
            chosen += workload.named_suite(suite)
        chosen += [workload.load_template(p) for p in yaml_files]
        if not chosen:
            raise ConfigError("nothing to generate: give --template, --suite or --from-yaml")
        out_dir = Path(out)
        for template in chosen:
            if seed is not None:
                template = workload.with_seed(template, seed)
            spec = workload.generate(template)
            path = workload.save(spec, out_dir / f"{spec.name}.kernel")
            click.echo(f"✅ {path} ({spec.num_tbs} TBs, {spec.total_instructions} instructions)")


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Experiment YAML")
@click.option("--out", default=None, envvar=OUTPUT_ENV, help="Output directory (overrides the config)")
@click.option("--workers", default=None, type=int, help="Parallel cells (overrides the config)")
def run_cmd(config_path, out, workers):
    """Run an experiment and write its report files."""
    from warpsched import experiment, report
    from warpsched.config import ExperimentConfig, load_config

    with _exit_codes():
        config = load_config(config_path, ExperimentConfig)
        if workers is not None:
            config = config.model_copy(update={"workers": max(1, workers)})
        out_dir = Path(out or config.output_dir)
        stats = experiment.run(config, out_dir)
        paths = report.emit(stats, out_dir, config.baseline)
        for s in stats:
            click.echo(f"{s.kernel:24s} {s.policy:8s} seed={s.seed:<4d} cycles={s.cycles:<9d} IPC={s.ipc:.3f}")
        if config.baseline is not None and stats:
            _echo_geomeans(report.compare(stats, config.baseline))
        click.echo(f"📝 Wrote {', '.join(str(p) for p in paths)}")


def _echo_geomeans(table):
    click.echo(f"Geomean speedup over {table.baseline}:")
    for policy, value in table.geomeans.items():
        click.echo(f" - {policy}: {value:.4f}")


@main.command("compare")
@click.argument("stats_csv", type=click.Path(dir_okay=False))
@click.option("--baseline", required=True, help="Baseline policy key")
@click.option("--focus", default=None, help="Policy of the rank table")
@click.option("--out", default=None, help="Directory for the tables (default: next to STATS_CSV)")
def compare_cmd(stats_csv, baseline, focus, out):
    """Recompute speedup and rank tables from a stats.csv."""
    from warpsched import report

    with _exit_codes():
        stats = report.read_stats(stats_csv)
        table = report.compare(stats, baseline)
        out_dir = Path(out) if out else Path(stats_csv).parent
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = report.write_speedups(table, out_dir)
        paths += report.write_ranks(table, out_dir, focus or report.default_focus(table.policies, baseline))
        _echo_geomeans(table)
        click.echo(f"📝 Wrote {', '.join(str(p) for p in paths)}")


@main.group("ga")
def ga_group():
    """Genetic-algorithm search over the learned scheduler."""


@ga_group.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="GA YAML")
@click.option("--out", default="ga_run", envvar=OUTPUT_ENV, help="Run directory")
@click.option("--resume/--no-resume", default=False, help="Continue from the run directory's checkpoint")
def ga_run_cmd(config_path, out, resume):
    """Run (or resume) a GA search."""
    from warpsched import ga
    from warpsched.config import GaConfig, load_config

    with _exit_codes():
        config = load_config(config_path, GaConfig)
        result = ga.run_ga(config, out, resume=resume)
        for generation, best, mean in result.history:
            click.echo(f"generation {generation:3d}: best {best:.4f} mean {mean:.4f}")
        if result.state.archive:
            fitness, genome = result.state.archive[0]
            click.echo(f"🏆 best {fitness:.4f}: {ga.genome_summary(genome, config.palettes)}")
        click.echo(f"📝 Run directory: {out}")


@main.command("inspect-log")
@click.argument("log_path", type=click.Path(dir_okay=False))
def inspect_log_cmd(log_path):
    """Summarise a learned-scheduler decision log."""
    from warpsched.rlws import summarize_decision_log

    with _exit_codes():
        s = summarize_decision_log(log_path)
        click.echo(f"records: {s.records}")
        click.echo(f"decisions: {s.decisions}")
        click.echo(f"exploration fraction: {s.exploration_fraction:.4f}")
        click.echo("actions:")
        for action, n in sorted(s.actions.items()):
            click.echo(f" - {action}: {n}")
        click.echo("phases: " + ", ".join(f"{p}={n}" for p, n in sorted(s.phases.items())))
        click.echo(f"NO_INSTR rule violations: {s.no_instr_violations}")


if __name__ == "__main__":
    main()
