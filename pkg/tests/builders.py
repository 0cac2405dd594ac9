"""Hand-built kernels, small GPUs and scripted policies shared by the tests."""

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

from collections.abc import Callable
from pathlib import Path

import yaml

from warpsched.config import GpuConfig
from warpsched.schedulers import SchedulerPolicy
from warpsched.sim import SchedulerView
from warpsched.workload import (
    LATENCY_CLASS,
    InstrKind,
    Instruction,
    KernelSpec,
    KernelTemplate,
    LocalityTag,
    TbResources,
    ThreadBlockSpec,
    generate,
)


def ins(
    kind: InstrKind,
    dest: int | None = None,
    srcs: tuple[int, ...] = (),
    loc: str | None = None,
    divergent: bool = False,
) -> Instruction:
    return Instruction(
        kind,
        LATENCY_CLASS[kind],
        dest,
        srcs,
        LocalityTag.parse(loc) if loc else None,
        divergent,
    )


def sp(dest: int | None = None, srcs: tuple[int, ...] = (), divergent: bool = False) -> Instruction:
    return ins(InstrKind.SP, dest, srcs, divergent=divergent)


def gmem(dest: int | None = None, loc: str = "stream:128") -> Instruction:
    return ins(InstrKind.GLOBAL_MEM, dest, loc=loc)


def barrier() -> Instruction:
    return ins(InstrKind.BARRIER)


def kernel(
    tbs: list[list[list[Instruction]]],
    name: str = "k",
    registers: int = 0,
    shared_mem: int = 0,
) -> KernelSpec:
    """Kernel from ``tbs[tb][warp] -> program``."""
    return KernelSpec(
        name,
        tuple(
            ThreadBlockSpec(i, tuple(tuple(program) for program in warps))
            for i, warps in enumerate(tbs)
        ),
        TbResources(registers=registers, shared_mem=shared_mem),
    )


def uniform_kernel(
    num_tbs: int,
    warps_per_tb: int,
    program: list[Instruction],
    **kwargs,
) -> KernelSpec:
    return kernel([[program] * warps_per_tb for _ in range(num_tbs)], **kwargs)


def tiny_gpu(**overrides) -> GpuConfig:
    """One SM with room for 8 warps (4 per scheduler slot)."""
    fields = {"num_sms": 1, "max_warps_per_sm": 8, "max_tbs_per_sm": 4, "max_cycles": 100_000}
    fields.update(overrides)
    return GpuConfig(**fields)


def small_kernel(name: str = "mix", seed: int = 0, **overrides) -> KernelSpec:
    """A generated kernel small enough for exhaustive per-cycle checks."""
    fields = {
        "name": name,
        "num_tbs": 6,
        "warps_per_tb": 4,
        "instr_count": 24,
        "mix": {"SP": 0.5, "SFU": 0.15, "GLOBAL_MEM": 0.25, "STC_MEM": 0.1},
        "dependency_density": 0.5,
        "barrier_every": 8,
        "divergence_prob": 0.1,
        "seed": seed,
    }
    fields.update(overrides)
    return generate(KernelTemplate(**fields))


class ScriptedPolicy(SchedulerPolicy):
    """Policy delegating every pick to a callable."""

    key = "scripted"

    def __init__(self, choose: Callable[[SchedulerView], int | None]) -> None:
        self.choose = choose

    def pick(self, view: SchedulerView) -> int | None:
        return self.choose(view)


def tiny_template_file(directory: Path, name: str = "tiny", seed: int = 3, num_tbs: int = 4) -> Path:
    """Write a small kernel template YAML and return its path.

    The default 4 TBs all fit on two SMs of ``tiny_gpu`` at launch.
    """
    path = directory / f"{name}.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "name": name,
                "num_tbs": num_tbs,
                "warps_per_tb": 4,
                "instr_count": 24,
                "mix": {"SP": 0.6, "SFU": 0.1, "GLOBAL_MEM": 0.3},
                "barrier_every": 8,
                "seed": seed,
            }
        )
    )
    return path
