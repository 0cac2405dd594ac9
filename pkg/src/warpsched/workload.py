"""Synthetic kernel generation and the kernel file format.

This module turns a small parameterized ``KernelTemplate`` into a fully
materialized ``KernelSpec`` (thread blocks, warps, per-warp instruction
sequences) and persists specs in a versioned, line-oriented text format.

The module supports:
- Deterministic generation from a template and its seed
- Barrier positions aligned across every warp of a thread block
- Loading the shipped template suite (``warpsched/templates/*.yaml``)
- Named generated suites (``streaming``, ``desk``)
- Saving/loading kernel files with line-numbered parse errors

Kernel file grammar (one record per line, ``#`` starts a comment)::

    WARPSCHED-KERNEL 1
    NAME <token>
    RESOURCES registers=<int> shared_mem=<int>
    TBS <count>
    TB <id> WARPS <count>
    WARP <index> INSTRS <count>
    INSTR <KIND> <latency_class> dest=<int|-> src=<int,...|-> loc=<tag|-> div=<0|1>
    END
"""

from __future__ import annotations

__authors__ = ["Dominik Dahlem"]
__status__ = "Development"

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import StrEnum
from importlib import resources
from pathlib import Path

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from warpsched.errors import ConfigError, KernelFormatError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = "WARPSCHED-KERNEL"


class InstrKind(StrEnum):
    SP = "SP"
    SFU = "SFU"
    GLOBAL_MEM = "GLOBAL_MEM"
    STC_MEM = "STC_MEM"
    BARRIER = "BARRIER"


MEMORY_KINDS = frozenset({InstrKind.GLOBAL_MEM, InstrKind.STC_MEM})
MIX_KINDS = (InstrKind.SP, InstrKind.SFU, InstrKind.GLOBAL_MEM, InstrKind.STC_MEM)

# default latency class of each kind, keys into GpuConfig.latencies
LATENCY_CLASS = {
    InstrKind.SP: "sp",
    InstrKind.SFU: "sfu",
    InstrKind.GLOBAL_MEM: "gmem",
    InstrKind.STC_MEM: "stc",
    InstrKind.BARRIER: "barrier",
}


class Pattern(StrEnum):
    STREAM = "stream"
    REUSE = "reuse"
    RANDOM = "random"


@dataclass(frozen=True, slots=True)
class LocalityTag:
    """Synthetic address-stream descriptor.

    ``stream:<stride>`` walks a private region with a byte stride,
    ``reuse:<lines>`` cycles over a private window of cache lines and
    ``random:<lines>`` hashes accesses into a shared pool of lines.
    """

    pattern: Pattern
    param: int

    def __str__(self) -> str:
        return f"{self.pattern}:{self.param}"

    @classmethod
    def parse(cls, text: str) -> LocalityTag:
        pattern, sep, param = text.partition(":")
        try:
            tag = cls(Pattern(pattern), int(param)) if sep else None
        except ValueError:
            tag = None
        if tag is None or tag.param <= 0:
            raise ValueError(
                f"bad locality tag {text!r}; expected one of "
                f"{', '.join(p.value for p in Pattern)} followed by ':<positive int>'"
            )
        return tag


@dataclass(frozen=True, slots=True)
class Instruction:
    kind: InstrKind
    latency_class: str
    dest: int | None = None
    srcs: tuple[int, ...] = ()
    locality: LocalityTag | None = None
    divergent: bool = False

    def __post_init__(self) -> None:
        if self.kind is InstrKind.BARRIER and (
            self.dest is not None or self.srcs or self.locality is not None
        ):
            raise ValueError("BARRIER instructions carry no operands and no locality tag")
        if self.locality is not None and self.kind not in MEMORY_KINDS:
            raise ValueError(f"{self.kind} instructions cannot carry a locality tag")


class TbResources(BaseModel):
    """Per-TB resource demand."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    registers: int = Field(default=0, ge=0)
    shared_mem: int = Field(default=0, ge=0)


@dataclass(frozen=True, slots=True)
class ThreadBlockSpec:
    tb_id: int
    warps: tuple[tuple[Instruction, ...], ...]


def warp_shape(program: Sequence[Instruction]) -> tuple[int, tuple[int, ...]]:
    """Length and barrier positions of one warp program."""
    return len(program), tuple(i for i, ins in enumerate(program) if ins.kind is InstrKind.BARRIER)


@dataclass(frozen=True, slots=True)
class KernelSpec:
    """A fully materialized kernel."""

    name: str
    tbs: tuple[ThreadBlockSpec, ...]
    resources: TbResources

    @property
    def num_tbs(self) -> int:
        return len(self.tbs)

    @property
    def warps_per_tb(self) -> int:
        return len(self.tbs[0].warps) if self.tbs else 0

    @property
    def total_instructions(self) -> int:
        return sum(len(w) for tb in self.tbs for w in tb.warps)

    def check_homogeneity(self) -> None:
        """Raise ValueError unless every TB's warps share length and barrier positions."""
        for tb in self.tbs:
            if len({warp_shape(w) for w in tb.warps}) > 1:
                raise ValueError(f"TB {tb.tb_id}: warps differ in length or barrier positions")


class KernelTemplate(BaseModel):
    """Parameters of a synthetic kernel family."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(pattern=r"^\S+$")
    description: str = ""
    num_tbs: int = Field(gt=0)
    warps_per_tb: int = Field(gt=0)
    instr_count: int = Field(gt=0)
    mix: dict[InstrKind, float]
    dependency_density: float = Field(default=0.5, ge=0.0, le=1.0)
    barrier_every: int | None = Field(default=None, ge=2)
    load_every: int | None = Field(default=None, ge=2)
    divergence_prob: float = Field(default=0.0, ge=0.0, le=1.0)
    locality: dict[InstrKind, str] = Field(
        default_factory=lambda: {InstrKind.GLOBAL_MEM: "stream:128", InstrKind.STC_MEM: "reuse:4"}
    )
    resources: TbResources = TbResources()
    registers: int = Field(default=32, ge=2)
    seed: int = 0

    @field_validator("mix")
    @classmethod
    def _check_mix(cls, mix: dict[InstrKind, float]) -> dict[InstrKind, float]:
        if InstrKind.BARRIER in mix:
            raise ValueError("BARRIER is placed by barrier_every, not drawn from the mix")
        if any(not 0.0 <= p <= 1.0 for p in mix.values()):
            raise ValueError("mix fractions must lie in [0, 1]")
        if abs(sum(mix.values()) - 1.0) > 1e-9:
            raise ValueError(f"mix fractions must sum to 1, got {sum(mix.values())}")
        return mix

    @field_validator("locality")
    @classmethod
    def _check_locality(cls, locality: dict[InstrKind, str]) -> dict[InstrKind, str]:
        for kind, tag in locality.items():
            if kind not in MEMORY_KINDS:
                raise ValueError(f"locality given for non-memory kind {kind}")
            LocalityTag.parse(tag)
        return locality

    @model_validator(mode="after")
    def _check_feasible(self) -> KernelTemplate:
        if self.barrier_every is not None and self.barrier_every > self.instr_count:
            raise ValueError(
                f"barrier_every={self.barrier_every} exceeds instr_count={self.instr_count}; "
                "no barrier would be placed"
            )
        if self.load_every is not None:
            if self.load_every > self.instr_count:
                raise ValueError(
                    f"load_every={self.load_every} exceeds instr_count={self.instr_count}; "
                    "no load would be placed"
                )
            if InstrKind.GLOBAL_MEM not in self.locality:
                raise ValueError("load_every places GLOBAL_MEM loads but no locality profile is given")
        for kind in MEMORY_KINDS:
            if self.mix.get(kind, 0.0) > 0 and kind not in self.locality:
                raise ValueError(f"mix draws {kind} but no locality profile is given")
        return self


def generate(template: KernelTemplate) -> KernelSpec:
    """Materialize a kernel from a template.

    The result is a pure function of the template (its seed included): kinds
    are drawn from ``mix``, each instruction reads the previous destination
    register with probability ``dependency_density``, and every
    ``barrier_every``-th slot of every warp is a barrier. With ``load_every``
    set, every ``load_every``-th non-barrier slot is a GLOBAL_MEM load and the
    instruction after it reads the loaded register, so each warp alternates a
    fixed compute run with a dependent load.

    Args:
        template: Validated kernel template

    Returns:
        KernelSpec: The generated kernel

    Example:
        >>> t = KernelTemplate(name="alu", num_tbs=2, warps_per_tb=2,
        ...                    instr_count=8, mix={"SP": 1.0})
        >>> {i.kind for tb in generate(t).tbs for w in tb.warps for i in w}
        {<InstrKind.SP: 'SP'>}

    """
    rng = np.random.default_rng(template.seed)
    probs = np.array([template.mix.get(k, 0.0) for k in MIX_KINDS])
    probs = probs / probs.sum()
    tags = {kind: LocalityTag.parse(tag) for kind, tag in template.locality.items()}
    barriers = (
        frozenset(range(template.barrier_every - 1, template.instr_count, template.barrier_every))
        if template.barrier_every
        else frozenset()
    )
    loads = (
        frozenset(range(template.load_every - 1, template.instr_count, template.load_every)) - barriers
        if template.load_every
        else frozenset()
    )

    tbs = []
    for tb_id in range(template.num_tbs):
        warps = []
        for _ in range(template.warps_per_tb):
            draws = rng.choice(len(MIX_KINDS), size=template.instr_count, p=probs)
            deps = rng.random(template.instr_count)
            divs = rng.random(template.instr_count)
            prev_dest = None
            program = []
            for i in range(template.instr_count):
                if i in barriers:
                    program.append(Instruction(InstrKind.BARRIER, LATENCY_CLASS[InstrKind.BARRIER]))
                    continue
                kind = InstrKind.GLOBAL_MEM if i in loads else MIX_KINDS[draws[i]]
                dest = i % template.registers
                if i - 1 in loads:
                    srcs = (prev_dest,)
                else:
                    srcs = (prev_dest,) if prev_dest is not None and deps[i] < template.dependency_density else ()
                program.append(
                    Instruction(
                        kind,
                        LATENCY_CLASS[kind],
                        dest,
                        srcs,
                        tags.get(kind) if kind in MEMORY_KINDS else None,
                        bool(divs[i] < template.divergence_prob),
                    )
                )
                prev_dest = dest
            warps.append(tuple(program))
        tbs.append(ThreadBlockSpec(tb_id, tuple(warps)))

    spec = KernelSpec(template.name, tuple(tbs), template.resources)
    logger.debug("generated kernel %s: %d TBs, %d instructions", spec.name, spec.num_tbs, spec.total_instructions)
    return spec


def with_seed(template: KernelTemplate, seed: int) -> KernelTemplate:
    """Variant of ``template`` whose seed is derived from (template seed, seed)."""
    derived = int(np.random.SeedSequence([template.seed, seed]).generate_state(1)[0])
    return template.model_copy(update={"seed": derived})


# -- kernel files -----------------------------------------------------------


def _fmt_instr(ins: Instruction) -> str:
    dest = "-" if ins.dest is None else str(ins.dest)
    srcs = ",".join(map(str, ins.srcs)) or "-"
    loc = "-" if ins.locality is None else str(ins.locality)
    return f"INSTR {ins.kind} {ins.latency_class} dest={dest} src={srcs} loc={loc} div={int(ins.divergent)}"


def dumps(spec: KernelSpec) -> str:
    """Serialize a kernel to the versioned text format."""
    lines = [
        f"{MAGIC} {FORMAT_VERSION}",
        f"NAME {spec.name}",
        f"RESOURCES registers={spec.resources.registers} shared_mem={spec.resources.shared_mem}",
        f"TBS {spec.num_tbs}",
    ]
    for tb in spec.tbs:
        lines.append(f"TB {tb.tb_id} WARPS {len(tb.warps)}")
        for w_idx, program in enumerate(tb.warps):
            lines.append(f"WARP {w_idx} INSTRS {len(program)}")
            lines.extend(_fmt_instr(ins) for ins in program)
    lines.append("END")
    return "\n".join(lines) + "\n"


def save(spec: KernelSpec, path: str | Path) -> Path:
    """Write a kernel file, creating parent directories."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps(spec), encoding="utf-8")
    return p


class _Lines:
    """Cursor over the significant lines of a kernel file."""

    def __init__(self, text: str) -> None:
        self._items = [
            (no, line.split())
            for no, line in enumerate(text.splitlines(), start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
        self._pos = 0
        self._last = len(text.splitlines())

    def next(self, keyword: str, what: str) -> tuple[int, list[str]]:
        if self._pos >= len(self._items):
            raise KernelFormatError(self._last + 1, f"unexpected end of file, expected {what}")
        no, tokens = self._items[self._pos]
        self._pos += 1
        if tokens[0] != keyword:
            raise KernelFormatError(no, f"expected {keyword} ({what}), got {tokens[0]!r}")
        return no, tokens

    def remaining(self) -> Iterator[tuple[int, list[str]]]:
        yield from self._items[self._pos :]


def _int(no: int, text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError as e:
        raise KernelFormatError(no, f"{what} must be an integer, got {text!r}") from e


def _fields(no: int, tokens: list[str], keys: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or key not in keys:
            raise KernelFormatError(no, f"unexpected field {tok!r}; expected {', '.join(keys)}")
        out[key] = value
    missing = [k for k in keys if k not in out]
    if missing:
        raise KernelFormatError(no, f"missing field(s) {', '.join(missing)}")
    return out


def _parse_instr(no: int, tokens: list[str]) -> Instruction:
    if len(tokens) != 7:
        raise KernelFormatError(no, "INSTR needs: KIND latency_class dest= src= loc= div=")
    try:
        kind = InstrKind(tokens[1])
    except ValueError as e:
        raise KernelFormatError(
            no, f"unknown instruction kind {tokens[1]!r}; valid kinds: {', '.join(InstrKind)}"
        ) from e
    f = _fields(no, tokens[3:], ("dest", "src", "loc", "div"))
    dest = None if f["dest"] == "-" else _int(no, f["dest"], "dest")
    srcs = () if f["src"] == "-" else tuple(_int(no, s, "src") for s in f["src"].split(","))
    try:
        loc = None if f["loc"] == "-" else LocalityTag.parse(f["loc"])
        if f["div"] not in ("0", "1"):
            raise ValueError("div must be 0 or 1")
        return Instruction(kind, tokens[2], dest, srcs, loc, f["div"] == "1")
    except ValueError as e:
        raise KernelFormatError(no, str(e)) from e


def loads(text: str) -> KernelSpec:
    """Parse a kernel file's text.

    Raises:
        KernelFormatError: Naming the offending line on any syntax, version
            or structure error (including truncation)

    """
    cur = _Lines(text)
    no, tokens = cur.next(MAGIC, "format header")
    version = _int(no, tokens[1], "version") if len(tokens) == 2 else -1
    if version != FORMAT_VERSION:
        raise KernelFormatError(no, f"unsupported format version {tokens[1:]}; expected {FORMAT_VERSION}")
    no, tokens = cur.next("NAME", "kernel name")
    if len(tokens) != 2:
        raise KernelFormatError(no, "NAME takes exactly one token")
    name = tokens[1]
    no, tokens = cur.next("RESOURCES", "per-TB resources")
    res = _fields(no, tokens[1:], ("registers", "shared_mem"))
    resources = TbResources(
        registers=_int(no, res["registers"], "registers"),
        shared_mem=_int(no, res["shared_mem"], "shared_mem"),
    )
    no, tokens = cur.next("TBS", "thread block count")
    num_tbs = _int(no, tokens[1], "TBS") if len(tokens) == 2 else 0

    tbs = []
    for expected_tb in range(num_tbs):
        no, tokens = cur.next("TB", f"TB {expected_tb}")
        if len(tokens) != 4 or tokens[2] != "WARPS" or _int(no, tokens[1], "TB id") != expected_tb:
            raise KernelFormatError(no, f"expected 'TB {expected_tb} WARPS <n>'")
        warps = []
        for w_idx in range(_int(no, tokens[3], "WARPS")):
            no, tokens = cur.next("WARP", f"WARP {w_idx} of TB {expected_tb}")
            header_no = no
            if len(tokens) != 4 or tokens[2] != "INSTRS" or _int(no, tokens[1], "WARP index") != w_idx:
                raise KernelFormatError(no, f"expected 'WARP {w_idx} INSTRS <n>'")
            count = _int(no, tokens[3], "INSTRS")
            program = []
            for i in range(count):
                no, tokens = cur.next("INSTR", f"instruction {i} of WARP {w_idx}, TB {expected_tb}")
                program.append(_parse_instr(no, tokens))
            if warps and warp_shape(program) != warp_shape(warps[0]):
                raise KernelFormatError(
                    header_no,
                    f"TB {expected_tb}: WARP {w_idx} differs from WARP 0 in length or barrier positions",
                )
            warps.append(tuple(program))
        tbs.append(ThreadBlockSpec(expected_tb, tuple(warps)))
    cur.next("END", "END marker")
    for no, tokens in cur.remaining():
        raise KernelFormatError(no, f"trailing content after END: {tokens[0]!r}")

    return KernelSpec(name, tuple(tbs), resources)


def load(path: str | Path) -> KernelSpec:
    """Read a kernel file written by :func:`save`."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ConfigError(f"kernel file not found: {p}") from e
    return loads(text)


# -- templates --------------------------------------------------------------


def load_template(path: str | Path) -> KernelTemplate:
    """Load a YAML kernel template."""
    from warpsched.config import load_config

    return load_config(path, KernelTemplate)


def template_suite() -> dict[str, KernelTemplate]:
    """The shipped templates, keyed by name."""
    from warpsched.config import validate_config

    suite = {}
    tdir = resources.files("warpsched").joinpath("templates")
    for entry in sorted(tdir.iterdir(), key=lambda e: e.name):
        if not entry.name.endswith(".yaml"):
            continue
        data = yaml.safe_load(entry.read_text(encoding="utf-8"))
        template = validate_config(data, KernelTemplate, source=entry.name)
        suite[template.name] = template
    return suite


def get_template(name: str) -> KernelTemplate:
    suite = template_suite()
    try:
        return suite[name]
    except KeyError as e:
        raise ConfigError(f"unknown template {name!r}; available: {', '.join(suite)}") from e


DESK_BASES = (
    "compute_bound",
    "mem_stream",
    "mem_reuse_large",
    "mem_random",
    "barrier_heavy",
    "divergent",
    "few_tb_tail",
    "mixed_balanced",
)


def named_suite(name: str) -> list[KernelTemplate]:
    """Generated suites of eight kernels.

    ``streaming`` holds memory-streaming kernels at distinct seeds; ``desk``
    holds short versions of eight diverse templates for GA fitness runs.
    """
    suite = template_suite()
    if name == "streaming":
        out = []
        for i in range(8):
            base = suite["mem_stream" if i % 2 == 0 else "mem_stream_dense"]
            out.append(base.model_copy(update={"name": f"{base.name}-{i}", "seed": base.seed + 101 * i}))
        return out
    if name == "desk":
        return [
            suite[b].model_copy(
                update={
                    "name": f"{b}-desk",
                    "num_tbs": min(suite[b].num_tbs, 8),
                    "instr_count": 48,
                    "barrier_every": 8 if suite[b].barrier_every else None,
                }
            )
            for b in DESK_BASES
        ]
    raise ConfigError(f"unknown suite {name!r}; available: streaming, desk")
