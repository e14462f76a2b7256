"""Closed-form pipelining model: busy time, idle time, stretch and speedup."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from treebft.collections import Scheme
from treebft.tree import max_faults

BASE_DEPTH = 4


@dataclass(frozen=True)
class ModelInputs:
    """Times in seconds, sizes in bits, bandwidth in bits per second.

    ``scheme=None`` means no signature overhead on top of the block.
    """

    N: int
    h: int
    m: int
    B: float
    b: float
    rtt: float
    phi: float = 0.0
    scheme: Scheme | None = None
    share_bytes: int = 64
    aggregate_bytes: int = 96

    def __post_init__(self):
        if self.h < 2:
            raise ValueError("h must be >= 2")
        for name in ("N", "m", "B", "b", "rtt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.phi < 0:
            raise ValueError("phi must be >= 0")
        if self.scheme is not None:
            object.__setattr__(self, "scheme", Scheme(self.scheme))


def signature_overhead_bits(inp: ModelInputs) -> float:
    if inp.scheme is None:
        return 0.0
    if inp.scheme is Scheme.NAIVE:
        return (2 * max_faults(inp.N) + 1) * inp.share_bytes * 8
    return inp.aggregate_bytes * 8


def msg_bits(inp: ModelInputs) -> float:
    return inp.B + signature_overhead_bits(inp)


def transmission_time(inp: ModelInputs) -> float:
    """The mB/b term."""
    return inp.m * msg_bits(inp) / inp.b


def busy_time(inp: ModelInputs) -> float:
    return transmission_time(inp) + inp.phi


def idle_time(inp: ModelInputs) -> float:
    # one RTT per hop below the root; a star (h=2) waits one RTT
    return (inp.h - 1) * inp.rtt


@dataclass(frozen=True)
class PipelineDepth:
    ratio: float
    stretch: int
    instances: int


def pipeline_depth(inp: ModelInputs) -> PipelineDepth:
    """IT/BT plus the integer stretch used for scheduling.

    The root can open one instance per busy period while it waits out the
    idle period, so it keeps ``1 + IT/BT`` instances busy in one cycle.
    """
    bt = busy_time(inp)
    if bt <= 0:
        raise ValueError("busy time must be > 0")
    ratio = idle_time(inp) / bt
    stretch = max(1, math.floor(1 + ratio + 1e-9))
    return PipelineDepth(ratio=ratio, stretch=stretch, instances=BASE_DEPTH * stretch)


def max_speedup(n: int, m: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    return (n - 1) / m


def estimated_speedup(tree_inp: ModelInputs, star_inp: ModelInputs) -> float:
    """Ratio of root busy times, star over tree.

    Each busy period of the root yields one block once the pipeline is deep
    enough to hide the idle time, which the stretch rule above provides.
    """
    return busy_time(star_inp) / busy_time(tree_inp)


def throughput_blocks(inp: ModelInputs, stretch: int | None = None) -> float:
    """Steady-state blocks per second with ``stretch`` instances per cycle."""
    bt, it = busy_time(inp), idle_time(inp)
    if stretch is None:
        stretch = pipeline_depth(inp).stretch
    return min(1.0 / bt, stretch / (bt + it))


def star_inputs(n: int, B: float, b: float, rtt: float, phi: float = 0.0,
                scheme: Scheme | None = Scheme.NAIVE) -> ModelInputs:
    return ModelInputs(N=n, h=2, m=n - 1, B=B, b=b, rtt=rtt, phi=phi, scheme=scheme)


def with_phi(inp: ModelInputs, phi: float) -> ModelInputs:
    return replace(inp, phi=phi)


CSV_HEADER = "N,h,m,B_bits,b_bps,rtt_s,phi_s,mB_b_s,busy_s,idle_s,ratio,stretch,instances,max_speedup"


def csv_row(inp: ModelInputs) -> str:
    d = pipeline_depth(inp)
    vals = [inp.N, inp.h, inp.m]
    nums = [inp.B, inp.b, inp.rtt, inp.phi, transmission_time(inp), busy_time(inp),
            idle_time(inp), d.ratio]
    tail = [d.stretch, d.instances]
    return ",".join([str(v) for v in vals] + [f"{x:.6f}" for x in nums]
                    + [str(t) for t in tail] + [f"{max_speedup(inp.N, inp.m):.6f}"])
