"""Deterministic discrete-event network.

Time is an integer number of microseconds. Every process owns one serial
clock shared by its CPU and its egress link: a send or a crypto operation
starts when the previous one has finished. Receive side is unconstrained.
"""
from __future__ import annotations

import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from treebft.errors import CausalityViolation, Drained, FaultBudgetExceeded


class Kind(str, Enum):
    PROPOSAL = "Proposal"
    VOTE = "Vote"
    NEWVIEW = "NewView"
    OTHER = "Other"


class FaultKind(str, Enum):
    CRASH_SILENT = "crash"
    OMIT_ALL = "omit_all"
    OMIT_AGGREGATES = "omit_aggregates"


class _Bottom:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "BOTTOM"

    def __bool__(self):
        return False


BOTTOM = _Bottom()


@dataclass
class Message:
    src: int
    dst: int
    size_bits: int
    payload: Any
    kind: Kind = Kind.OTHER
    seq: int = 0


@dataclass(frozen=True)
class NetParams:
    rtt_us: int
    bandwidth_bps: float
    delta_us: int | None = None
    gst_us: int = 0
    unstable_max_rtts: float = 5.0

    def __post_init__(self):
        if self.rtt_us <= 0:
            raise ValueError("rtt_us must be > 0")
        if self.bandwidth_bps <= 0:
            raise ValueError("bandwidth_bps must be > 0")
        if self.delta_us is not None and self.delta_us < self.rtt_us:
            raise ValueError("delta_us must be >= rtt_us")
        if self.gst_us < 0:
            raise ValueError("gst_us must be >= 0")

    @property
    def one_way_us(self) -> int:
        return self.rtt_us // 2

    def tx_us(self, bits: int) -> int:
        return math.ceil(bits * 1_000_000 / self.bandwidth_bps)


@dataclass(frozen=True, order=True)
class FaultEntry:
    pid: int
    kind: FaultKind
    at_us: int = 0


@dataclass
class FaultSchedule:
    entries: list = field(default_factory=list)

    def faulty(self) -> list[int]:
        return sorted({e.pid for e in self.entries})


class EventQueue:
    """Min-heap on (time, seq); seq is a global insertion counter."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()

    def push(self, time_us: int, item) -> int:
        seq = next(self._seq)
        heapq.heappush(self._heap, (time_us, seq, item))
        return seq

    def pop(self):
        if not self._heap:
            raise Drained("event queue is empty")
        return heapq.heappop(self._heap)

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def __len__(self):
        return len(self._heap)


class Simulator:
    def __init__(self):
        self.now = 0
        self.queue = EventQueue()
        self.steps = 0

    def schedule(self, at_us: int, fn: Callable, *args) -> int:
        at_us = int(at_us)
        if at_us < self.now:
            raise CausalityViolation(f"event at {at_us} scheduled at time {self.now}")
        return self.queue.push(at_us, (fn, args))

    def after(self, delay_us: int, fn: Callable, *args) -> int:
        return self.schedule(self.now + int(delay_us), fn, *args)

    def step(self):
        t, seq, (fn, args) = self.queue.pop()
        self.now = t
        self.steps += 1
        fn(*args)
        return t, seq

    def run(self, until_us: int | None = None) -> None:
        while self.queue:
            nxt = self.queue.peek_time()
            if until_us is not None and nxt > until_us:
                self.now = max(self.now, until_us)
                return
            self.step()
        if until_us is not None:
            self.now = max(self.now, until_us)


class Gather:
    """Impatient receive over several incoming edges at once.

    Resolves with ``{src: value-or-BOTTOM}`` when every source delivered or
    when the deadline passes, whichever comes first. Never resolves twice.
    """

    def __init__(self, sim: Simulator, sources, delta_us: int, callback: Callable,
                 trace: Callable | None = None):
        self.sources = list(sources)
        self.got: dict[int, Any] = {}
        self.done = False
        self._cb = callback
        self._trace = trace
        self.deadline = sim.now + int(delta_us)
        if self.sources:
            sim.schedule(self.deadline, self._expire)
        else:
            sim.schedule(sim.now, self._finish)

    def offer(self, src: int, value) -> bool:
        if self.done or src in self.got or src not in self.sources:
            return False
        self.got[src] = value
        if len(self.got) == len(self.sources):
            self._finish()
        return True

    def cancel(self) -> None:
        self.done = True

    def _expire(self):
        if self.done:
            return
        if self._trace:
            for s in self.sources:
                if s not in self.got:
                    self._trace(s)
        self._finish()

    def _finish(self):
        if self.done:
            return
        self.done = True
        self._cb({s: self.got.get(s, BOTTOM) for s in self.sources})


class Network:
    """Point-to-point channels with per-sender FIFO egress and fault injection."""

    def __init__(self, sim: Simulator, n: int, params: NetParams, seed: int = 0,
                 faults: FaultSchedule | None = None, f: int | None = None,
                 trace: bool = False):
        self.sim = sim
        self.n = n
        self.params = params
        self.rng = random.Random(seed)
        self.busy_until = [0] * n
        self.bits_sent = [0] * n
        self.cpu_us = [0] * n
        self.handlers: dict[int, Callable[[Message], None]] = {}
        self._waiters: dict[tuple[int, int], list] = {}
        self._inbox: dict[tuple[int, int], list] = {}
        self._seq = itertools.count()
        self._faults: dict[int, FaultEntry] = {}
        self._tx_log: list[list] | None = [[] for _ in range(n)] if trace else None
        self.trace_lines: list[str] | None = [] if trace else None
        self.delivered = 0
        self.dropped = 0
        if faults is not None:
            budget = f if f is not None else (n - 1) // 3
            if len(faults.faulty()) > budget:
                raise FaultBudgetExceeded(
                    f"{len(faults.faulty())} faulty processes exceed the budget f={budget}")
            for e in faults.entries:
                self.inject_fault(e, budget)

    # faults

    def inject_fault(self, entry: FaultEntry, budget: int | None = None) -> None:
        budget = (self.n - 1) // 3 if budget is None else budget
        if entry.pid not in self._faults and len(self._faults) >= budget:
            raise FaultBudgetExceeded(f"fault on {entry.pid} exceeds the budget f={budget}")
        cur = self._faults.get(entry.pid)
        if cur is None or entry.at_us < cur.at_us:
            self._faults[entry.pid] = entry

    def fault_of(self, pid: int) -> FaultKind | None:
        e = self._faults.get(pid)
        if e is None or self.sim.now < e.at_us:
            return None
        return e.kind

    def is_crashed(self, pid: int) -> bool:
        return self.fault_of(pid) is FaultKind.CRASH_SILENT

    def faulty_ever(self) -> list[int]:
        return sorted(self._faults)

    # clocks

    def cpu(self, pid: int, us: float) -> int:
        """Occupy ``pid``'s serial clock for ``us`` microseconds; returns finish time."""
        start = max(self.sim.now, self.busy_until[pid])
        dur = int(math.ceil(us))
        self.busy_until[pid] = start + dur
        self.cpu_us[pid] += dur
        return self.busy_until[pid]

    def idle_at(self, pid: int) -> int:
        return max(self.sim.now, self.busy_until[pid])

    # channels

    def send(self, src: int, dst: int, size_bits: int, payload=None,
             kind: Kind = Kind.OTHER) -> int | None:
        """Queue a message on ``src``'s egress; returns its delivery time or None if dropped."""
        fk = self.fault_of(src)
        if fk is FaultKind.CRASH_SILENT or fk is FaultKind.OMIT_ALL:
            return None
        if fk is FaultKind.OMIT_AGGREGATES and kind is Kind.VOTE:
            return None
        size_bits = int(size_bits)
        if size_bits < 0:
            raise ValueError("size_bits must be >= 0")
        start = max(self.sim.now, self.busy_until[src])
        end = start + self.params.tx_us(size_bits)
        self.busy_until[src] = end
        self.bits_sent[src] += size_bits
        if self._tx_log is not None:
            self._tx_log[src].append((start, end, size_bits))
        at = end + self.params.one_way_us
        if self.sim.now < self.params.gst_us:
            at += self.rng.randint(0, int(self.params.unstable_max_rtts * self.params.rtt_us))
        msg = Message(src, dst, size_bits, payload, kind, next(self._seq))
        self.sim.schedule(at, self._deliver, msg)
        return at

    def _deliver(self, msg: Message) -> None:
        if self.is_crashed(msg.dst):
            self.dropped += 1
            return
        self.delivered += 1
        if self.trace_lines is not None:
            self.trace_lines.append(
                f"{self.sim.now} {msg.kind.value} {msg.src} {msg.dst} {msg.size_bits}")
        edge = (msg.src, msg.dst)
        waiters = self._waiters.get(edge)
        while waiters:
            w = waiters.pop(0)
            if not w.done:
                w.offer(msg.src, msg.payload)
                return
        h = self.handlers.get(msg.dst)
        if h is not None:
            h(msg)
        else:
            self._inbox.setdefault(edge, []).append(msg.payload)

    def impatient_receive(self, src: int, dst: int, delta_us: int,
                          callback: Callable[[Any], None]) -> Gather:
        """Algorithm-1 style receive on one edge: value, or BOTTOM after delta."""
        box = self._inbox.get((src, dst))
        g = Gather(self.sim, [src], delta_us, lambda got: callback(got[src]),
                   trace=self._trace_bottom(dst))
        if box:
            g.offer(src, box.pop(0))
        else:
            self._waiters.setdefault((src, dst), []).append(g)
        return g

    def gather(self, dst: int, sources, delta_us: int, callback: Callable) -> Gather:
        return Gather(self.sim, sources, delta_us, callback, trace=self._trace_bottom(dst))

    def _trace_bottom(self, dst: int):
        if self.trace_lines is None:
            return None
        return lambda src: self.trace_lines.append(f"{self.sim.now} Bottom {src} {dst} 0")

    # accounting

    def check_bandwidth(self, pid: int, window_us: int) -> bool:
        """Bits leaving ``pid`` in any window never exceed capacity (needs trace=True)."""
        if self._tx_log is None:
            raise RuntimeError("bandwidth accounting needs trace=True")
        log = self._tx_log[pid]
        cap = self.params.bandwidth_bps * window_us / 1_000_000
        for i, (s0, _, _) in enumerate(log):
            total = 0.0
            for s, e, bits in log[i:]:
                if s >= s0 + window_us:
                    break
                # bits of this transmission that fall inside the window
                span = max(1, e - s)
                inside = max(0, min(e, s0 + window_us) - max(s, s0))
                total += bits * inside / span
            if total > cap + 1:
                return False
        return True

    def trace_text(self) -> str:
        if self.trace_lines is None:
            return ""
        return "\n".join(self.trace_lines) + ("\n" if self.trace_lines else "")
