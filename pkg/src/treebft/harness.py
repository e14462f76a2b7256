"""Scenario files, experiment runs, sweeps and CSV output.

Scenario grammar (``configparser`` INI subset, ``#`` comments)::

    [scenario]
    name = tree-100
    preset = large-scale          # large-scale | regional | national
    n = 100
    topology = tree               # tree | star
    height = 3
    fanout = 10
    scheme = aggregate            # aggregate | naive
    block_bits = 102400
    ops_per_block = 400
    duration_s = 30
    drain_s = auto
    seed = 1
    view_timeout_s = auto

    [net]
    rtt_ms = 200
    bandwidth_mbps = 25
    delta_ms = auto
    gst_ms = 0

    [crypto]                      # any subset; defaults follow the scheme
    sign_us = 1000
    verify_us = 3000
    aggregate_per_element_us = 50
    share_wire_bytes = 64
    aggregate_wire_bytes = 96

    [pipeline]
    stretch = auto                # integer >= 1, or auto (from the model)
    phi_ms = auto                 # root processing per block fed to the model

    [faults]                      # pid@seconds, comma separated
    crash = 0@60, 11@60
    omit_all =
    omit_aggregates =
    spurious_timeout = 5@2.5      # a correct process suspects its root at 2.5 s

Values given in ``[net]`` override the preset.
"""
from __future__ import annotations

import configparser
import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

from treebft import collections as col
from treebft import perfmodel
from treebft.collections import CryptoCostModel, Keyring, Scheme
from treebft.consensus import Cluster, ProtocolConfig
from treebft.errors import ConfigError, InsufficientBins, ShapeInfeasible
from treebft.simnet import FaultEntry, FaultKind, FaultSchedule, NetParams, Network, Simulator
from treebft.tree import Shape, build, make_balanced_tree, partition_bins

PRESETS = {
    "large-scale": {"rtt_ms": 200.0, "bandwidth_bps": 25e6},
    "regional": {"rtt_ms": 100.0, "bandwidth_bps": 100e6},
    "national": {"rtt_ms": 20.0, "bandwidth_bps": 100e6},
}

# Measured root processing per block (ms) at 200 ms RTT and 25 Mb/s, keyed by
# (n, root fanout, scheme). Used as the model's phi when a scenario matches.
MEASURED_PHI_MS = {
    (100, 99, Scheme.NAIVE): 10.58,
    (200, 199, Scheme.NAIVE): 19.66,
    (400, 399, Scheme.NAIVE): 36.91,
    (100, 10, Scheme.AGGREGATE): 31.98,
    (100, 20, Scheme.AGGREGATE): 32.83,
    (200, 20, Scheme.AGGREGATE): 37.33,
    (400, 20, Scheme.AGGREGATE): 37.90,
}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    n: int = 100
    topology: str = "tree"
    height: int = 3
    fanout: int = 10
    scheme: Scheme = Scheme.AGGREGATE
    rtt_ms: float = 200.0
    bandwidth_bps: float = 25e6
    delta_ms: float | None = None
    gst_ms: float = 0.0
    block_bits: int = 102400
    ops_per_block: int = 400
    crypto: CryptoCostModel | None = None
    stretch: int | None = None
    faults: tuple = ()
    spurious_timeouts: tuple = ()
    duration_s: float = 30.0
    drain_s: float | None = None
    seed: int = 1
    view_timeout_s: float | None = None
    phi_ms: float | None = None

    @property
    def f(self) -> int:
        return (self.n - 1) // 3

    @property
    def shape(self) -> Shape:
        if self.topology == "star":
            return Shape(2, self.n - 1)
        return Shape(self.height, self.fanout)

    @property
    def costs(self) -> CryptoCostModel:
        return self.crypto if self.crypto is not None else col.default_costs(self.scheme)

    @property
    def rtt_us(self) -> int:
        return int(round(self.rtt_ms * 1000))


def preset(name: str, **overrides) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    return validate(replace(ScenarioConfig(name=name, **PRESETS[name]), **overrides))


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Field-level checks; raises ConfigError, ShapeInfeasible or InsufficientBins."""
    if cfg.n < 2:
        raise ConfigError("n: need at least 2 processes")
    if cfg.topology not in ("star", "tree"):
        raise ConfigError(f"topology: expected star or tree, got {cfg.topology!r}")
    if cfg.rtt_ms <= 0:
        raise ConfigError("rtt_ms: must be > 0")
    if cfg.bandwidth_bps <= 0:
        raise ConfigError("bandwidth: must be > 0")
    if cfg.block_bits <= 0:
        raise ConfigError("block_bits: must be > 0")
    if cfg.ops_per_block < 0:
        raise ConfigError("ops_per_block: must be >= 0")
    if cfg.duration_s <= 0:
        raise ConfigError("duration_s: must be > 0")
    if cfg.stretch is not None and cfg.stretch < 1:
        raise ConfigError("stretch: must be >= 1")
    if cfg.phi_ms is not None and cfg.phi_ms < 0:
        raise ConfigError("phi_ms: must be >= 0")
    if cfg.view_timeout_s is not None and cfg.view_timeout_s <= 0:
        raise ConfigError("view_timeout_s: must be > 0")
    if cfg.delta_ms is not None and cfg.delta_ms < cfg.rtt_ms:
        raise ConfigError("delta_ms: must be >= rtt_ms")
    if cfg.topology == "tree":
        if cfg.height < 2:
            raise ConfigError("height: must be >= 2")
        if cfg.fanout < 1:
            raise ConfigError("fanout: must be >= 1")
        make_balanced_tree(range(cfg.n), cfg.height, cfg.fanout)
    partition(cfg)
    bad = {e.pid for e in cfg.faults}
    for e in cfg.faults:
        if not 0 <= e.pid < cfg.n:
            raise ConfigError(f"faults: process {e.pid} outside [0, {cfg.n})")
    if len(bad) > cfg.f:
        raise ConfigError(f"faults: {len(bad)} faulty processes exceed f={cfg.f}")
    for pid, at in cfg.spurious_timeouts:
        if not 0 <= pid < cfg.n or at < 0:
            raise ConfigError(f"spurious_timeout: bad entry {pid}@{at / 1e6}")
    return cfg


def partition(cfg: ScenarioConfig):
    """Bins for the evolving graph; tolerates floor(N/I) - 1 faulty internal nodes."""
    size = cfg.shape.internal_count()
    count = cfg.n // size
    if count < 1:
        raise ShapeInfeasible(f"n={cfg.n} is smaller than the {size} internal slots")
    return partition_bins(range(cfg.n), size, count - 1)


def partition_tree(cfg: ScenarioConfig, view: int):
    """The tree used in ``view``."""
    return build(view, partition(cfg), cfg.shape)


# scenario files

def _opt(sec, key, conv, default):
    raw = sec.get(key)
    if raw is None or raw.strip() == "" or raw.strip().lower() == "auto":
        return default
    try:
        return conv(raw.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw.strip()!r}") from None


def _faults(sec) -> tuple[tuple, tuple]:
    out, spurious = [], []
    kinds = {"crash": FaultKind.CRASH_SILENT, "omit_all": FaultKind.OMIT_ALL,
             "omit_aggregates": FaultKind.OMIT_AGGREGATES}
    for key in sec:
        if key not in kinds and key != "spurious_timeout":
            raise ConfigError(f"faults.{key}: unknown fault kind")
        for tok in sec[key].split(","):
            tok = tok.strip()
            if not tok:
                continue
            pid, _, at = tok.partition("@")
            try:
                pid, at_us = int(pid), int(round(float(at or 0) * 1e6))
            except ValueError:
                raise ConfigError(f"faults.{key}: bad entry {tok!r}, expected pid@seconds") from None
            if key == "spurious_timeout":
                spurious.append((pid, at_us))
            else:
                out.append(FaultEntry(pid, kinds[key], at_us))
    return tuple(sorted(out)), tuple(sorted(spurious))


def parse_scenario(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"parse: {e}") from None
    known = {"scenario", "net", "crypto", "pipeline", "faults"}
    for s in cp.sections():
        if s not in known:
            raise ConfigError(f"[{s}]: unknown section")
    sc = cp["scenario"] if cp.has_section("scenario") else {}
    net = cp["net"] if cp.has_section("net") else {}
    cr = cp["crypto"] if cp.has_section("crypto") else {}
    pl = cp["pipeline"] if cp.has_section("pipeline") else {}

    pname = _opt(sc, "preset", str, "large-scale")
    if pname not in PRESETS:
        raise ConfigError(f"preset: unknown preset {pname!r}")
    base = PRESETS[pname]
    topology = _opt(sc, "topology", str, "tree")
    scheme_raw = _opt(sc, "scheme", str, "naive" if topology == "star" else "aggregate")
    try:
        scheme = Scheme(scheme_raw)
    except ValueError:
        raise ConfigError(f"scheme: expected naive or aggregate, got {scheme_raw!r}") from None
    dc = col.default_costs(scheme)
    crypto = CryptoCostModel(
        sign_us=_opt(cr, "sign_us", float, dc.sign_us),
        verify_us=_opt(cr, "verify_us", float, dc.verify_us),
        aggregate_per_element_us=_opt(cr, "aggregate_per_element_us", float,
                                      dc.aggregate_per_element_us),
        share_wire_bytes=_opt(cr, "share_wire_bytes", int, dc.share_wire_bytes),
        aggregate_wire_bytes=_opt(cr, "aggregate_wire_bytes", int, dc.aggregate_wire_bytes),
    ) if cr else None
    bw = _opt(net, "bandwidth_mbps", float, None)
    faults, spurious = _faults(cp["faults"]) if cp.has_section("faults") else ((), ())
    cfg = ScenarioConfig(
        name=_opt(sc, "name", str, pname),
        n=_opt(sc, "n", int, 100),
        topology=topology,
        height=_opt(sc, "height", int, 3),
        fanout=_opt(sc, "fanout", int, 10),
        scheme=scheme,
        rtt_ms=_opt(net, "rtt_ms", float, base["rtt_ms"]),
        bandwidth_bps=bw * 1e6 if bw is not None else base["bandwidth_bps"],
        delta_ms=_opt(net, "delta_ms", float, None),
        gst_ms=_opt(net, "gst_ms", float, 0.0),
        block_bits=_opt(sc, "block_bits", int, 102400),
        ops_per_block=_opt(sc, "ops_per_block", int, 400),
        crypto=crypto,
        stretch=_opt(pl, "stretch", int, None),
        phi_ms=_opt(pl, "phi_ms", float, None),
        faults=faults,
        spurious_timeouts=spurious,
        duration_s=_opt(sc, "duration_s", float, 30.0),
        drain_s=_opt(sc, "drain_s", float, None),
        seed=_opt(sc, "seed", int, 1),
        view_timeout_s=_opt(sc, "view_timeout_s", float, None),
    )
    return validate(cfg)


def load_scenario(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"scenario: cannot read {path}: {e.strerror}") from None
    return parse_scenario(text)


# model glue

def model_phi(cfg: ScenarioConfig) -> float:
    """phi in seconds: the scenario's value, else a measured one, else the cost model's."""
    if cfg.phi_ms is not None:
        return cfg.phi_ms / 1000
    sh = cfg.shape
    measured = MEASURED_PHI_MS.get((cfg.n, sh.root_fanout, cfg.scheme))
    if (measured is not None and cfg.crypto is None and cfg.rtt_ms == 200.0
            and cfg.bandwidth_bps == 25e6 and cfg.block_bits == 102400
            and sh.height == (2 if sh.root_fanout == cfg.n - 1 else 3)):
        return measured / 1000
    return phi_estimate(cfg)


def phi_estimate(cfg: ScenarioConfig) -> float:
    """Root processing per bundle in seconds: own signature plus partials verified until quorum."""
    q = 2 * cfg.f + 1
    us = col.cpu_cost("sign", 1, cfg.costs, cfg.scheme)
    tree = make_balanced_tree(range(cfg.n), cfg.shape.height, cfg.shape.root_fanout)
    have = 1
    for c in tree.children_of(tree.root):
        if have >= q:
            break
        k = len(tree.subtree(c))
        us += col.cpu_cost("verify", k, cfg.costs, cfg.scheme)
        have += k
    return us / 1e6


def model_inputs(cfg: ScenarioConfig) -> perfmodel.ModelInputs:
    sh = cfg.shape
    return perfmodel.ModelInputs(
        N=cfg.n, h=sh.height, m=sh.root_fanout, B=cfg.block_bits, b=cfg.bandwidth_bps,
        rtt=cfg.rtt_ms / 1000, phi=model_phi(cfg), scheme=cfg.scheme,
        share_bytes=cfg.costs.share_wire_bytes, aggregate_bytes=cfg.costs.aggregate_wire_bytes)


def effective_stretch(cfg: ScenarioConfig) -> int:
    if cfg.stretch is not None:
        return cfg.stretch
    return perfmodel.pipeline_depth(model_inputs(cfg)).stretch


def _derived(cfg: ScenarioConfig) -> dict:
    inp = model_inputs(cfg)
    bt = perfmodel.busy_time(inp)
    stretch = effective_stretch(cfg)
    h = cfg.shape.height
    tx_us = math.ceil(cfg.block_bits * 1e6 / cfg.bandwidth_bps)
    delta_us = (int(cfg.delta_ms * 1000) if cfg.delta_ms is not None
                else h * cfg.rtt_us + BASE * stretch * cfg.shape.root_fanout * tx_us)
    vt_us = (int(round(cfg.view_timeout_s * 1e6)) if cfg.view_timeout_s is not None
             else int(2e6 * (h * cfg.rtt_ms / 1000 + BASE * bt)))
    drain = (cfg.drain_s if cfg.drain_s is not None
             else (BASE * stretch + BASE) * bt + BASE * h * cfg.rtt_ms / 1000 + 1.0)
    return {"stretch": stretch, "delta_us": delta_us, "view_timeout_us": vt_us,
            "drain_us": int(drain * 1e6), "phi_s": inp.phi}


BASE = perfmodel.BASE_DEPTH


# runs

@dataclass
class RunMetrics:
    config: ScenarioConfig
    stretch: int
    phi_s: float
    blocks_decided: int
    ops_per_s: float
    mean_latency_s: float
    view_changes: int
    series: list
    bytes_sent: list
    max_bytes_sent_process: int
    proposed_blocks: int = 0
    ledger_lengths: list = field(default_factory=list)
    correct: list = field(default_factory=list)
    max_inflight_seen: int = 0
    mean_inflight: float = 0.0
    mean_outstanding: float = 0.0
    invalid_partials: int = 0
    bottoms: int = 0
    views_started: dict = field(default_factory=dict)
    bundle_receipts: dict = field(default_factory=dict)
    min_cert_cardinality: int = 0
    all_proposed_decided: bool = False
    ledgers: list = field(default_factory=list)
    proposed_view: dict = field(default_factory=dict)
    proposed_at: dict = field(default_factory=dict)
    trace: str = ""

    SUMMARY_FIELDS = ("name", "n", "topology", "height", "fanout", "scheme", "rtt_s",
                      "bandwidth_bps", "block_bits", "ops_per_block", "stretch", "duration_s",
                      "seed", "phi_s", "blocks_decided", "ops_per_s", "mean_latency_s",
                      "view_changes", "max_bytes_sent_process")

    def summary(self) -> dict:
        c = self.config
        sh = c.shape
        return {
            "name": c.name, "n": c.n, "topology": c.topology, "height": sh.height,
            "fanout": sh.root_fanout, "scheme": c.scheme.value, "rtt_s": _f(c.rtt_ms / 1000),
            "bandwidth_bps": _f(c.bandwidth_bps), "block_bits": c.block_bits,
            "ops_per_block": c.ops_per_block, "stretch": self.stretch,
            "duration_s": _f(c.duration_s), "seed": c.seed, "phi_s": _f(self.phi_s),
            "blocks_decided": self.blocks_decided, "ops_per_s": _f(self.ops_per_s),
            "mean_latency_s": _f(self.mean_latency_s), "view_changes": self.view_changes,
            "max_bytes_sent_process": self.max_bytes_sent_process,
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.SUMMARY_FIELDS)
        s = self.summary()
        w.writerow([s[k] for k in self.SUMMARY_FIELDS])
        w.writerow([])
        w.writerow(["second", "ops"])
        for i, ops in enumerate(self.series):
            w.writerow([i, ops])
        w.writerow([])
        w.writerow(["process", "bytes_sent"])
        for p, b in enumerate(self.bytes_sent):
            w.writerow([p, b])
        return out.getvalue()


def _f(x: float) -> str:
    return f"{x:.6f}"


def run(cfg: ScenarioConfig, trace: bool = False, check_bandwidth: bool = False) -> RunMetrics:
    """Simulate ``cfg`` for duration_s plus a drain period without new proposals."""
    cfg = validate(cfg)
    d = _derived(cfg)
    dur_us = int(round(cfg.duration_s * 1e6))
    net_params = NetParams(rtt_us=cfg.rtt_us, bandwidth_bps=cfg.bandwidth_bps,
                           delta_us=max(d["delta_us"], cfg.rtt_us), gst_us=int(cfg.gst_ms * 1000))
    sim = Simulator()
    net = Network(sim, cfg.n, net_params, seed=cfg.seed, faults=FaultSchedule(list(cfg.faults)),
                  f=cfg.f, trace=trace or check_bandwidth)
    keyring = Keyring.generate(cfg.n, seed=cfg.seed)
    pc = ProtocolConfig(
        n=cfg.n, shape=cfg.shape, partition=partition(cfg), scheme=cfg.scheme, crypto=cfg.costs,
        stretch=d["stretch"], view_timeout_us=d["view_timeout_us"], delta_us=net_params.delta_us,
        block_bits=cfg.block_bits, ops_per_block=cfg.ops_per_block, stop_us=dur_us)
    cluster = Cluster(pc, net, keyring, trace_dissemination=trace)
    cluster.start()
    for pid, at in cfg.spurious_timeouts:
        sim.schedule(at, cluster.replicas[pid].suspect)
    cluster.run(dur_us + d["drain_us"])
    cluster.check_agreement()
    if check_bandwidth:
        for p in range(cfg.n):
            if not net.check_bandwidth(p, cfg.rtt_us):
                raise AssertionError(f"process {p} exceeded its egress bandwidth")
    return _metrics(cfg, d, cluster, dur_us, trace)


def _metrics(cfg, d, cluster: Cluster, dur_us: int, trace: bool) -> RunMetrics:
    st = cluster.stats
    seconds = max(1, math.ceil(dur_us / 1e6))
    series_blocks = [0] * seconds
    lat = []
    for h, (t, bid) in sorted(st.first_decided.items()):
        if t >= dur_us:
            continue
        series_blocks[int(t // 1_000_000)] += 1
        lat.append(t - st.proposed_at.get(bid, t))
    decided = sum(series_blocks)
    correct = cluster.correct()
    view_changes = max(cluster.replicas[p].view for p in correct) if correct else 0
    bytes_sent = [b // 8 for b in cluster.net.bits_sent]
    correct_ledgers = [cluster.replicas[p].ledger for p in correct]
    decided_ids = set()
    for led in correct_ledgers:
        decided_ids.update(led)
    common = set(correct_ledgers[0]) if correct_ledgers else set()
    for led in correct_ledgers[1:]:
        common &= set(led)
    return RunMetrics(
        config=cfg, stretch=d["stretch"], phi_s=d["phi_s"], blocks_decided=decided,
        ops_per_s=decided * cfg.ops_per_block / (dur_us / 1e6),
        mean_latency_s=(sum(lat) / len(lat) / 1e6) if lat else 0.0,
        view_changes=view_changes,
        series=[b * cfg.ops_per_block for b in series_blocks],
        bytes_sent=bytes_sent, max_bytes_sent_process=max(bytes_sent),
        proposed_blocks=len(st.proposed_at),
        ledger_lengths=[len(r.ledger) for r in cluster.replicas], correct=correct,
        max_inflight_seen=st.max_inflight_seen,
        mean_inflight=_time_mean(st.inflight, dur_us // 4, dur_us),
        mean_outstanding=_time_mean(st.outstanding, dur_us // 4, dur_us),
        invalid_partials=st.invalid_partials, bottoms=st.bottoms,
        views_started=dict(st.views_started), bundle_receipts=dict(st.bundle_receipts),
        min_cert_cardinality=min(st.certs_cardinality) if st.certs_cardinality else 0,
        all_proposed_decided=all(b in common for b in st.proposed_at),
        ledgers=[list(r.ledger) for r in cluster.replicas],
        proposed_view=dict(st.proposed_view),
        proposed_at=dict(st.proposed_at),
        trace=cluster.net.trace_text() if trace else "",
    )


def _time_mean(changes, t0: int, t1: int) -> float:
    """Time-weighted mean over [t0, t1) of a step function given as (time, value) changes."""
    if t1 <= t0:
        return 0.0
    area, cur, last = 0.0, 0, t0
    for t, v in changes:
        if t >= t1:
            break
        if t > last:
            area += cur * (t - last)
            last = t
        cur = v
    area += cur * (t1 - last)
    return area / (t1 - t0)


# sweeps and comparisons

SWEEP_HEADER = "axis,ops_per_s,mean_latency_s,view_changes"


def with_axis(cfg: ScenarioConfig, axis: str, value: str) -> ScenarioConfig:
    names = {f.name: f for f in fields(ScenarioConfig)}
    if axis not in names or axis in ("crypto", "faults"):
        raise ConfigError(f"axis: {axis!r} is not a sweepable scenario field")
    cur = getattr(cfg, axis)
    if axis == "scheme":
        conv = Scheme
    elif isinstance(cur, bool):
        conv = lambda s: s.lower() in ("1", "true", "yes")
    elif axis in ("stretch", "n", "height", "fanout", "block_bits", "ops_per_block", "seed"):
        conv = int
    elif isinstance(cur, (int, float)) or cur is None:
        conv = float
    else:
        conv = str
    try:
        v = conv(value)
    except ValueError:
        raise ConfigError(f"{axis}: cannot parse {value!r}") from None
    return validate(replace(cfg, **{axis: v}))


def _sweep_row(cfg: ScenarioConfig) -> tuple:
    m = run(cfg)
    return m.ops_per_s, m.mean_latency_s, m.view_changes


def sweep(cfg: ScenarioConfig, axis: str, values, jobs: int = 1) -> str:
    """One run per value; rows come back in input order whatever ``jobs`` is."""
    values = [str(v) for v in values]
    cfgs = [with_axis(cfg, axis, v) for v in values]
    if jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_row, cfgs))
    else:
        results = [_sweep_row(c) for c in cfgs]
    rows = [SWEEP_HEADER]
    for v, (ops, lat, vc) in zip(values, results):
        rows.append(f"{v},{_f(ops)},{_f(lat)},{vc}")
    return "\n".join(rows) + "\n"


def read_summary(text: str) -> dict:
    lines = []
    for line in text.splitlines():
        if not line.strip():
            break
        lines.append(line)
    rows = list(csv.DictReader(lines))
    if not rows:
        raise ConfigError("csv: no summary row")
    return rows[0]


def _inputs_from_summary(s: dict) -> perfmodel.ModelInputs:
    n = int(s["n"])
    return perfmodel.ModelInputs(
        N=n, h=int(s["height"]), m=int(s["fanout"]), B=float(s["block_bits"]),
        b=float(s["bandwidth_bps"]), rtt=float(s["rtt_s"]), phi=float(s["phi_s"]),
        scheme=Scheme(s["scheme"]))


@dataclass(frozen=True)
class Comparison:
    measured_ratio: float
    model_estimate: float

    def to_csv(self) -> str:
        return (f"measured_ratio,model_estimate\n"
                f"{_f(self.measured_ratio)},{_f(self.model_estimate)}\n")


def compare(a: dict, b: dict) -> Comparison:
    """Throughput of run ``a`` over run ``b``, next to the model's busy-time ratio."""
    for key in ("duration_s", "block_bits"):
        if a.get(key) != b.get(key):
            raise ConfigError(f"compare: runs differ in {key} ({a.get(key)} vs {b.get(key)})")
    ra, rb = float(a["ops_per_s"]), float(b["ops_per_s"])
    ratio = ra / rb if rb > 0 else math.inf
    est = perfmodel.estimated_speedup(_inputs_from_summary(a), _inputs_from_summary(b))
    return Comparison(ratio, est)
