"""Four-round leader-based consensus over a tree, with pipelining and view changes.

The root sends *bundles* down the tree. A bundle piggybacks, on one message
per edge, new block proposals, the certificates of earlier bundles and sync
decisions. Every process signs one share per bundle over the bundle's vote
items; shares are folded bottom-up into a collection, and a collection with
2f+1 supporters is the bundle's certificate. A certificate moves each of its
items one phase forward: a prepare certificate makes processes vote
pre-commit, a pre-commit certificate locks, a commit certificate decides.
"""
from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

from treebft import collections as col
from treebft.collections import Collection, CryptoCostModel, Keyring, Scheme
from treebft.errors import AgreementViolation
from treebft.simnet import BOTTOM, Kind, Network
from treebft.tree import BinPartition, Shape, TreeConfig, build

GENESIS_ID = bytes(16)
BASE_DEPTH = 4
# per-decision bookkeeping on the wire besides the certificate itself
DECISION_HEADER_BITS = 256


class Phase(IntEnum):
    PREPARE = 1
    PRECOMMIT = 2
    COMMIT = 3


@dataclass(frozen=True)
class Block:
    id: bytes
    parent_id: bytes
    height: int
    view: int
    op_count: int = 400
    size_bits: int = 102400


@dataclass(frozen=True, order=True)
class VoteItem:
    height: int
    phase: int
    view: int
    block_id: bytes


def vote_value(view: int, seq: int, items) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    h.update(f"vote:{view}:{seq}".encode())
    for it in items:
        h.update(f"|{it.height}:{it.phase}:{it.view}:".encode())
        h.update(it.block_id)
    return h.digest()


def newview_value(view: int) -> bytes:
    return hashlib.blake2b(f"nv:{view}".encode(), digest_size=16).digest()


@dataclass(eq=False)
class Cert:
    view: int
    seq: int
    items: tuple
    value: bytes
    collection: Collection
    blocks: dict = field(default_factory=dict)
    _ok: bool | None = None

    def valid(self, keyring: Keyring, q: int) -> bool:
        if self._ok is None:
            self._ok = (vote_value(self.view, self.seq, self.items) == self.value
                        and col.has(self.collection, self.value, q, keyring))
        return self._ok


@dataclass(frozen=True)
class QuorumCert:
    item: VoteItem
    cert: Cert

    @property
    def height(self) -> int:
        return self.item.height

    @property
    def block_id(self) -> bytes:
        return self.item.block_id

    @property
    def view(self) -> int:
        return self.item.view

    @property
    def phase(self) -> Phase:
        return Phase(self.item.phase)

    @property
    def block(self) -> Block | None:
        return self.cert.blocks.get(self.item.block_id)

    def valid(self, keyring: Keyring, q: int) -> bool:
        return self.item in self.cert.items and self.cert.valid(keyring, q)


@dataclass(frozen=True)
class Proposal:
    block: Block
    justify: QuorumCert | None = None


@dataclass(frozen=True)
class Bundle:
    view: int
    seq: int
    proposals: tuple
    certs: tuple
    decisions: tuple
    items: tuple
    value: bytes | None
    view_cert: Collection | None
    size_bits: int


@dataclass(frozen=True)
class VoteMsg:
    view: int
    seq: int
    collection: Collection


@dataclass(frozen=True)
class Report:
    ledger_len: int
    decided: tuple
    locks: tuple


@dataclass(frozen=True)
class NewViewMsg:
    view: int
    share: Collection
    report: Report


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    shape: Shape
    partition: BinPartition
    scheme: Scheme
    crypto: CryptoCostModel
    stretch: int = 1
    view_timeout_us: int = 1_000_000
    delta_us: int = 1_000_000
    block_bits: int = 102400
    ops_per_block: int = 400
    stop_us: int | None = None
    max_backoff_exp: int = 10

    @property
    def f(self) -> int:
        return (self.n - 1) // 3

    @property
    def quorum(self) -> int:
        return 2 * self.f + 1

    @property
    def max_inflight(self) -> int:
        return BASE_DEPTH * self.stretch

    def tree(self, view: int) -> TreeConfig:
        return build(view, self.partition, self.shape)


class Stats:
    """Run-wide observations shared by every replica of one cluster."""

    def __init__(self):
        self.proposed_at: dict[bytes, int] = {}
        self.proposed_view: dict[bytes, int] = {}
        self.first_decided: dict[int, tuple[int, bytes]] = {}
        self.invalid_partials = 0
        self.bottoms = 0
        self.views_started: dict[int, int] = {0: 0}
        self.max_inflight_seen = 0
        # (time, undecided instances at the root) after every change
        self.inflight: list[tuple[int, int]] = []
        self.bundle_receipts: dict[tuple[int, int], int] = {}
        self.certs_cardinality: list[int] = []
        # (time, bundles awaiting a certificate at the root) after every change
        self.outstanding: list[tuple[int, int]] = []


class _RootState:
    def __init__(self, view: int, tip_height: int, tip_id: bytes):
        self.view = view
        self.seq = 0
        self.tip_height = tip_height
        self.tip_id = tip_id
        self.open: dict[int, dict] = {}
        self.order: deque[int] = deque()
        self.ready: dict[int, Cert] = {}
        self.pending_certs: list[Cert] = []
        self.pending_decisions: list[QuorumCert] = []
        self.reproposals: list[Proposal] = []
        self.undecided: set[int] = set()
        self.view_cert: Collection | None = None
        self.wake_at: int | None = None
        self.counter = 0


class Replica:
    def __init__(self, pid: int, cfg: ProtocolConfig, net: Network, keyring: Keyring,
                 stats: Stats, trace_dissemination: bool = False):
        self.pid = pid
        self.cfg = cfg
        self.net = net
        self.sim = net.sim
        self.keyring = keyring
        self.stats = stats
        self.trace_dissemination = trace_dissemination

        self.view = 0
        self.tree = cfg.tree(0)
        self.ledger: list[bytes] = []
        self.decided_ids: dict[int, bytes] = {}
        self.commit_qcs: dict[int, QuorumCert] = {}
        self.blocks: dict[bytes, Block] = {}
        self.accepted: dict[int, tuple[bytes, int]] = {}
        self.prepare_qc: dict[int, QuorumCert] = {}
        self.locks: dict[int, QuorumCert] = {}
        # keyed by id(); holding the object keeps the id from being recycled
        self.verified: dict[int, object] = {}

        self.expected_seq = 0
        self.buffer: dict[int, Bundle] = {}
        self.gathers: dict[tuple[int, int], object] = {}
        self.root: _RootState | None = None
        self.nv_pool: dict[int, dict[int, NewViewMsg]] = {}
        self._vq: deque = deque()
        self._vq_running = False

        self.backoff = 0
        self.deadline = cfg.view_timeout_us
        self._timer_at: int | None = None
        net.handlers[pid] = self.on_message

    # helpers

    @property
    def costs(self) -> CryptoCostModel:
        return self.cfg.crypto

    def _cpu(self, op: str, k: int) -> int:
        return self.net.cpu(self.pid, col.cpu_cost(op, k, self.costs, self.cfg.scheme))

    def _check_qc_cost(self, cert: Cert) -> bool:
        """Charge verification once per distinct certificate, return validity."""
        key = id(cert)
        if key not in self.verified:
            self.verified[key] = cert
            self._cpu("verify", cert.collection.cardinality)
        return cert.valid(self.keyring, self.cfg.quorum)

    def _crashed(self) -> bool:
        return self.net.is_crashed(self.pid)

    def _stopped(self) -> bool:
        return self.cfg.stop_us is not None and self.sim.now >= self.cfg.stop_us

    def _wire_bits(self, c: Collection) -> int:
        return 8 * col.wire_size(c, self.costs)

    # pacemaker

    def start(self) -> None:
        self._arm(self.cfg.view_timeout_us)
        if self.tree.root == self.pid:
            self.root = _RootState(0, 0, GENESIS_ID)
            self._try_send()

    def _arm(self, wait_us: int) -> None:
        self.deadline = self.sim.now + wait_us
        if self._timer_at is None or self._timer_at > self.deadline:
            self._timer_at = self.deadline
            self.sim.schedule(self.deadline, self._on_timer)

    def _progress(self, certified: bool = False) -> None:
        """Push the deadline out; only a new certificate resets the backoff."""
        if certified:
            self.backoff = 0
        self.deadline = self.sim.now + self.cfg.view_timeout_us * (2 ** self.backoff)
        if self._timer_at is None:
            self._timer_at = self.deadline
            self.sim.schedule(self.deadline, self._on_timer)

    def _on_timer(self) -> None:
        if self._timer_at is not None and self.sim.now < self._timer_at:
            return
        self._timer_at = None
        if self._crashed() or self._stopped():
            return
        if self.sim.now < self.deadline:
            self._timer_at = self.deadline
            self.sim.schedule(self.deadline, self._on_timer)
            return
        self.on_timeout()

    def on_timeout(self) -> None:
        """Move to the next configuration and report to its root."""
        self.backoff = min(self.backoff + 1, self.cfg.max_backoff_exp)
        target = self.view + 1
        self._enter_view(target)
        self._arm(self.cfg.view_timeout_us * (2 ** self.backoff))
        msg = NewViewMsg(target, col.new_share(self.pid, newview_value(target), self.keyring,
                                               self.cfg.scheme), self._report())
        self._cpu("sign", 1)
        dst = self.tree.root
        if dst == self.pid:
            self._on_newview(self.pid, msg)
        else:
            size = self._wire_bits(msg.share) + self._report_bits(msg.report)
            self.net.send(self.pid, dst, size, msg, Kind.NEWVIEW)

    def suspect(self) -> None:
        """Time out now, whatever the deadline says (a false suspicion)."""
        if self._crashed() or self._stopped():
            return
        self.on_timeout()

    def _enter_view(self, view: int) -> None:
        if view <= self.view:
            return
        for g in self.gathers.values():
            g.cancel()
        self.gathers.clear()
        self.view = view
        self.tree = self.cfg.tree(view)
        self.buffer.clear()
        self.expected_seq = 0
        self.root = None

    def _report(self) -> Report:
        w = self.cfg.max_inflight
        n = len(self.ledger)
        decided = tuple(self.commit_qcs[h] for h in range(max(1, n - w + 1), n + 1)
                        if h in self.commit_qcs)
        locks = tuple(self.locks[h] for h in sorted(self.locks) if h > n)
        return Report(n, decided, locks)

    def _report_bits(self, rep: Report) -> int:
        bits = 64
        for qc in rep.decided + rep.locks:
            bits += self._wire_bits(qc.cert.collection) + DECISION_HEADER_BITS
        return bits

    # ledger

    def _decide(self, qc: QuorumCert) -> None:
        h, bid = qc.height, qc.block_id
        cur = self.decided_ids.get(h)
        if cur is not None:
            if cur != bid:
                raise AgreementViolation(
                    f"process {self.pid} decided {cur.hex()} and {bid.hex()} at height {h}")
            return
        self.decided_ids[h] = bid
        self.commit_qcs[h] = qc
        blk = qc.block
        if blk is not None:
            self.blocks.setdefault(bid, blk)
        while len(self.ledger) + 1 in self.decided_ids:
            hh = len(self.ledger) + 1
            b = self.decided_ids[hh]
            self.ledger.append(b)
            first = self.stats.first_decided.get(hh)
            if first is None:
                self.stats.first_decided[hh] = (self.sim.now, b)
            elif first[1] != b:
                raise AgreementViolation(f"height {hh}: {first[1].hex()} vs {b.hex()}")
        for h2 in [x for x in self.locks if x <= len(self.ledger)]:
            del self.locks[h2]
        for h2 in [x for x in self.prepare_qc if x <= len(self.ledger)]:
            del self.prepare_qc[h2]
        if self.root is not None:
            if h in self.root.undecided:
                self.root.undecided.discard(h)
                self.stats.inflight.append((self.sim.now, len(self.root.undecided)))

    def _record_cert(self, cert: Cert) -> None:
        for it in cert.items:
            qc = QuorumCert(it, cert)
            if it.phase == Phase.PREPARE:
                cur = self.prepare_qc.get(it.height)
                if cur is None or cur.view <= it.view:
                    self.prepare_qc[it.height] = qc
            elif it.phase == Phase.PRECOMMIT:
                if it.height > len(self.ledger):
                    cur = self.locks.get(it.height)
                    if cur is None or cur.view <= it.view:
                        self.locks[it.height] = qc
            else:
                self._decide(qc)

    # follower validation

    def _expected_parent(self, h: int) -> bytes | None:
        if h == 1:
            return GENESIS_ID
        if h - 1 in self.decided_ids:
            return self.decided_ids[h - 1]
        acc = self.accepted.get(h - 1)
        if acc is not None and acc[1] == self.view:
            return acc[0]
        return None

    def _safe(self, prop: Proposal) -> bool:
        b = prop.block
        h = b.height
        if h in self.decided_ids:
            return self.decided_ids[h] == b.id
        if b.parent_id != self._expected_parent(h):
            return False
        lk = self.locks.get(h)
        if lk is not None and lk.block_id != b.id:
            j = prop.justify
            if j is None or j.view <= lk.view:
                return False
        return True

    def _accept_proposals(self, bundle: Bundle) -> set[tuple[int, bytes]]:
        ok = set()
        for prop in bundle.proposals:
            blk = prop.block
            if prop.justify is not None and not self._check_qc_cost(prop.justify.cert):
                continue
            if self._safe(prop):
                self.blocks[blk.id] = blk
                self.accepted[blk.height] = (blk.id, bundle.view)
                ok.add((blk.height, blk.id))
        return ok

    def _endorse(self, bundle: Bundle, accepted: set) -> bool:
        for it in bundle.items:
            if it.view != bundle.view:
                return False
            if it.phase == Phase.PREPARE:
                if (it.height, it.block_id) not in accepted:
                    return False
            elif it.phase == Phase.PRECOMMIT:
                qc = self.prepare_qc.get(it.height)
                if qc is None or qc.block_id != it.block_id or qc.view != it.view:
                    return False
            else:
                qc = self.locks.get(it.height)
                if qc is None or qc.block_id != it.block_id or qc.view != it.view:
                    return False
        return True

    def _apply_bundle(self, bundle: Bundle) -> bool:
        """Learn certificates, decisions and proposals; return whether to vote."""
        if bundle.view_cert is not None and bundle.view > 0:
            self._charge_collection(bundle.view_cert)
        for qc in bundle.decisions:
            if self._check_qc_cost(qc.cert) and qc.item in qc.cert.items:
                self._decide(qc)
        for cert in bundle.certs:
            if cert.view == bundle.view and self._check_qc_cost(cert):
                self._record_cert(cert)
                self._progress(certified=True)
        accepted = self._accept_proposals(bundle)
        if not bundle.items:
            return False
        if vote_value(bundle.view, bundle.seq, bundle.items) != bundle.value:
            return False
        return self._endorse(bundle, accepted)

    def _charge_collection(self, c: Collection) -> None:
        key = id(c)
        if key not in self.verified:
            self.verified[key] = c
            self._cpu("verify", c.cardinality)

    # message entry point

    def on_message(self, msg) -> None:
        if self._crashed():
            return
        p = msg.payload
        if isinstance(p, Bundle):
            self._on_bundle(msg.src, p)
        elif isinstance(p, VoteMsg):
            self._on_vote(msg.src, p)
        elif isinstance(p, NewViewMsg):
            self._on_newview(msg.src, p)

    # dissemination

    def _on_bundle(self, src: int, b: Bundle) -> None:
        if b.view < self.view:
            # keep relaying for the old tree so its subtree still learns decisions
            old = self.cfg.tree(b.view)
            if old.parent_of(self.pid) == src:
                for c in old.children_of(self.pid):
                    self.net.send(self.pid, c, b.size_bits, b, Kind.PROPOSAL)
            self._learn_decisions(b)
            return
        if b.view > self.view:
            vc = b.view_cert
            if vc is None or not col.has(vc, newview_value(b.view), self.cfg.quorum, self.keyring):
                return
            self._enter_view(b.view)
            self._progress()
        if self.tree.parent_of(self.pid) != src or self.root is not None:
            return
        if b.seq < self.expected_seq:
            return
        self.buffer[b.seq] = b
        while self.expected_seq in self.buffer:
            nxt = self.buffer.pop(self.expected_seq)
            self.expected_seq += 1
            self._process_bundle(nxt)

    def _learn_decisions(self, b: Bundle) -> None:
        """A process that already left ``b.view`` does not vote in it, but commit
        certificates are self-certifying, so it still extends its ledger."""
        for qc in b.decisions:
            if self._check_qc_cost(qc.cert) and qc.item in qc.cert.items:
                self._decide(qc)
        for cert in b.certs:
            if cert.view != b.view or not any(it.phase == Phase.COMMIT for it in cert.items):
                continue
            if self._check_qc_cost(cert):
                for it in cert.items:
                    if it.phase == Phase.COMMIT:
                        self._decide(QuorumCert(it, cert))

    def _process_bundle(self, b: Bundle) -> None:
        """Disseminate to children first, then validate, vote and aggregate."""
        self._progress()
        if self.trace_dissemination:
            key = (b.view, b.seq)
            self.stats.bundle_receipts[key] = self.stats.bundle_receipts.get(key, 0) + 1
        kids = self.tree.children_of(self.pid)
        for c in kids:
            self.net.send(self.pid, c, b.size_bits, b, Kind.PROPOSAL)
        vote = self._apply_bundle(b)
        if not b.items:
            return
        own = None
        if vote:
            self._cpu("sign", 1)
            own = col.new_share(self.pid, b.value, self.keyring, self.cfg.scheme)
        parent = self.tree.parent_of(self.pid)
        if not kids:
            if own is not None:
                self.net.send(self.pid, parent, self._wire_bits(own), VoteMsg(b.view, b.seq, own),
                              Kind.VOTE)
            return
        key = (b.view, b.seq)

        def done(got, own=own, key=key, view=b.view, seq=b.seq):
            self.gathers.pop(key, None)
            if self.view != view or self._crashed():
                return
            parts = [v for v in got.values() if v is not BOTTOM]
            self.stats.bottoms += len(got) - len(parts)
            if own is not None:
                parts.append(own)
            if not parts:
                return
            agg = col.combine_all(self.cfg.scheme, parts)
            self._cpu("aggregate", len(parts))
            self.net.send(self.pid, parent, self._wire_bits(agg), VoteMsg(view, seq, agg), Kind.VOTE)

        self.gathers[key] = self.net.gather(self.pid, kids, self.cfg.delta_us, done)

    def _on_vote(self, src: int, v: VoteMsg) -> None:
        if v.view != self.view:
            return
        if self.root is not None:
            self._root_on_vote(src, v)
            return
        g = self.gathers.get((v.view, v.seq))
        if g is None or g.done:
            return
        self._queue_verify(lambda: not g.done, self._offer_partial, (g, src, v.collection))

    def _offer_partial(self, g, src: int, c: Collection) -> None:
        if g.done:
            return
        if col.verify(c, self.keyring):
            g.offer(src, c)
        else:
            self.stats.invalid_partials += 1
            g.offer(src, BOTTOM)

    # aggregation at the root

    def _root_on_vote(self, src: int, v: VoteMsg) -> None:
        rs = self.root
        ob = rs.open.get(v.seq)
        if ob is None or ob["cert"] is not None:
            return
        self._queue_verify(lambda: self.root is rs and ob["cert"] is None,
                           self._root_fold, (rs, v.seq, v.collection))

    def _queue_verify(self, needed, then, args) -> None:
        """Partials wait on the serial clock; one still unneeded when its turn comes costs nothing."""
        self._vq.append((needed, then, args))
        if not self._vq_running:
            self._vq_running = True
            self.sim.schedule(self.net.idle_at(self.pid), self._drain_vq)

    def _drain_vq(self) -> None:
        idle = self.net.idle_at(self.pid)
        if idle > self.sim.now:
            self.sim.schedule(idle, self._drain_vq)
            return
        while self._vq:
            needed, then, args = self._vq.popleft()
            if not needed() or self._crashed():
                continue
            t = self._cpu("verify", args[-1].cardinality)
            self.sim.schedule(t, then, *args)
            self.sim.schedule(t, self._drain_vq)
            return
        self._vq_running = False

    def _root_fold(self, rs: _RootState, seq: int, c: Collection) -> None:
        if self.root is not rs or self._crashed():
            return
        ob = rs.open.get(seq)
        if ob is None or ob["cert"] is not None:
            return
        if not col.verify(c, self.keyring):
            self.stats.invalid_partials += 1
            return
        ob["acc"] = col.combine(ob["acc"], c)
        if col.support(ob["acc"], ob["value"], self.keyring) < self.cfg.quorum:
            return
        cert = Cert(rs.view, seq, ob["items"], ob["value"], ob["acc"], ob["blocks"])
        ob["cert"] = cert
        self.stats.certs_cardinality.append(cert.collection.cardinality)
        rs.ready[seq] = cert
        released = False
        while rs.order and rs.order[0] in rs.ready:
            s0 = rs.order.popleft()
            c0 = rs.ready.pop(s0)
            del rs.open[s0]
            rs.pending_certs.append(c0)
            self._record_cert(c0)
            released = True
        if released:
            self.stats.outstanding.append((self.sim.now, len(rs.order)))
            self._progress(certified=True)
            self._try_send()

    def _wake(self, rs: _RootState) -> None:
        if self.root is rs:
            rs.wake_at = None
            self._try_send()

    def _try_send(self) -> None:
        rs = self.root
        if rs is None or self._crashed():
            return
        idle = self.net.idle_at(self.pid)
        if idle > self.sim.now:
            if rs.wake_at is None or rs.wake_at > idle:
                rs.wake_at = idle
                self.sim.schedule(idle, self._wake, rs)
            return
        if len(rs.order) >= self.cfg.stretch:
            return
        items = []
        for cert in rs.pending_certs:
            for it in cert.items:
                if it.phase < Phase.COMMIT and it.height > len(self.ledger):
                    items.append(VoteItem(it.height, it.phase + 1, rs.view, it.block_id))
        # at most one block per bundle; re-proposals go first, in height order
        proposals = [rs.reproposals.pop(0)] if rs.reproposals else []
        undecided = len(rs.undecided) + len(proposals)
        if not proposals and not self._stopped() and undecided < self.cfg.max_inflight:
            rs.counter += 1
            parent_h = proposals[-1].block.height if proposals else rs.tip_height
            parent_id = proposals[-1].block.id if proposals else rs.tip_id
            bid = hashlib.blake2b(f"blk:{rs.view}:{self.pid}:{rs.counter}:{parent_h}".encode()
                                  + parent_id, digest_size=16).digest()
            blk = Block(bid, parent_id, parent_h + 1, rs.view, self.cfg.ops_per_block,
                        self.cfg.block_bits)
            proposals.append(Proposal(blk))
        if proposals:
            rs.tip_height = proposals[-1].block.height
            rs.tip_id = proposals[-1].block.id
        for p in proposals:
            items.append(VoteItem(p.block.height, Phase.PREPARE, rs.view, p.block.id))
            rs.undecided.add(p.block.height)
            self.stats.proposed_at.setdefault(p.block.id, self.sim.now)
            self.stats.proposed_view.setdefault(p.block.id, rs.view)
        if not items and not rs.pending_certs and not rs.pending_decisions:
            return
        items = tuple(sorted(items))
        seq = rs.seq
        rs.seq += 1
        value = vote_value(rs.view, seq, items) if items else None
        certs = tuple(rs.pending_certs)
        decisions = tuple(rs.pending_decisions)
        rs.pending_certs = []
        rs.pending_decisions = []
        size = sum(p.block.size_bits for p in proposals)
        size += sum(self._wire_bits(c.collection) for c in certs)
        size += sum(self._wire_bits(q.cert.collection) + DECISION_HEADER_BITS for q in decisions)
        size += sum(self._wire_bits(p.justify.cert.collection) for p in proposals if p.justify)
        if rs.view_cert is not None:
            size += self._wire_bits(rs.view_cert)
        bundle = Bundle(rs.view, seq, tuple(proposals), certs, decisions, items, value,
                        rs.view_cert, size)
        for c in self.tree.children_of(self.pid):
            self.net.send(self.pid, c, size, bundle, Kind.PROPOSAL)
        # the root's own bundles count as progress, like receipts elsewhere
        self._progress()
        for p in proposals:
            self.blocks[p.block.id] = p.block
            self.accepted[p.block.height] = (p.block.id, rs.view)
        if items:
            self._cpu("sign", 1)
            own = col.new_share(self.pid, value, self.keyring, self.cfg.scheme)
            blocks = {p.block.id: p.block for p in proposals}
            for c in certs:
                blocks.update({k: v for k, v in c.blocks.items()
                               if any(it.block_id == k for it in items)})
            rs.open[seq] = {"items": items, "value": value, "acc": own, "cert": None,
                            "blocks": blocks}
            rs.order.append(seq)
            self.stats.outstanding.append((self.sim.now, len(rs.order)))
        inflight = len(rs.undecided)
        self.stats.max_inflight_seen = max(self.stats.max_inflight_seen, inflight)
        self.stats.inflight.append((self.sim.now, inflight))
        self._try_send()

    # view change

    def _on_newview(self, src: int, m: NewViewMsg) -> None:
        if m.view < self.view or (m.view == self.view and self.root is not None):
            return
        if self.cfg.tree(m.view).root != self.pid:
            return
        if src != self.pid:
            self._cpu("verify", 1)
        if not col.has(m.share, newview_value(m.view), 1, self.keyring):
            return
        pool = self.nv_pool.setdefault(m.view, {})
        pool[src] = m
        if len(pool) < self.cfg.quorum:
            return
        shares = col.combine_all(self.cfg.scheme, [x.share for x in pool.values()])
        if not col.has(shares, newview_value(m.view), self.cfg.quorum, self.keyring):
            return
        reports = [x.report for x in pool.values()]
        for v in [v for v in self.nv_pool if v <= m.view]:
            del self.nv_pool[v]
        if self.view < m.view:
            self._enter_view(m.view)
        self._start_view(m.view, shares, reports)

    def _start_view(self, view: int, view_cert: Collection, reports: list[Report]) -> None:
        self._progress()
        self.stats.views_started.setdefault(view, self.sim.now)
        for rep in reports:
            for qc in rep.decided:
                if qc.height not in self.decided_ids and self._check_qc_cost(qc.cert):
                    self._decide(qc)
        l_max = max([r.ledger_len for r in reports] + [len(self.ledger)])
        l_min = min(r.ledger_len for r in reports)
        sync = [self.commit_qcs[h] for h in range(l_min + 1, l_max + 1) if h in self.commit_qcs]
        best: dict[int, QuorumCert] = {}
        for rep in reports:
            for qc in rep.locks:
                if qc.height <= l_max:
                    continue
                cur = best.get(qc.height)
                if cur is None or qc.view > cur.view:
                    best[qc.height] = qc
        tip_h = l_max
        tip_id = GENESIS_ID if l_max == 0 else self.decided_ids.get(l_max)
        rs = _RootState(view, tip_h, tip_id)
        h = l_max + 1
        while h in best and tip_id is not None:
            qc = best[h]
            blk = qc.block
            if blk is None or blk.parent_id != tip_id or not self._check_qc_cost(qc.cert):
                break
            rs.reproposals.append(Proposal(blk, qc))
            tip_id = blk.id
            h += 1
        if tip_id is None:
            # cannot extend an unknown decided block; wait for the next view
            return
        rs.pending_decisions = sync
        rs.view_cert = view_cert
        self.root = rs
        self._try_send()


class Cluster:
    """All replicas of one run, wired to a shared network."""

    def __init__(self, cfg: ProtocolConfig, net: Network, keyring: Keyring,
                 trace_dissemination: bool = False):
        self.cfg = cfg
        self.net = net
        self.sim = net.sim
        self.keyring = keyring
        self.stats = Stats()
        self.replicas = [Replica(p, cfg, net, keyring, self.stats, trace_dissemination)
                         for p in range(cfg.n)]

    def start(self) -> None:
        for r in self.replicas:
            r.start()

    def run(self, until_us: int) -> None:
        self.sim.run(until_us)

    def correct(self) -> list[int]:
        bad = set(self.net.faulty_ever())
        return [p for p in range(self.cfg.n) if p not in bad]

    def check_agreement(self) -> None:
        """Every pair of ledgers agrees on their common prefix."""
        ledgers = [r.ledger for r in self.replicas]
        longest = max(ledgers, key=len)
        for p, led in enumerate(ledgers):
            if led != longest[:len(led)]:
                raise AgreementViolation(f"ledger of process {p} diverges from the longest ledger")
