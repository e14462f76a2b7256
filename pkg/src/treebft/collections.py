"""Cryptographic collections: secure sets of ``(signer, value)`` votes.

Real signatures are replaced by a keyed BLAKE2b digest. Two schemes share one
data type:

* ``NAIVE`` keeps every share and its tag on the wire (secp256k1-like sizes).
* ``AGGREGATE`` additionally carries a constant-size combined tag, the XOR
  fold of every member tag (BLS-like sizes).

The combined tag is folded over the *deduplicated* share set, so ``combine``
is commutative, associative and idempotent.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from treebft.errors import KeyNotFound, SchemeMismatch

TAG_BYTES = 32


class Scheme(str, Enum):
    NAIVE = "naive"
    AGGREGATE = "aggregate"


@dataclass(frozen=True)
class CryptoCostModel:
    """CPU cost (microseconds) and wire size (bytes) of the signature scheme."""

    sign_us: float = 50.0
    verify_us: float = 100.0
    aggregate_per_element_us: float = 0.0
    share_wire_bytes: int = 64
    aggregate_wire_bytes: int = 96

    def __post_init__(self):
        for name in ("sign_us", "verify_us", "aggregate_per_element_us",
                     "share_wire_bytes", "aggregate_wire_bytes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


# secp256k1-like and bls-like defaults; bls verification is ~30x slower.
SECP_COSTS = CryptoCostModel(sign_us=50.0, verify_us=100.0, aggregate_per_element_us=0.0)
BLS_COSTS = CryptoCostModel(sign_us=1000.0, verify_us=3000.0, aggregate_per_element_us=50.0)


def default_costs(scheme: Scheme) -> CryptoCostModel:
    return BLS_COSTS if Scheme(scheme) is Scheme.AGGREGATE else SECP_COSTS


@dataclass(frozen=True, order=True)
class Share:
    signer: int
    value: bytes
    tag: bytes


class Keyring:
    """Per-process secret seeds. Keys never change during a run."""

    def __init__(self, keys: dict[int, bytes]):
        self._keys = dict(keys)
        self._checked: dict[Share, bool] = {}
        self._tags: dict[tuple[int, bytes], bytes] = {}

    @classmethod
    def generate(cls, n: int, seed: int = 0) -> "Keyring":
        keys = {
            pid: hashlib.blake2b(f"key:{seed}:{pid}".encode(), digest_size=32).digest()
            for pid in range(n)
        }
        return cls(keys)

    def __contains__(self, pid: int) -> bool:
        return pid in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def key(self, pid: int) -> bytes:
        try:
            return self._keys[pid]
        except KeyError:
            raise KeyNotFound(f"no key for process {pid}") from None

    def tag(self, signer: int, value: bytes) -> bytes:
        k = (signer, value)
        t = self._tags.get(k)
        if t is None:
            t = hashlib.blake2b(value, key=self.key(signer), digest_size=TAG_BYTES).digest()
            self._tags[k] = t
        return t

    def check(self, share: Share) -> bool:
        ok = self._checked.get(share)
        if ok is None:
            ok = share.signer in self._keys and self.tag(share.signer, share.value) == share.tag
            self._checked[share] = ok
        return ok


def _fold(tags: Iterable[bytes]) -> bytes:
    acc = 0
    for t in tags:
        acc ^= int.from_bytes(t, "big")
    return acc.to_bytes(TAG_BYTES, "big")


def _dedup(shares: Iterable[Share]) -> frozenset[Share]:
    # One share per (signer, value). On a tag conflict the smaller tag wins,
    # which keeps the choice independent of combine order.
    best: dict[tuple[int, bytes], Share] = {}
    for s in shares:
        k = (s.signer, s.value)
        cur = best.get(k)
        if cur is None or s.tag < cur.tag:
            best[k] = s
    return frozenset(best.values())


@dataclass(frozen=True, eq=False)
class Collection:
    scheme: Scheme
    shares: frozenset = frozenset()
    aggregate_tag: bytes | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "shares", _dedup(self.shares))
        if self.scheme is Scheme.AGGREGATE:
            if self.aggregate_tag is None:
                object.__setattr__(self, "aggregate_tag", _fold(s.tag for s in self.shares))
        else:
            object.__setattr__(self, "aggregate_tag", None)

    def __eq__(self, other):
        if not isinstance(other, Collection):
            return NotImplemented
        return (self.scheme is other.scheme and self.shares == other.shares
                and self.aggregate_tag == other.aggregate_tag)

    def __hash__(self):
        return hash((self.scheme, self.shares, self.aggregate_tag))

    def __len__(self):
        return len(self.shares)

    @property
    def cardinality(self) -> int:
        return len(self.shares)

    def values(self) -> list[bytes]:
        return sorted({s.value for s in self.shares})

    def signers(self) -> list[int]:
        return sorted({s.signer for s in self.shares})


def empty(scheme: Scheme) -> Collection:
    return Collection(scheme)


def new_share(signer: int, value: bytes, keyring: Keyring, scheme: Scheme = Scheme.AGGREGATE) -> Collection:
    tag = keyring.tag(signer, value)
    return Collection(scheme, frozenset([Share(signer, value, tag)]))


def combine(c1: Collection, c2: Collection) -> Collection:
    if c1.scheme is not c2.scheme:
        raise SchemeMismatch(f"cannot combine {c1.scheme.value} with {c2.scheme.value}")
    return Collection(c1.scheme, c1.shares | c2.shares)


def combine_all(scheme: Scheme, parts: Iterable[Collection]) -> Collection:
    pool: list[Share] = []
    for p in parts:
        if p.scheme is not Scheme(scheme):
            raise SchemeMismatch(f"cannot combine {p.scheme.value} with {Scheme(scheme).value}")
        pool.extend(p.shares)
    return Collection(scheme, frozenset(pool))


def verify(c: Collection, keyring: Keyring) -> bool:
    """Every share tag (naive) or the combined tag (aggregate) recomputes."""
    key = ("verify", id(keyring))
    ok = c._cache.get(key)
    if ok is not None:
        return ok
    if c.scheme is Scheme.AGGREGATE:
        try:
            expected = _fold(keyring.tag(s.signer, s.value) for s in c.shares)
        except KeyNotFound:
            ok = False
        else:
            ok = expected == c.aggregate_tag
    else:
        ok = all(keyring.check(s) for s in c.shares)
    c._cache[key] = ok
    return ok


def support(c: Collection, value: bytes, keyring: Keyring) -> int:
    """Distinct signers of ``value`` whose contribution verifies.

    An aggregate whose combined tag fails verification counts for nothing,
    since its members cannot be checked individually.
    """
    key = ("support", id(keyring), value)
    n = c._cache.get(key)
    if n is not None:
        return n
    if c.scheme is Scheme.AGGREGATE and not verify(c, keyring):
        n = 0
    else:
        n = len({s.signer for s in c.shares if s.value == value and keyring.check(s)})
    c._cache[key] = n
    return n


def has(c: Collection, value: bytes, t: int, keyring: Keyring) -> bool:
    if t < 0:
        raise ValueError("threshold must be >= 0")
    if t == 0:
        return True
    return support(c, value, keyring) >= t


def wire_size(c: Collection, model: CryptoCostModel | None = None) -> int:
    """Bytes on the wire: linear in cardinality for naive, constant for aggregate."""
    model = model or default_costs(c.scheme)
    if c.scheme is Scheme.AGGREGATE:
        return model.aggregate_wire_bytes
    return len(c.shares) * model.share_wire_bytes


def cpu_cost(op_kind: str, element_count: int, model: CryptoCostModel,
             scheme: Scheme = Scheme.NAIVE) -> float:
    """Deterministic CPU time in microseconds.

    ``op_kind`` is one of ``sign``, ``verify`` or ``aggregate``.
    """
    if element_count < 0:
        raise ValueError("element_count must be >= 0")
    scheme = Scheme(scheme)
    if element_count == 0:
        return 0.0
    if op_kind == "sign":
        return element_count * model.sign_us
    if op_kind == "verify":
        if scheme is Scheme.AGGREGATE:
            return model.verify_us + element_count * model.aggregate_per_element_us
        return element_count * model.verify_us
    if op_kind == "aggregate":
        if scheme is Scheme.AGGREGATE:
            return element_count * model.aggregate_per_element_us
        return 0.0
    raise ValueError(f"unknown op kind {op_kind!r}")


def forge(c: Collection, signer: int, value: bytes, rng: random.Random | None = None) -> Collection:
    """Add a share for ``signer`` with a random (invalid) tag. Test adversary."""
    rng = rng or random.Random(0)
    bogus = Share(signer, value, rng.getrandbits(8 * TAG_BYTES).to_bytes(TAG_BYTES, "big"))
    return Collection(c.scheme, c.shares | {bogus})


def tamper(c: Collection, signer: int) -> Collection:
    """Flip one byte of ``signer``'s tag(s). Test adversary."""
    out = []
    for s in c.shares:
        if s.signer == signer:
            s = Share(s.signer, s.value, bytes([s.tag[0] ^ 0xFF]) + s.tag[1:])
        out.append(s)
    return Collection(c.scheme, frozenset(out))
