import hashlib
import logging
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.models.bits import bytes_to_bits, check_bits, xor_bits
from src.models.errors import LengthMismatch, UnknownParty
from src.models.oracle import OracleParams, QueryRecord

logger = logging.getLogger(__name__)

_DIGEST_BITS = 512


def _expand(material: bytes, nbits: int) -> bytes:
    """Counter-mode SHA-512 expansion of ``material`` to at least ``nbits`` bits."""
    blocks = []
    for counter in range((nbits + _DIGEST_BITS - 1) // _DIGEST_BITS or 1):
        blocks.append(hashlib.sha512(material + counter.to_bytes(4, "big")).digest())
    return b"".join(blocks)


def _frame(*parts) -> bytes:
    out = bytearray()
    for part in parts:
        data = part if isinstance(part, bytes) else str(part).encode("utf-8")
        out += len(data).to_bytes(4, "big") + data
    return bytes(out)


def derive_bits(secret: bytes, label: str, *parts, nbits: int) -> str:
    """Disjoint PRF domains over one secret: (label, parts) never collide across labels."""
    return bytes_to_bits(_expand(_frame(secret, label, *parts), nbits), nbits)


def derive_bytes(secret: bytes, label: str, *parts, nbytes: int) -> bytes:
    return _expand(_frame(secret, label, *parts), nbytes * 8)[:nbytes]


def derive_seed(secret: bytes, label: str, *parts) -> int:
    """64-bit integer seed for numpy generators."""
    return int.from_bytes(derive_bytes(secret, label, *parts, nbytes=8), "big")


class RandomOracle:
    """Shared G_k with per-party query logging.

    The event loop is the only writer; nothing here is thread-safe.
    """

    def __init__(self, params: OracleParams, key: bytes):
        if len(key) != params.key_bytes:
            raise LengthMismatch(f"oracle key must have {params.key_bytes} bytes, got {len(key)}")
        self.params = params
        self.key = key
        self._seed = bytes.fromhex(params.seed)
        self._table: Dict[str, str] = {}
        self._log: Dict[str, List[QueryRecord]] = defaultdict(list)
        self._registered: set = set()
        if params.mode == "lazy":
            self._lazy_rng = np.random.default_rng(derive_seed(self._seed, "lazy", key))

    def register(self, party: str) -> None:
        self._registered.add(party)

    def _evaluate(self, z: str) -> str:
        cached = self._table.get(z)
        if cached is not None:
            return cached
        if self.params.mode == "lazy":
            out = "".join("1" if b else "0" for b in self._lazy_rng.integers(0, 2, size=self.params.n))
        else:
            out = derive_bits(self._seed, "G", self.key, z, nbits=self.params.n)
        self._table[z] = out
        return out

    def query(self, party: str, z: str, time: float = 0.0) -> str:
        """G_k(z), logged under ``party`` at simulation ``time``."""
        check_bits(z, self.params.m, "oracle input")
        self._registered.add(party)
        self._log[party].append(QueryRecord(z=z, time=time))
        logger.debug(f"oracle query by {party} at t={time}")
        return self._evaluate(z)

    def otp_encode(self, z: str, ch: str, party: Optional[str] = None, time: float = 0.0) -> str:
        """s = G_k(z) xor ch. Logged only when a party is named."""
        check_bits(ch, self.params.n, "challenge")
        pad = self.query(party, z, time) if party else self._evaluate(check_bits(z, self.params.m, "oracle input"))
        return xor_bits(pad, ch)

    def otp_decode(self, z: str, s: str, party: Optional[str] = None, time: float = 0.0) -> str:
        # xor is an involution, decoding is encoding
        return self.otp_encode(z, s, party=party, time=time)

    def query_log(self, party: str) -> List[Tuple[str, float]]:
        if party not in self._registered:
            raise UnknownParty(f"party {party!r} is not registered with the oracle")
        records = sorted(self._log.get(party, []), key=lambda r: r.time)
        return [(r.z, r.time) for r in records]
