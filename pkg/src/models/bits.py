"""Bitstrings are plain ``str`` of '0'/'1'; these helpers keep lengths honest."""
import numpy as np

from src.models.errors import LengthMismatch


def check_bits(bits: str, n: int, what: str = "bitstring") -> str:
    if len(bits) != n or any(c not in "01" for c in bits):
        raise LengthMismatch(f"{what} must have exactly {n} bits, got {len(bits)}")
    return bits


def xor_bits(a: str, b: str) -> str:
    if len(a) != len(b):
        raise LengthMismatch(f"cannot xor {len(a)}-bit and {len(b)}-bit strings")
    if not a:
        return ""
    return format(int(a, 2) ^ int(b, 2), f"0{len(a)}b")


def bytes_to_bits(data: bytes, n: int) -> str:
    """First ``n`` bits of ``data``, most significant bit first."""
    if len(data) * 8 < n:
        raise LengthMismatch(f"need {n} bits, only {len(data) * 8} available")
    if n == 0:
        return ""
    return format(int.from_bytes(data, "big"), f"0{len(data) * 8}b")[:n]


def bits_to_hex(bits: str) -> str:
    if not bits:
        return ""
    width = (len(bits) + 3) // 4
    return format(int(bits, 2), f"0{width}x")


def random_bits(rng: np.random.Generator, n: int) -> str:
    if n == 0:
        return ""
    return "".join("1" if b else "0" for b in rng.integers(0, 2, size=n))
