"""Closed-form entropy and success-probability bounds.

Everything here is a pure function over floats (or Fractions for frequencies);
the only state is the module logger.
"""
import itertools
import logging
import math
from fractions import Fraction
from typing import Callable, Dict, Hashable, Iterable, Optional, Sequence, Union

import numpy as np

from src.models.entropy import EATParams, FrequencyRegion, MinTradeoff, SuccessBounds
from src.models.errors import DomainError, EmptyAcceptanceSet, EmptyString

logger = logging.getLogger(__name__)

MAX_ENUMERATION = 2 ** 20
INFINITE_ENTROPY_CAP = 1e6

Acceptance = Union[Callable[[tuple], bool], FrequencyRegion]


def freq(outcomes: Sequence[Hashable], alphabet: Optional[Iterable[Hashable]] = None) -> Dict[Hashable, Fraction]:
    """Empirical distribution with exact rational entries."""
    outcomes = list(outcomes)
    if not outcomes:
        raise EmptyString("freq needs at least one outcome")
    symbols = list(alphabet) if alphabet is not None else sorted(set(outcomes), key=str)
    counts = {x: 0 for x in symbols}
    for x in outcomes:
        if x not in counts:
            raise DomainError(f"symbol {x!r} is not in the alphabet")
        counts[x] += 1
    n = len(outcomes)
    return {x: Fraction(c, n) for x, c in counts.items()}


def h_rate(f: MinTradeoff, accepted: Acceptance, n: int) -> float:
    """min f(freq(x_1^n)) over accepted strings, or over the vertices of a frequency region."""
    if isinstance(accepted, FrequencyRegion):
        if not accepted.vertices:
            raise EmptyAcceptanceSet("the frequency region has no vertices")
        return min(f.evaluate(q) for q in accepted.vertices)
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if len(f.alphabet) ** n > MAX_ENUMERATION:
        raise DomainError(f"{len(f.alphabet)}^{n} strings is too many to enumerate; pass a FrequencyRegion")
    # f depends on the string only through its frequency vector
    best = None
    seen = {}
    for string in itertools.product(f.alphabet, repeat=n):
        if not accepted(string):
            continue
        q = freq(string, f.alphabet)
        key = tuple(q[x] for x in f.alphabet)
        if key not in seen:
            seen[key] = f.evaluate(q)
            best = seen[key] if best is None else min(best, seen[key])
    if best is None:
        raise EmptyAcceptanceSet(f"no string of length {n} is accepted")
    return best


def eat_bound(p: EATParams) -> float:
    """n*h - c1*sqrt(n) - c0; may be negative."""
    return p.n * p.h - p.c1 * math.sqrt(p.n) - p.c0


def g_correction(eps: float) -> float:
    """-log2(1 - sqrt(1 - eps^2)), evaluated as -log2(eps^2 / (1 + sqrt(1 - eps^2)))."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    return -(2.0 * math.log2(eps) - math.log2(1.0 + math.sqrt(1.0 - eps * eps)))


def minentropy_from_smooth(h_smooth: float, eps: float) -> float:
    """-log2(eps + 2^-H)."""
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    if math.isnan(h_smooth) or h_smooth < 0.0:
        raise DomainError(f"smooth min-entropy must be non-negative, got {h_smooth}")
    h = min(h_smooth, INFINITE_ENTROPY_CAP)
    if eps == 0.0:
        return float(h)
    return float(-np.logaddexp2(math.log2(eps), -h))


def success_bounds(p_test: Optional[float] = None, hmin: Optional[float] = None,
                   p_block: Optional[float] = None, alpha: Optional[float] = None,
                   m: Optional[int] = None) -> SuccessBounds:
    """single = min(p_test, 2^-Hmin); repeated = (e*p_block/alpha)^floor(alpha*m), clamped to [0, 1]."""
    single = repeated = raw = exponent = None
    if p_test is not None or hmin is not None:
        if p_test is None or hmin is None:
            raise DomainError("the single-round bound needs both p_test and hmin")
        if not 0.0 <= p_test <= 1.0 or hmin < 0.0:
            raise DomainError(f"need p_test in [0, 1] and hmin >= 0, got {p_test}, {hmin}")
        single = min(p_test, 2.0 ** -hmin)
    if p_block is not None or alpha is not None or m is not None:
        if p_block is None or alpha is None or m is None:
            raise DomainError("the repeated bound needs p_block, alpha and m")
        if not 0.0 <= p_block <= 1.0 or not 0.0 < alpha <= 1.0 or m < 1:
            raise DomainError(f"need p_block in [0, 1], alpha in (0, 1], m >= 1; got {p_block}, {alpha}, {m}")
        exponent = math.floor(Fraction(repr(alpha)) * m)
        raw = (math.e * p_block / alpha) ** exponent
        repeated = min(1.0, max(0.0, raw))
        if raw > 1.0:
            logger.debug(f"repeated bound is vacuous (raw {raw:.4g})")
    return SuccessBounds(single=single, repeated=repeated, repeated_raw=raw, exponent=exponent)


def xhog_entropy(n: int, delta: float, eta: float, c_log: float) -> float:
    """(1 - eta)*delta*n - c_log*log2(n); c_log is the caller's choice of the O(log n) constant."""
    if n < 1 or delta <= 0.0 or not 0.0 < eta <= 1.0 or c_log < 0.0:
        raise DomainError(f"need n >= 1, delta > 0, eta in (0, 1], c_log >= 0; got {n}, {delta}, {eta}, {c_log}")
    return (1.0 - eta) * delta * n - c_log * math.log2(n)


def certified_min_entropy(p: EATParams) -> float:
    """Plain min-entropy implied by the EAT bound after removing the smoothing."""
    return minentropy_from_smooth(max(0.0, eat_bound(p)), p.eps)


def bound_report(eat: Optional[EATParams] = None, g_eps: Optional[float] = None,
                 smooth: Optional[tuple] = None, success: Optional[dict] = None,
                 xhog: Optional[dict] = None) -> dict:
    """Evaluate every requested calculator into one JSON-ready dict."""
    report: dict = {}
    if eat is not None:
        report["eat"] = {**eat.model_dump(), "eat_bound": eat_bound(eat),
                         "certified_min_entropy": certified_min_entropy(eat)}
    if g_eps is not None:
        report["g_correction"] = {"eps": g_eps, "value": g_correction(g_eps)}
    if smooth is not None:
        h_smooth, eps = smooth
        report["minentropy_from_smooth"] = {"h_smooth": h_smooth, "eps": eps,
                                            "value": minentropy_from_smooth(h_smooth, eps)}
    if success is not None:
        bounds = success_bounds(**success)
        report["success_bounds"] = {**success, **bounds.model_dump(), "vacuous": bounds.vacuous}
    if xhog is not None:
        report["xhog_entropy"] = {**xhog, "value": xhog_entropy(**xhog)}
    return report
