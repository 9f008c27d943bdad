"""Single-step Poisson-binomial operations on truncated rank vectors.

A rank vector ``v`` of length k holds ``v[i]`` = probability that exactly
``i`` of a set of independent objects are closer to the query than the
current instance. Adding one object that is closer with probability ``p``
is a convolution with the Bernoulli ``[1-p, p]`` (:func:`dynamic_round`);
removing one is the inverse deconvolution (:func:`adjust_probs`).
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np

from .dataset import MASS_SLACK  # completed objects this close to mass 1 count as certain

DEGENERATE_EPS = 1e-12

# Forward deconvolution amplifies rounding error by (p/(1-p))**i at index i,
# the reverse solve by ((1-p)/p)**-i.  Budget: 53 bits of double precision.
CONDITION_BUDGET = 53 * math.log(2.0)


# Relative shrink applied to the mean in the tail envelope, covering drift in
# its running sum.
ENVELOPE_SLACK = 1e-9
# upper-tail entries at or below this are treated as zero by the inverse step
TAIL_FLUSH = 1e-40
# a clamped entry below -REFRESH_TOL, or a zero-top inverse whose residual
# exceeds it, means rounding noise has grown past the smallest true entries;
# the incremental state is then rebuilt exactly
REFRESH_TOL = 1e-13
# Givens coefficients of the least-squares inverse are treated as constant once
# they move by less than this (relative)
ROTATION_EPS = 1e-17


class DegenerateDivisor(ArithmeticError):
    """``1 - p`` is too close to zero to remove the object by division."""


def dynamic_round(old: np.ndarray, p_closer: float) -> np.ndarray:
    """Fold one more object, closer with probability ``p_closer``, into ``old``.

    Mass pushed past the last index is dropped (truncation at depth k).
    """
    if not 0.0 <= p_closer <= 1.0:
        raise ValueError(f"p_closer must be in [0, 1], got {p_closer}")
    old = np.asarray(old, dtype=np.float64)
    new = old * (1.0 - p_closer)
    new[1:] += old[:-1] * p_closer
    return new


def adjust_probs(cur: np.ndarray, p_closer: float, method: str = "auto") -> np.ndarray:
    """Remove one object's Bernoulli factor from ``cur``; inverse of :func:`dynamic_round`.

    ``method="forward"`` is the bottom-up solve
    ``out[0] = cur[0]/(1-p)``, ``out[i] = (cur[i] - out[i-1] p)/(1-p)``. It
    multiplies rounding error by ``p/(1-p)`` per index, so for ``p > 1/2``
    ``"auto"`` switches to the top-down solve of the same equations seeded
    with a zero last entry (:func:`adjust_probs_reverse` with ``top=0``).
    That seed is exact whenever the round trip is lossless, i.e. the
    original vector ended in 0.
    """
    if not 0.0 <= p_closer <= 1.0:
        raise ValueError(f"p_closer must be in [0, 1], got {p_closer}")
    q = 1.0 - p_closer
    if q < DEGENERATE_EPS:
        raise DegenerateDivisor(f"1 - p_closer = {q:.3g}")
    if method == "auto":
        method = "reverse" if p_closer > 0.5 else "forward"
    if method == "reverse":
        return adjust_probs_reverse(cur, p_closer, top=0.0)
    if method != "forward":
        raise ValueError(f"unknown method {method!r}")
    cur = np.asarray(cur, dtype=np.float64)
    out = np.empty_like(cur)
    prev = 0.0
    for i in range(len(cur)):
        prev = (cur[i] - prev * p_closer) / q
        out[i] = prev
    return out


def adjust_probs_reverse(cur: np.ndarray, p_closer: float, top: float | None = None) -> np.ndarray:
    """Remove one object's Bernoulli factor solving top-down.

    ``out[i-1] = (cur[i] - (1-p) out[i]) / p``, seeded with ``out[-1] = top``
    (default ``cur[-1]``). Errors in the seed shrink by ``(1-p)/p`` per index,
    so on a vector carrying a guard band above the first k entries this is
    the stable counterpart of :func:`adjust_probs` for ``p_closer > 0.5``.
    Exact whenever the true support ends below the last index.
    """
    if not 0.0 < p_closer <= 1.0:
        raise ValueError(f"p_closer must be in (0, 1], got {p_closer}")
    cur = np.asarray(cur, dtype=np.float64)
    out = np.empty_like(cur)
    if len(cur) == 0:
        return out
    q = 1.0 - p_closer
    nxt = cur[-1] if top is None else float(top)
    out[-1] = nxt
    for i in range(len(cur) - 1, 0, -1):
        nxt = (cur[i] - q * nxt) / p_closer
        out[i - 1] = nxt
    return out


def prefers_reverse(p_closer: float, length: int, exact_top: bool = False) -> bool:
    """True when the top-down solve is better conditioned than bottom-up.

    ``exact_top`` means the entry seeding the top-down solve is known to be
    exactly zero (the vector is not truncated), which makes that direction
    accurate for every ``p_closer > 0.5``. Otherwise the seed is a guess and
    the choice balances ``r**length`` growth bottom-up against decay of the
    seed error, ``r = p/(1-p)``, across a vector of ``length`` entries.
    """
    if p_closer <= 0.5:
        return False
    if p_closer >= 1.0 or exact_top:
        return True
    return math.log(p_closer / (1.0 - p_closer)) * length > CONDITION_BUDGET


def poisson_binomial(probs: Iterable[float], k: int) -> np.ndarray:
    """Truncated pmf of the number of successes among independent Bernoullis."""
    v = np.zeros(k)
    v[0] = 1.0
    for p in probs:
        v = dynamic_round(v, p)
    return v


def full_dp_recompute(aol: Mapping[int, float] | "object", exclude: int | None, k: int) -> np.ndarray:
    """Evaluate the recursion from scratch over every AOL object but ``exclude``.

    ``aol`` is an :class:`~psrank.engine.ActiveObjectList` or a plain
    ``{object_id: seen_mass}`` mapping. O(k * |AOL|).
    """
    masses = aol.masses() if hasattr(aol, "masses") else aol
    return poisson_binomial((m for o, m in masses.items() if o != exclude), k)
