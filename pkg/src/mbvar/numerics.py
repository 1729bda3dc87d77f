"""Compensated summation helpers.

Scalar reductions go through :func:`math.fsum`, which returns the correctly
rounded sum. Bucketwise sums across securities use a vectorised
Neumaier accumulation so that the order of securities is fixed and the
rounding error does not grow with the number of securities.
:func:`exact_sum` and :func:`exact_dot` return exact rationals for formulas
that cancel catastrophically in floating point.
"""

import math
from fractions import Fraction

import numpy as np


def total(x):
    """Correctly rounded sum of a 1-D sequence."""
    return math.fsum(np.asarray(x, dtype=float).ravel())


def mean(x):
    """Mean with one refinement pass; exact for constant arrays."""
    x = np.asarray(x, dtype=float)
    m = math.fsum(x) / x.size
    return m + math.fsum(x - m) / x.size


def exact_sum(x) -> Fraction:
    """Exact sum of floats, peeled off as successive correctly rounded remainders."""
    terms = [float(v) for v in np.asarray(x, dtype=float).ravel()]
    acc = Fraction(0)
    head = math.fsum(terms)
    while head != 0.0:
        if not math.isfinite(head):
            raise OverflowError("non-finite sum")
        acc += Fraction(head)
        terms.append(-head)
        head = math.fsum(terms)
    return acc


_SPLITTER = 134217729.0  # 2**27 + 1


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_product(a, b):
    """Elementwise a*b as an unevaluated sum p + e, exact barring over/underflow."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def exact_dot(x, y) -> Fraction:
    """Exact sum_i x_i * y_i."""
    p, e = two_product(x, y)
    return exact_sum(np.concatenate([p, e]))


def central_moment2(x, y=None):
    """Biased (1/N) covariance of ``x`` and ``y`` (variance when ``y`` is None).

    Two-pass: deviations are taken from compensated means, which avoids the
    cancellation of the ``E[x^2] - E[x]^2`` form.
    """
    x = np.asarray(x, dtype=float)
    dx = x - mean(x)
    if y is None:
        return math.fsum(dx * dx) / x.size
    y = np.asarray(y, dtype=float)
    return math.fsum(dx * (y - mean(y))) / x.size


def rowwise_sum(rows):
    """Elementwise compensated sum of equally shaped arrays, in the given order."""
    rows = [np.asarray(r, dtype=float) for r in rows]
    s = np.zeros_like(rows[0])
    c = np.zeros_like(rows[0])
    for x in rows:
        t = s + x
        big = np.abs(s) >= np.abs(x)
        c += np.where(big, (s - t) + x, (x - t) + s)
        s = t
    return s + c


def relative_difference(a, b, floor=0.0):
    """|a - b| / max(|a|, |b|, floor); zero when both are zero."""
    scale = max(abs(a), abs(b), floor)
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale


def frozen(x):
    """Read-only float copy of ``x``."""
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr
