"""Numerical helpers: compensated accumulation and special functions."""
import math

import numpy as np
from scipy import special


class CompensatedSum:
    """Neumaier-compensated running sum.

    Keeps a running total together with the low-order bits lost at every
    addition, so long accumulations across chunks stay exact to a few ulps.
    """

    __slots__ = ('total', 'compensation')

    def __init__(self, initial=0.0):
        self.total = float(initial)
        self.compensation = 0.0

    def add(self, value):
        value = float(value)
        t = self.total + value
        if not math.isfinite(t):
            self.total, self.compensation = t, 0.0
            return self
        if abs(self.total) >= abs(value):
            self.compensation += (self.total - t) + value
        else:
            self.compensation += (value - t) + self.total
        self.total = t
        return self

    def add_array(self, values):
        # fsum is exactly rounded within the chunk
        try:
            partial = math.fsum(np.asarray(values, dtype=float).ravel())
        except OverflowError:
            partial = math.inf
        return self.add(partial)

    @property
    def value(self):
        return self.total + self.compensation

    def __float__(self):
        return self.value

    def __repr__(self):
        return f'<CompensatedSum {self.value!r}>'


def log_gamma(x):
    """ln Γ(x) for real x > 0."""
    return special.gammaln(x)


def log_factorial(n):
    return special.gammaln(np.asarray(n, dtype=float) + 1.0)


def complex_gamma(z):
    """Γ(z) for complex arguments, elementwise."""
    return special.gamma(np.asarray(z, dtype=complex))


def log_sinh(x):
    """ln sinh(x) for x > 0 without overflow."""
    x = np.asarray(x, dtype=float)
    return x + np.log1p(-np.exp(-2.0 * x)) - math.log(2.0)


def open_uniform(generator, size):
    """Uniform draws on the open interval (0, 1).

    Samples a 52-bit integer grid and centres each cell, so neither 0 nor 1
    can occur and tan/log inverse CDFs stay finite.
    """
    grid = generator.integers(0, 2**52, size=size, dtype=np.int64)
    return (grid.astype(float) + 0.5) / float(2**52)
