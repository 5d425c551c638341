"""Scalar-allocation accounting for the low-memory code paths.

The memory-lean algorithms route their numeric work buffers through
:func:`alloc`.  Inside a :class:`ScalarCounter` context, every such buffer
is added to a live-scalar total on creation and subtracted when it is
garbage collected, giving a peak count that audits the stated memory
budgets without the noise of process-level RSS.
"""

import weakref

import numpy as np

_stack = []


class ScalarCounter:
    """Context manager tracking live and peak scalars of tracked buffers."""

    def __init__(self):
        self.live = 0
        self.peak = 0

    def __enter__(self):
        _stack.append(self)
        return self

    def __exit__(self, *exc):
        _stack.remove(self)
        return False

    def _add(self, k):
        self.live += k
        if self.live > self.peak:
            self.peak = self.live

    def _sub(self, k):
        self.live -= k


def _release(counters, k):
    for c in counters:
        c._sub(k)


def alloc(shape, dtype=np.complex128):
    """Allocate a zeroed work buffer, registering it with active counters."""
    a = np.zeros(shape, dtype=dtype)
    if _stack:
        counters = tuple(_stack)
        weakref.finalize(a, _release, counters, a.size)
        for c in counters:
            c._add(a.size)
    return a
