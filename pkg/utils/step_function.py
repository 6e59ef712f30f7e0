"""
Piecewise functions of time used for dual variables, load profiles and fractional weights.

PiecewiseConstantFunction keeps its breakpoints in a SortedDict (value valid from the
breakpoint onward, right-continuous). PiecewiseLinearFunction is a sum of linear
segments on half-open intervals and is evaluated vectorized with numpy.
"""

import math
from typing import Callable, Iterator, List, Optional, Tuple, Union

import numpy as np
from sortedcontainers import SortedDict

Number = Union[int, float]


class PiecewiseConstantFunction:
    """Right-continuous step function built from value shifts at breakpoints."""

    def __init__(self, initial_value: Number = 0):
        """
        Initialize the function to a constant.

        Args:
            initial_value: Value for every x before the first breakpoint
        """
        self._breakpoints = SortedDict()
        self._initial_value = initial_value

    def modify_value(self, xval: float, delta: Number):
        """
        Shift the function by delta for all x >= xval.

        Args:
            xval: Breakpoint position
            delta: Amount added from xval onward
        """
        if xval not in self._breakpoints:
            self._breakpoints[xval] = self.call(xval)

        for x in self._breakpoints.irange(xval):
            self._breakpoints[x] += delta

    def add_interval(self, start: float, stop: float, delta: Number):
        """Add delta on the half-open interval [start, stop)."""
        if stop <= start:
            return
        self.modify_value(start, delta)
        self.modify_value(stop, -delta)

    def call(self, xval: float) -> Number:
        """Value at xval (right limit at breakpoints)."""
        if len(self._breakpoints) == 0 or xval < self._breakpoints.keys()[0]:
            return self._initial_value
        lower_index = self._breakpoints.bisect_right(xval) - 1
        return self._breakpoints.values()[lower_index]

    __call__ = call

    def left_limit(self, xval: float) -> Number:
        """Value just before xval."""
        if len(self._breakpoints) == 0 or xval <= self._breakpoints.keys()[0]:
            return self._initial_value
        lower_index = self._breakpoints.bisect_left(xval) - 1
        return self._breakpoints.values()[lower_index]

    @property
    def breakpoints(self) -> List[float]:
        return list(self._breakpoints.keys())

    def pieces(self, start: float, stop: float) -> Iterator[Tuple[float, float, Number]]:
        """
        Iterate the constant pieces covering [start, stop).

        Yields:
            (left, right, value) with left < right
        """
        if stop <= start:
            return
        curr_x = start
        curr_value = self.call(start)
        for x in self._breakpoints.irange(start, stop, inclusive=(False, False)):
            yield curr_x, x, curr_value
            curr_x = x
            curr_value = self._breakpoints[x]
        yield curr_x, stop, curr_value

    def integral(self, start: float, stop: float,
                 transform: Optional[Callable[[Number], float]] = None) -> float:
        """
        Exact integral of transform(f) over [start, stop).

        Args:
            start: Lower bound
            stop: Upper bound
            transform: Optional function applied to the value of each piece

        Returns:
            float: Sum of piece widths times (transformed) values
        """
        total = 0.0
        for left, right, value in self.pieces(start, stop):
            piece_value = transform(value) if transform is not None else value
            total += (right - left) * piece_value
        return total

    def support_end(self) -> float:
        """Last breakpoint, or -inf for a constant function."""
        if len(self._breakpoints) == 0:
            return -math.inf
        return self._breakpoints.keys()[-1]

    def __str__(self):
        if len(self._breakpoints) == 0:
            return f'{self._initial_value}, all x\n'
        ret = f'{self._initial_value}, x < {self._breakpoints.keys()[0]}\n'
        for xval, yval in self._breakpoints.items():
            ret += f'{yval}, x >= {xval}\n'
        return ret


class PiecewiseLinearFunction:
    """Sum of linear segments, each living on a half-open interval [x0, x1)."""

    def __init__(self):
        self._x0: List[float] = []
        self._x1: List[float] = []
        self._v0: List[float] = []
        self._slope: List[float] = []
        self._arrays: Optional[Tuple[np.ndarray, ...]] = None

    def add_segment(self, x0: float, x1: float, v0: float, v1: float):
        """
        Add a segment going linearly from v0 at x0 to v1 at x1 (exclusive).

        Zero-length segments are ignored.
        """
        if x1 <= x0:
            return
        self._x0.append(x0)
        self._x1.append(x1)
        self._v0.append(v0)
        self._slope.append((v1 - v0) / (x1 - x0))
        self._arrays = None

    def _compiled(self) -> Tuple[np.ndarray, ...]:
        if self._arrays is None:
            self._arrays = (
                np.asarray(self._x0, dtype=float),
                np.asarray(self._x1, dtype=float),
                np.asarray(self._v0, dtype=float),
                np.asarray(self._slope, dtype=float),
            )
        return self._arrays

    def __call__(self, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Evaluate at scalar or array t (right limit at breakpoints)."""
        x0, x1, v0, slope = self._compiled()
        times = np.atleast_1d(np.asarray(t, dtype=float))
        if len(x0) == 0:
            values = np.zeros_like(times)
        else:
            grid = times[:, None]
            active = (x0[None, :] <= grid) & (grid < x1[None, :])
            contrib = np.where(active, v0[None, :] + slope[None, :] * (grid - x0[None, :]), 0.0)
            values = contrib.sum(axis=1)
        if np.isscalar(t) or np.ndim(t) == 0:
            return float(values[0])
        return values

    @property
    def breakpoints(self) -> List[float]:
        return sorted(set(self._x0) | set(self._x1))

    def integral(self) -> float:
        """Exact integral over the whole line (trapezoid per segment)."""
        total = 0.0
        for x0, x1, v0, slope in zip(self._x0, self._x1, self._v0, self._slope):
            width = x1 - x0
            total += width * v0 + 0.5 * slope * width * width
        return total

    def __len__(self):
        return len(self._x0)
