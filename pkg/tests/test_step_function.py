import numpy as np
import pytest

from utils.step_function import PiecewiseConstantFunction, PiecewiseLinearFunction


class TestPiecewiseConstantFunction:
    """Test cases for PiecewiseConstantFunction."""

    def test_intervals_stack(self):
        """Test overlapping intervals add up."""
        f = PiecewiseConstantFunction(0)
        f.add_interval(0.0, 2.0, 1)
        f.add_interval(1.0, 3.0, 1)
        assert f(0.5) == 1
        assert f(1.0) == 2
        assert f(2.0) == 1
        assert f(3.0) == 0
        assert f.left_limit(1.0) == 1

    def test_integral_and_transform(self):
        """Test exact integrals with and without a transform."""
        f = PiecewiseConstantFunction(0.0)
        f.add_interval(0.0, 2.0, 1.0)
        f.add_interval(1.0, 2.0, 1.0)
        assert f.integral(0.0, 2.0) == pytest.approx(3.0)
        assert f.integral(0.0, 2.0, transform=lambda u: u * u) == pytest.approx(5.0)

    def test_pieces_cover_range(self):
        """Test that pieces tile the requested range."""
        f = PiecewiseConstantFunction(0)
        f.add_interval(1.0, 2.0, 3)
        pieces = list(f.pieces(0.0, 4.0))
        assert pieces == [(0.0, 1.0, 0), (1.0, 2.0, 3), (2.0, 4.0, 0)]
        assert list(f.pieces(2.0, 2.0)) == []

    def test_empty_interval_ignored(self):
        """Test that empty intervals leave the function constant."""
        f = PiecewiseConstantFunction(5)
        f.add_interval(2.0, 2.0, 1)
        assert f.breakpoints == []
        assert f.support_end() == -np.inf


class TestPiecewiseLinearFunction:
    """Test cases for PiecewiseLinearFunction."""

    def test_evaluation(self):
        """Test scalar and vector evaluation."""
        f = PiecewiseLinearFunction()
        f.add_segment(0.0, 2.0, 2.0, 0.0)
        f.add_segment(1.0, 3.0, 1.0, 1.0)
        assert f(0.0) == pytest.approx(2.0)
        assert f(1.5) == pytest.approx(0.5 + 1.0)
        values = f(np.array([0.5, 2.0, 3.0]))
        assert values == pytest.approx([1.5, 1.0, 0.0])

    def test_integral(self):
        """Test the trapezoid integral."""
        f = PiecewiseLinearFunction()
        f.add_segment(0.0, 2.0, 2.0, 0.0)
        f.add_segment(2.0, 4.0, 1.0, 1.0)
        assert f.integral() == pytest.approx(2.0 + 2.0)

    def test_zero_length_segment(self):
        """Test that zero-length segments are dropped."""
        f = PiecewiseLinearFunction()
        f.add_segment(1.0, 1.0, 5.0, 5.0)
        assert len(f) == 0
        assert f(1.0) == 0.0
