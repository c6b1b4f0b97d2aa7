"""Closed-form projection primitives against their variational certificates."""

import numpy as np
import pytest

from specprecode import (DegenerateConstraintError, Rank1Constraint,
                         bisection_rank1_oracle, project_columns_ball,
                         project_frobenius_ball, project_rank1)


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def feasible_points(rng, u, b, count):
    """Random points satisfying |u^H z|^2 <= b, built directly."""
    n = u.size
    unorm_sq = float(np.vdot(u, u).real)
    z = random_complex(rng, count, n)
    inner = z @ u.conj()
    z_perp = z - np.outer(inner / unorm_sq, u)
    radius = rng.uniform(0, 1, count) * np.sqrt(b) / unorm_sq
    phase = np.exp(2j * np.pi * rng.uniform(0, 1, count))
    return z_perp + np.outer(radius * phase, u)


class TestRank1Projection:
    def test_feasible_point_unchanged(self):
        rng = np.random.default_rng(0)
        u = random_complex(rng, 6)
        x = random_complex(rng, 6)
        b = float(np.abs(np.vdot(u, x)) ** 2) * 4.0
        assert np.array_equal(project_rank1(x, u, b), x)

    def test_zero_bound_is_exact_notch(self):
        rng = np.random.default_rng(1)
        u = random_complex(rng, 5)
        x = random_complex(rng, 5)
        out = project_rank1(x, u, 0.0)
        expected = x - u * np.vdot(u, x) / np.vdot(u, u)
        assert np.allclose(out, expected, atol=1e-12)
        assert np.abs(np.vdot(u, out)) < 1e-12

    def test_active_case_lands_on_boundary(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            u = random_complex(rng, 8)
            x = random_complex(rng, 8) * 3.0
            b = 0.25 * float(np.abs(np.vdot(u, x)) ** 2)
            out = project_rank1(x, u, b)
            assert np.abs(np.vdot(u, out)) ** 2 == pytest.approx(b, rel=1e-9)

    def test_matches_bisection_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            u = random_complex(rng, 4)
            x = random_complex(rng, 4) * 2.0
            b = 0.5
            if np.abs(np.vdot(u, x)) ** 2 <= b:
                x = x * 10.0
            out = project_rank1(x, u, b)
            ref = bisection_rank1_oracle(x, u, b)
            assert np.linalg.norm(out - ref) <= 1e-8 * np.linalg.norm(x)

    def test_variational_inequality(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            u = random_complex(rng, 6)
            x = random_complex(rng, 6) * 2.0
            b = rng.uniform(0.1, 2.0)
            p = project_rank1(x, u, b)
            z = feasible_points(rng, u, b, 100)
            lhs = np.real(np.sum(np.conj(x - p) * (z - p), axis=1))
            bound = 1e-9 * np.linalg.norm(x) * np.linalg.norm(z - p, axis=1)
            assert np.all(lhs <= bound)

    def test_idempotent_and_nonexpansive(self):
        rng = np.random.default_rng(5)
        u = random_complex(rng, 7)
        b = 0.7
        x = random_complex(rng, 7) * 3.0
        y = random_complex(rng, 7) * 3.0
        px, py = project_rank1(x, u, b), project_rank1(y, u, b)
        assert np.linalg.norm(project_rank1(px, u, b) - px) <= 1e-12
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12

    def test_batched_rows_match_individual(self):
        rng = np.random.default_rng(6)
        u = random_complex(rng, 5)
        batch = random_complex(rng, 3, 5) * 2.0
        out = project_rank1(batch, u, 0.4)
        for j in range(3):
            assert np.allclose(out[j], project_rank1(batch[j], u, 0.4), atol=1e-14)

    def test_degenerate_inputs_rejected(self):
        x = np.ones(4, dtype=complex)
        with pytest.raises(DegenerateConstraintError):
            project_rank1(x, np.zeros(4), 1.0)
        with pytest.raises(DegenerateConstraintError):
            project_rank1(x, x, -1.0)

    def test_constraint_violation_sign(self):
        rng = np.random.default_rng(7)
        u = random_complex(rng, 4)
        c = Rank1Constraint(u=u, b=1.0)
        inside = feasible_points(rng, u, 1.0, 1)[0]
        outside = 10.0 * u / np.vdot(u, u).real
        assert c.violation(inside) <= 0
        assert c.violation(outside) > 0


class TestBallProjections:
    def test_center_and_zero_radius(self):
        rng = np.random.default_rng(8)
        center = random_complex(rng, 2, 4)
        x = random_complex(rng, 2, 4)
        assert np.array_equal(project_frobenius_ball(center, center, 1.0), center)
        assert np.allclose(project_frobenius_ball(x, center, 0.0), center)

    def test_radial_scaling_midpoint(self):
        rng = np.random.default_rng(9)
        center = random_complex(rng, 2, 2)
        direction = random_complex(rng, 2, 2)
        r = 0.5 * np.linalg.norm(direction)
        out = project_frobenius_ball(center + direction, center, r)
        assert np.allclose(out, center + direction / 2.0, atol=1e-12)

    def test_inside_unchanged(self):
        rng = np.random.default_rng(10)
        center = random_complex(rng, 3, 3)
        x = center + 0.01 * random_complex(rng, 3, 3)
        assert np.array_equal(project_frobenius_ball(x, center, 10.0), x)

    def test_columns_scale_to_their_radii(self):
        rng = np.random.default_rng(11)
        center = random_complex(rng, 4, 3)
        dirs = random_complex(rng, 4, 3)
        dirs /= np.linalg.norm(dirs, axis=0)
        x = center + dirs * np.array([2.0, 0.2, 1.0])
        out = project_columns_ball(x, center, np.array([1.0, 0.5, 0.0]))
        dist = np.linalg.norm(out - center, axis=0)
        assert np.allclose(dist, [1.0, 0.2, 0.0], atol=1e-12)

    def test_columns_huge_radii_identity(self):
        rng = np.random.default_rng(12)
        center = random_complex(rng, 3, 4)
        x = random_complex(rng, 3, 4)
        out = project_columns_ball(x, center, np.full(4, 1e6))
        assert np.allclose(out, x, atol=1e-12)

    def test_negative_radius_rejected(self):
        x = np.ones((2, 2), dtype=complex)
        with pytest.raises(DegenerateConstraintError):
            project_frobenius_ball(x, x, -0.1)
        with pytest.raises(DegenerateConstraintError):
            project_columns_ball(x, x, np.array([1.0, -1.0]))

    def test_ball_variational_inequality(self):
        rng = np.random.default_rng(13)
        center = random_complex(rng, 2, 5)
        x = center + 3.0 * random_complex(rng, 2, 5)
        r = 1.0
        p = project_frobenius_ball(x, center, r)
        for _ in range(100):
            z = center + r * rng.uniform(0, 1) * (lambda v: v / np.linalg.norm(v))(
                random_complex(rng, 2, 5))
            lhs = np.real(np.vdot(x - p, z - p))
            assert lhs <= 1e-9 * np.linalg.norm(x) * np.linalg.norm(z - p)
