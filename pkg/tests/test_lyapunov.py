"""Tests for displacement gauges, regions, and boundary-part sampling."""

from __future__ import annotations

import numpy as np
import pytest

from shadowlab.errors import DomainError, UsageError
from shadowlab.lyapunov import (
    BoxPair,
    Region,
    RegionPart,
    WeightedPair,
    classify,
    face_tol,
    in_part,
    max_gauge,
    pair_from_name,
    pair_name,
    sample_part,
)

BOX = BoxPair()
WEIGHTED = WeightedPair()


def test_box_pair_values():
    p = np.array([0.1, -0.2])
    q = np.array([0.15, -0.45])
    assert BOX.v(p, q) == pytest.approx(0.25)
    assert BOX.w(p, q) == pytest.approx(0.05)
    assert BOX.x_half_width(0.3, p) == 0.3
    assert BOX.delta0(0.07) == 0.07


def test_weighted_pair_values():
    p = np.array([0.5, 0.0])
    q = np.array([0.55, 0.1])
    # weight at the center: 0.5 * (1 - 0.5) = 0.25
    assert WEIGHTED.w(p, q) == pytest.approx(0.05 / 0.25)
    assert WEIGHTED.v(p, q) == pytest.approx(0.1)
    assert WEIGHTED.x_half_width(0.2, p) == pytest.approx(0.05)
    assert WEIGHTED.delta0(0.1) == pytest.approx(0.05)


def test_weighted_pair_domain():
    q = np.array([0.0, 0.0])
    with pytest.raises(DomainError):
        WEIGHTED.w(np.array([0.0, 0.5]), q)
    with pytest.raises(DomainError):
        WEIGHTED.w(np.array([1.0, 0.5]), q)
    with pytest.raises(DomainError):
        WEIGHTED.x_half_width(0.1, np.array([-1.5, 0.0]))


def test_gauge_level_bounds_literal_distance():
    """Points with max gauge <= delta0(eps) sit within eps in max-norm."""
    rng = np.random.default_rng(7)
    eps = 0.08
    for pair in (BOX, WEIGHTED):
        lvl = pair.delta0(eps)
        for _ in range(500):
            px = rng.uniform(0.05, 0.95) * rng.choice([-1.0, 1.0])
            p = np.array([px, rng.uniform(-1, 1)])
            q = p + rng.uniform(-eps, eps, size=2)
            if max_gauge(pair, p, q) <= lvl:
                assert np.max(np.abs(q - p)) <= eps + 1e-15


def test_region_bounds_and_contains():
    r = Region(center=(0.5, 0.0), level=0.2, pair=WEIGHTED)
    lo, hi = r.bounds()
    np.testing.assert_allclose(lo, [0.45, -0.2])
    np.testing.assert_allclose(hi, [0.55, 0.2])
    assert r.contains([0.46, 0.1])
    assert not r.contains([0.56, 0.0])
    mask = r.contains(np.array([[0.5, 0.0], [0.5, 0.25]]))
    assert mask.tolist() == [True, False]


def test_classify_precedence():
    p = np.array([0.0, 0.0])
    d = 0.1
    # corners sit on the top/bottom faces, which take precedence over R
    assert classify(BOX, p, [0.1, 0.1], d) is RegionPart.Q_FACE
    assert classify(BOX, p, [0.03, 0.1], d) is RegionPart.Q_FACE
    assert classify(BOX, p, [-0.1, 0.02], d) is RegionPart.R_FACE
    # zero vertical displacement labels as the core, even off-center
    assert classify(BOX, p, [0.05, 0.0], d) is RegionPart.T_CORE
    assert classify(BOX, p, [0.1, 0.0], d) is RegionPart.T_CORE
    assert classify(BOX, p, [0.01, -0.02], d) is RegionPart.INTERIOR
    assert classify(BOX, p, [0.2, 0.0], d) is RegionPart.OUTSIDE
    # the single-label answer is never the open face
    assert classify(BOX, p, [0.0, 0.1], d) is not RegionPart.INT_Q_FACE


def test_classify_tolerates_float_noise():
    p = np.array([0.2, -0.1])
    d = 0.05
    nudge = 0.25 * face_tol(d)
    q = np.array([0.2, -0.1 + d + nudge])
    assert classify(BOX, p, q, d) is RegionPart.Q_FACE


def test_in_part_identities():
    """Face membership decomposes: Q = open-Q union corners, etc."""
    rng = np.random.default_rng(42)
    p = np.array([0.3, 0.2])
    d = 0.07
    for _ in range(2000):
        q = p + rng.uniform(-1.5 * d, 1.5 * d, size=2)
        # snap roughly half the samples onto a face to hit the edge cases
        if rng.uniform() < 0.5:
            q[1] = p[1] + rng.choice([-d, d])
        if rng.uniform() < 0.5:
            q[0] = p[0] + rng.choice([-d, d])
        on_q = bool(in_part(BOX, RegionPart.Q_FACE, p, q, d))
        on_int_q = bool(in_part(BOX, RegionPart.INT_Q_FACE, p, q, d))
        on_t = bool(in_part(BOX, RegionPart.T_CORE, p, q, d))
        on_r = bool(in_part(BOX, RegionPart.R_FACE, p, q, d))
        outside = bool(in_part(BOX, RegionPart.OUTSIDE, p, q, d))
        interior = bool(in_part(BOX, RegionPart.INTERIOR, p, q, d))
        # the closed face is the open face plus its corner endpoints
        corner = on_q and on_r
        assert on_q == (on_int_q or corner)
        assert not (on_int_q and corner)
        label = classify(BOX, p, q, d)
        if label is RegionPart.OUTSIDE:
            assert outside
        if label is RegionPart.T_CORE:
            assert on_t and not outside
        if label is RegionPart.INTERIOR:
            assert interior and not (on_q or on_r or outside)
        # exactly one of: outside, a face of the boundary, strict inside
        assert outside + (on_q or on_r) + interior == 1


def test_sample_q_face_four_corners():
    r = Region(center=(0.0, 0.0), level=0.1, pair=BOX)
    pts = sample_part(r, RegionPart.Q_FACE, 4)
    np.testing.assert_allclose(
        pts,
        [[-0.1, 0.1], [0.1, 0.1], [-0.1, -0.1], [0.1, -0.1]],
        atol=1e-15,
    )


def test_sample_t_core_evenly_spaced():
    r = Region(center=(0.0, 0.0), level=0.1, pair=BOX)
    pts = sample_part(r, RegionPart.T_CORE, 3)
    np.testing.assert_allclose(
        pts, [[-0.1, 0.0], [0.0, 0.0], [0.1, 0.0]], atol=1e-15
    )


def test_sample_r_face_weighted_example():
    r = Region(center=(0.5, 0.0), level=0.2, pair=WEIGHTED)
    pts = sample_part(r, RegionPart.R_FACE, 2)
    np.testing.assert_allclose(pts, [[0.55, 0.0], [0.45, 0.0]], atol=1e-15)


@pytest.mark.parametrize(
    "part",
    [
        RegionPart.Q_FACE,
        RegionPart.R_FACE,
        RegionPart.T_CORE,
        RegionPart.INT_Q_FACE,
        RegionPart.INTERIOR,
    ],
)
@pytest.mark.parametrize("count", [2, 3, 4, 7, 16])
def test_samples_live_on_their_part(part, count):
    r = Region(center=(-0.4, 0.25), level=0.03, pair=BOX)
    pts = sample_part(r, part, count)
    assert pts.shape == (count, 2)
    p = np.asarray(r.center)
    mask = in_part(BOX, part, p, pts, r.level)
    assert bool(np.all(mask)), f"{part}: {pts[~mask]}"


def test_sample_part_rejections():
    r = Region(center=(0.0, 0.0), level=0.1, pair=BOX)
    with pytest.raises(UsageError):
        sample_part(r, RegionPart.Q_FACE, 0)
    with pytest.raises(UsageError):
        sample_part(r, RegionPart.OUTSIDE, 4)


def test_pair_names():
    assert pair_name(pair_from_name("box")) == "box"
    assert pair_name(pair_from_name("weighted")) == "weighted"
    with pytest.raises(UsageError):
        pair_from_name("diag")
