import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphdesign import geom
from sphdesign.partition import (ConvexPartition, PolytopeFrame, build_partition, cell_contains,
                                 facet_counts, facet_density, incenter, partition_norm,
                                 polar_facet_mass, project_to_cone, solve_lambda_even,
                                 solve_lambda_mu_odd)
from sphdesign.rectpart import Rect


@pytest.fixture(scope="module")
def parts():
    return {N: build_partition(2, N, validate=False) for N in (1, 2, 5, 6, 7, 24, 97, 150)}


def mc_box_mass(frame, facet, box, n, seed):
    """Monte Carlo oracle: share of uniform sphere points whose chart image lies in ``box``."""
    x = geom.mc_sphere_sample(frame.d, n, seed)
    f, tau = frame.sphere_to_chart(x)
    hit = (f == facet) & np.all((tau >= box.lo) & (tau <= box.hi), axis=1)
    return hit.mean()


class TestFacetDensity:
    @pytest.mark.parametrize("d", [2, 3])
    def test_cube_facet(self, d):
        assert polar_facet_mass(d, 1 / np.sqrt(d + 1)) == pytest.approx(1 / (2 * d + 2), abs=1e-12)

    @pytest.mark.parametrize("lam", [0.45, 1 / np.sqrt(3), 0.7])
    def test_even_frame_sums_to_one(self, lam):
        frame = PolytopeFrame(2, 2, lam, lam, (1,) * 6)
        total = sum(facet_density(frame, f).mass(Rect.cube(2)) for f in range(6))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_odd_frame_sums_to_one(self):
        frame = PolytopeFrame(3, 2, 0.62, 0.55, (1,) * 8)
        total = sum(facet_density(frame, f).mass(Rect.cube(3)) for f in range(8))
        assert total == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("facet", [0, 1, 3, 4])
    def test_subbox_vs_monte_carlo(self, facet):
        frame = PolytopeFrame(2, 2, 0.64, 0.55, (1,) * 6)
        box = Rect((-0.7, -0.2), (0.4, 0.9))
        m = facet_density(frame, facet).mass(box)
        n = 10**6
        est = mc_box_mass(frame, facet, box, n, seed=facet)
        assert abs(est - m) <= 4 * np.sqrt(m * (1 - m) / n)

    def test_exact_and_quadrature_agree(self):
        frame = PolytopeFrame(2, 2, 0.64, 0.55, (1,) * 6)
        box = Rect((-0.3, -1.0), (0.8, 0.1))
        for f in range(6):
            a = facet_density(frame, f).mass(box)
            b = facet_density(frame, f, exact=False).mass(box)
            assert a == pytest.approx(b, rel=1e-12)


class TestFrames:
    def test_cube_for_six(self):
        frame = solve_lambda_even(2, 6)
        assert frame.lam == pytest.approx(1 / np.sqrt(3), abs=1e-12)
        assert frame.counts == (1,) * 6

    @pytest.mark.parametrize("N", [100, 200, 398])
    def test_even_counts(self, N):
        frame = solve_lambda_even(2, N)
        q = N // 6
        assert frame.counts[2:] == (q + 1,) * 4
        assert frame.counts[0] == frame.counts[1] == N // 2 - 2 * (q + 1)
        assert sum(frame.counts) == N
        assert frame.facet_masses.sum() == pytest.approx(1.0, abs=1e-15)
        assert polar_facet_mass(2, frame.lam) == pytest.approx(frame.counts[0] / N, abs=1e-12)
        lo, hi = 1 / np.sqrt(3), 1 - 1 / 20
        assert lo - 1e-12 <= frame.lam <= hi and frame.in_nominal_bracket
        # the cube facet is the heaviest polar facet the bracket allows
        assert polar_facet_mass(2, lo) >= frame.counts[0] / N

    @pytest.mark.parametrize("N", [97, 99, 201])
    def test_odd_counts(self, N):
        frame = solve_lambda_mu_odd(2, N)
        assert frame.counts[1] - frame.counts[0] == 1
        assert (frame.facet_masses[1] - frame.facet_masses[0]) == pytest.approx(1 / N)
        assert frame.facet_masses.sum() == pytest.approx(1.0, abs=1e-15)
        assert polar_facet_mass(2, frame.mu) == pytest.approx(frame.counts[1] / N, abs=1e-12)

    def test_odd_degenerates_to_even(self):
        lam = solve_lambda_even(2, 100).lam
        frame = PolytopeFrame(2, 100, lam, lam, solve_lambda_even(2, 100).counts)
        A, B, C, D = frame.coeffs
        assert B == 0 and C == 0
        tau = np.random.default_rng(0).uniform(-1, 1, (50, 2))
        for f in range(6):
            w = frame.chart_to_polytope(f, tau)
            # box faces of P(a_lam): the coordinate of the facet axis is fixed
            axis = f // 2
            expect = lam if axis == 0 else np.sqrt(1 - lam**2) / np.sqrt(2)
            assert np.allclose(np.abs(w[:, axis]), expect)

    def test_wrong_parity(self):
        with pytest.raises(ValueError):
            solve_lambda_even(2, 97)
        with pytest.raises(ValueError):
            solve_lambda_mu_odd(2, 96)

    def test_small_n_counts(self):
        assert facet_counts(2, 5) is None
        counts, fallback = facet_counts(2, 8)
        assert sum(counts) == 8 and min(counts) >= 1 and fallback


class TestCharts:
    @pytest.mark.parametrize("N", [100, 97])
    def test_chart_roundtrip(self, N):
        frame = (solve_lambda_even if N % 2 == 0 else solve_lambda_mu_odd)(2, N)
        rng = np.random.default_rng(1)
        for f in range(6):
            tau = rng.uniform(-1, 1, (200, 2))
            x = frame.chart_to_sphere(f, tau)
            ff, back = frame.sphere_to_chart(x)
            assert np.all(ff == f)
            assert np.allclose(back, tau, atol=1e-10)

    def test_segment_images_are_geodesics(self):
        # affine charts map every segment to a great-circle arc; the odd-N
        # lateral charts are bilinear, where this holds for axis-parallel segments
        rng = np.random.default_rng(2)
        even = solve_lambda_even(2, 100)
        odd = solve_lambda_mu_odd(2, 97)
        cases = [(even, f, False) for f in range(6)] + [(odd, f, f >= 2) for f in range(6)]
        for frame, f, axis_only in cases:
            for _ in range(100 // len(cases) + 1):
                a, b = rng.uniform(-1, 1, (2, 2))
                if axis_only:
                    keep = rng.integers(2)
                    b[keep] = a[keep]
                s = np.linspace(0, 1, 9)[:, None]
                pts = frame.chart_to_sphere(f, a + s * (b - a))
                n = np.cross(pts[0], pts[-1])
                n /= np.linalg.norm(n)
                assert np.all(np.abs(pts @ n) < 1e-9)


class TestBuild:
    @pytest.mark.parametrize("N", [1, 2, 5, 6, 7, 24, 97, 150])
    def test_counts_and_measures(self, parts, N):
        p = parts[N]
        assert len(p.cells) == N
        if p.frame is not None:
            for cell in p.cells:
                m = facet_density(p.frame, cell.facet, estimate_uniformity=False).mass(cell.box)
                assert m == pytest.approx(1 / N, rel=1e-9)

    def test_spherical_cube(self, parts):
        p = parts[6]
        assert p.frame.lam == pytest.approx(1 / np.sqrt(3))
        centers, radii = p.incenters()
        expect = np.vstack([np.eye(3), -np.eye(3)])
        for c in centers:
            assert np.min(np.linalg.norm(expect - c, axis=1)) < 1e-9
        assert partition_norm(p) == pytest.approx(np.arccos(-1 / 3), abs=1e-12)

    def test_equal_facet_cube_counts(self):
        p = build_partition(2, 24, validate=False, equal_facets=True)
        assert p.frame.counts == (4,) * 6
        assert p.frame.lam == pytest.approx(1 / np.sqrt(3))
        m = [facet_density(p.frame, c.facet, estimate_uniformity=False).mass(c.box) for c in p.cells]
        assert np.allclose(m, 1 / 24, rtol=1e-12)

    def test_validation_metadata(self):
        p = build_partition(2, 40, validate=True, validation_samples=200_000)
        assert p.metadata["density_check"]["passed"]
        assert p.metadata["facet_mass_error"] < 1e-12

    def test_d3(self):
        p = build_partition(3, 30, validate=True, validation_samples=200_000)
        assert len(p.cells) == 30
        assert p.metadata["density_check"]["passed"]
        x = geom.mc_sphere_sample(3, 20_000, 4)
        idx = p.locate(x)
        assert all(p.cells[i].contains(xi)[0] for i, xi in zip(idx[:2000], x[:2000]))

    def test_bad_args(self):
        with pytest.raises(ValueError):
            build_partition(2, 0)
        with pytest.raises(ValueError):
            build_partition(1, 4)


class TestCells:
    @pytest.mark.parametrize("N", [5, 7, 24, 97])
    def test_incenter_and_antipode(self, parts, N):
        p = parts[N]
        for cell in p.cells[:: max(1, N // 10)]:
            c, r = incenter(cell)
            assert r > 0
            assert cell_contains(cell, c)
            if N > 2:
                assert not cell_contains(cell, -c)

    @pytest.mark.parametrize("N", [7, 24, 97])
    def test_inscribed_cap(self, parts, N):
        rng = np.random.default_rng(N)
        p = parts[N]
        for cell in p.cells[:: max(1, N // 8)]:
            c, r = incenter(cell)
            T = geom.tangent_basis(c)
            ang = rng.uniform(0, 2 * np.pi, 1000)
            rad = 0.99 * r * np.sqrt(rng.uniform(0, 1, 1000))
            dirs = (T @ np.vstack([np.cos(ang), np.sin(ang)])).T
            pts = np.cos(rad)[:, None] * c + np.sin(rad)[:, None] * dirs
            assert np.all(cell.contains(pts))
            # the radius is tight: some point just outside the cap leaves the cell
            outer = np.cos(1.02 * r) * c + np.sin(1.02 * r) * dirs
            assert not np.all(cell.contains(outer, tol=0.0))

    @pytest.mark.parametrize("N", [6, 7, 24, 97])
    def test_convexity(self, parts, N):
        rng = np.random.default_rng(0)
        for cell in parts[N].cells:
            a, b = cell.sample(300, rng), cell.sample(300, rng)
            mid = geom.slerp_many(a, b, np.full(300, 0.5))
            assert np.all(cell.contains(mid, 1e-9))

    @pytest.mark.parametrize("N", [1, 2, 5, 7, 24, 97])
    def test_coverage(self, parts, N):
        p = parts[N]
        x = geom.mc_sphere_sample(2, 20_000, N)
        idx = p.locate(x)
        holders = np.column_stack([c.contains(x, 0.0) for c in p.cells])
        assert np.all(holders[np.arange(len(x)), idx])
        assert np.mean(holders.sum(axis=1) == 1) == 1.0

    def test_lune_norm(self, parts):
        assert partition_norm(parts[1]) == pytest.approx(np.pi)

    def test_norm_vs_sampled_diameter(self, parts):
        rng = np.random.default_rng(3)
        p = parts[24]
        sampled = max(geom.pairwise_distances(c.sample(400, rng)).max() for c in p.cells)
        assert sampled <= partition_norm(p) + 1e-12
        assert sampled >= 0.9 * partition_norm(p)

    def test_norm_lower_bound(self, parts):
        # a cell of measure 1/N has diameter at least that of the equal-area cap
        for N in (24, 97, 150):
            r = np.arccos(1 - 2 / N)
            assert partition_norm(parts[N]) >= 2 * r


class TestConeProjection:
    @settings(max_examples=30)
    @given(st.integers(0, 10**6))
    def test_projection_is_nearest(self, seed):
        rng = np.random.default_rng(seed)
        normals = rng.normal(size=(1, 4, 3)) + np.array([0, 0, 3.0])
        normals /= np.linalg.norm(normals, axis=2, keepdims=True)
        y = rng.normal(size=(1, 3))
        z = project_to_cone(normals, y)[0]
        assert np.all(normals[0] @ z >= -1e-10)
        # nearest among random feasible points
        cand = rng.normal(size=(4000, 3)) * 3
        feas = cand[np.all(cand @ normals[0].T >= 0, axis=1)]
        if len(feas):
            assert np.linalg.norm(z - y[0]) <= np.linalg.norm(feas - y[0], axis=1).min() + 1e-9


class TestSerialization:
    @pytest.mark.parametrize("N", [5, 24, 97])
    def test_roundtrip(self, parts, N):
        p = parts[N]
        data = json.loads(json.dumps(p.to_dict()))
        assert data["schema_version"] == 1
        q = ConvexPartition.from_dict(data)
        assert q.N == p.N
        for a, b in zip(p.cells, q.cells):
            assert np.allclose(a.normals, b.normals)
        x = geom.mc_sphere_sample(2, 1000, 1)
        assert np.array_equal(p.locate(x), q.locate(x))
        if p.frame is not None:
            assert data["lambda"] == p.frame.lam and data["mu"] == p.frame.mu
            assert [f["index"] for f in data["facets"]] == list(range(1, 7))
            assert data["K_emp"] > 0 and data["b_emp"] > 0
