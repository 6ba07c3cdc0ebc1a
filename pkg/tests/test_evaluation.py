import csv
import os

import numpy as np
import pytest

from pszkit.acoustics import FrequencyGrid, build_atf_set
from pszkit.errors import EvaluationError, GridError
from pszkit.evaluation import (EnergyTriple, EvalProtocol, admissible_anchor,
                               band_logmean, build_neighbor_edges,
                               decoupled_point_eval, evaluate_neighborhood,
                               improvement, improvement_table, ipi, izi,
                               multi_anchor_run, offset_values, perturbed_grid,
                               quality_summaries, sample_anchors, stability_stats,
                               write_improvement_csv, write_point_csv,
                               write_summary_csv)
from pszkit.filters import unpack
from pszkit.network import forward, init_params
from pszkit.scene import ArrayGeometry, HeadConfig, SceneConfig, stack_coords


def tiny_scene():
    xs = np.array([[-0.1, 0.0], [0.1, 0.0]])
    return SceneConfig(array=ArrayGeometry(positions={"w": xs}),
                       head=HeadConfig(half_width=0.05))


def tiny_grid():
    return FrequencyGrid(sample_rate=8000, fft_length=64,
                         filter_lengths={"w": 16},
                         band_edges={"w": (250.0, 2000.0)})


def tiny_params(seed=0, scene=None):
    scene = scene or tiny_scene()
    return init_params("w", 2 * 2 * 2 * 16, scene.bounds.reshape(4, 2),
                       np.random.default_rng(seed), hidden=(8, 8), encoding=1)


ANCHOR = stack_coords((-0.4, 1.1), (0.3, 1.1))  # separation 0.7, well clear of d_ov


class TestPerturbedGrid:
    def test_paper_grid_point_count(self):
        pts = perturbed_grid(ANCHOR, 0.10, 0.01)
        assert pts.shape == (441, 4)

    def test_coarse_grid(self):
        assert perturbed_grid(ANCHOR, 0.01, 0.01).shape == (9, 4)

    def test_degenerate_grid_is_anchor(self):
        pts = perturbed_grid(ANCHOR, 0.0, 0.01)
        assert pts.shape == (1, 4)
        assert np.array_equal(pts[0], ANCHOR)

    def test_listener_one_untouched(self):
        pts = perturbed_grid(ANCHOR, 0.05, 0.01)
        assert np.all(pts[:, :2] == ANCHOR[:2])

    def test_row_major_order(self):
        # y offset varies fastest within a row of constant x offset
        pts = perturbed_grid(ANCHOR, 0.01, 0.01)
        offs = pts[:, 2:] - ANCHOR[2:]
        expected = [(-0.01, -0.01), (-0.01, 0.0), (-0.01, 0.01),
                    (0.0, -0.01), (0.0, 0.0), (0.0, 0.01),
                    (0.01, -0.01), (0.01, 0.0), (0.01, 0.01)]
        assert np.allclose(offs, expected, atol=1e-15)

    def test_offsets_symmetric(self):
        vals = offset_values(0.10, 0.01)
        assert vals.shape == (21,)
        assert np.allclose(vals, -vals[::-1])
        assert abs(vals[0] + 0.10) < 1e-12

    def test_non_divisible_spacing_rejected(self):
        with pytest.raises(GridError):
            perturbed_grid(ANCHOR, 0.10, 0.03)

    def test_bad_anchor_shape(self):
        with pytest.raises(GridError):
            perturbed_grid(np.zeros(3), 0.01, 0.01)


class TestNeighborEdges:
    def test_three_by_three(self):
        edges, d = build_neighbor_edges((3, 3), 0.01)
        assert edges.shape == (12, 2)
        assert np.all(d == 0.01)

    def test_paper_grid_edge_count(self):
        edges, _ = build_neighbor_edges((21, 21), 0.01)
        assert edges.shape[0] == 2 * 21 * 20

    def test_single_point(self):
        edges, d = build_neighbor_edges((1, 1), 0.01)
        assert edges.shape == (0, 2)
        assert d.shape == (0,)

    def test_line_grid(self):
        edges, _ = build_neighbor_edges((1, 3), 0.5)
        assert edges.shape[0] == 2

    def test_each_edge_once(self):
        edges, _ = build_neighbor_edges((4, 5), 0.01)
        canon = {tuple(sorted(e)) for e in edges}
        assert len(canon) == edges.shape[0] == 31  # 4*4 + 3*5

    def test_edges_are_grid_neighbors(self):
        rows, cols = 4, 6
        edges, _ = build_neighbor_edges((rows, cols), 0.01)
        r, c = np.divmod(edges, cols)
        assert np.all(np.abs(r[:, 0] - r[:, 1]) + np.abs(c[:, 0] - c[:, 1]) == 1)


class TestDecoupledEval:
    def test_zero_filters_zero_energy(self):
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(scene=scene)
        for w in params.weights:
            w[...] = 0.0
        atfs = build_atf_set(scene, ANCHOR, grid)
        tri = decoupled_point_eval(atfs, {"w": params}, ANCHOR)
        assert np.all(tri.e_tar == 0) and np.all(tri.e_int == 0) and np.all(tri.e_leak == 0)

    def test_hand_composed_oracle(self):
        # nested-loop DFT and matrix product, nothing shared with the library path
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=3, scene=scene)
        atfs = build_atf_set(scene, ANCHOR, grid)
        x_hat = ANCHOR + np.array([0.0, 0.0, 0.02, -0.01])
        tri = decoupled_point_eval(atfs, {"w": params}, x_hat)

        vec, _ = forward(params, x_hat)
        taps = unpack(vec, "w", 2, 16).taps  # (K, 2, M, L)
        H = atfs.atfs["w"]  # (K, ears, 1, M, F)
        F = grid.n_bins
        G = np.zeros((2, 2, 2, F), dtype=complex)
        for j in range(2):
            for c in range(2):
                for m in range(2):
                    for f in range(F):
                        acc = 0j
                        for n in range(16):
                            acc += taps[j, c, m, n] * np.exp(-2j * np.pi * f * n / 64)
                        G[j, c, m, f] = acc
        energy = np.zeros((2, 2, F))
        for j in range(2):
            for k in range(2):
                for c in range(2):
                    for ear in range(2):
                        p = np.zeros(F, dtype=complex)
                        for m in range(2):
                            p += H[k, ear, 0, m] * G[j, c, m]
                        energy[j, k] += np.abs(p) ** 2
        assert np.max(np.abs(tri.e_tar - energy[[0, 1], [0, 1]])) < 1e-10
        assert np.max(np.abs(tri.e_int - energy[[1, 0], [0, 1]])) < 1e-10
        assert np.max(np.abs(tri.e_leak - energy[[0, 1], [1, 0]])) < 1e-10

    def test_anchor_input_matches_direct_evaluation(self):
        # x_hat = x is the ordinary coupled evaluation at x
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=5, scene=scene)
        atfs = build_atf_set(scene, ANCHOR, grid)
        a = decoupled_point_eval(atfs, {"w": params}, ANCHOR)
        b = decoupled_point_eval(atfs, {"w": params}, np.array(ANCHOR))
        assert np.array_equal(a.e_tar, b.e_tar)

    def test_atfs_stay_fixed(self):
        # perturbing x_hat changes energies through the filters only; the
        # transfer set object is reused untouched
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=1, scene=scene)
        atfs = build_atf_set(scene, ANCHOR, grid)
        before = {b: a.copy() for b, a in atfs.atfs.items()}
        tri_a = decoupled_point_eval(atfs, {"w": params}, ANCHOR)
        tri_b = decoupled_point_eval(atfs, {"w": params}, ANCHOR + 0.05)
        assert all(np.array_equal(before[b], atfs.atfs[b]) for b in before)
        assert not np.allclose(tri_a.e_tar, tri_b.e_tar)

    def test_missing_band_rejected(self):
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(scene=scene)
        atfs = build_atf_set(scene, ANCHOR, grid)
        with pytest.raises(GridError):
            decoupled_point_eval(atfs, {"q": params}, ANCHOR)

    def test_energy_triple_validation(self):
        with pytest.raises(EvaluationError):
            EnergyTriple(e_tar=np.ones(3), e_int=np.ones(4), e_leak=np.ones(3))
        with pytest.raises(EvaluationError):
            EnergyTriple(e_tar=np.ones(3), e_int=-np.ones(3), e_leak=np.ones(3))


class TestIsolationMetrics:
    def test_equal_energies_zero_db(self):
        assert abs(izi(np.array(0.5), np.array(0.5))) < 1e-6

    def test_decade_ratio(self):
        assert izi(np.array(10.0), np.array(1.0), eps=0.0) == 10.0
        assert abs(izi(np.array(10.0), np.array(1.0)) - 10.0) < 1e-6

    def test_four_over_two(self):
        v = izi(np.array(4.0), np.array(2.0))
        assert abs(v - 3.0103) < 1e-4
        assert abs(v - 10.0 * np.log10(4.0 / (2.0 + 1e-9))) < 1e-12

    def test_zero_target_hits_floor(self):
        assert izi(np.array(0.0), np.array(1.0)) == -300.0
        assert izi(np.array(0.0), np.array(1.0), floor=-120.0) == -120.0

    def test_ipi_same_form(self):
        t = np.array([1.0, 2.0, 0.0])
        d = np.array([0.5, 0.1, 3.0])
        assert np.array_equal(ipi(t, d), izi(t, d))

    def test_vectorized(self):
        t = np.array([[1.0, 4.0], [9.0, 16.0]])
        l = np.array([[1.0, 1.0], [1.0, 1.0]])
        out = izi(t, l, eps=0.0)
        assert out.shape == (2, 2)
        assert abs(out[1, 1] - 10.0 * np.log10(16.0)) < 1e-12

    def test_scale_invariance(self):
        # common tap scale s multiplies all energies by s^2 and cancels in the
        # ratio; the additive eps only matters near the floor of the range
        rng = np.random.default_rng(11)
        for _ in range(50):
            t = rng.uniform(0.1, 10.0, size=16)
            l = rng.uniform(0.1, 10.0, size=16)
            base = izi(t, l)
            for s in (0.1, 10.0):
                assert np.max(np.abs(izi(s * t, s * l) - base)) < 1e-6


class TestBandLogmean:
    def test_constant(self):
        mask = np.array([False, True, True, False])
        assert band_logmean(np.full(4, 7.0), mask) == 7.0

    def test_two_bin_midpoint(self):
        mask = np.array([True, True, False])
        assert band_logmean(np.array([0.0, 10.0, 99.0]), mask) == 5.0

    def test_loop_oracle(self):
        rng = np.random.default_rng(4)
        q = rng.normal(size=32)
        mask = rng.uniform(size=32) > 0.4
        expect = sum(q[i] for i in range(32) if mask[i]) / mask.sum()
        assert abs(band_logmean(q, mask) - expect) < 1e-12

    def test_empty_mask_rejected(self):
        with pytest.raises(GridError):
            band_logmean(np.ones(4), np.zeros(4, dtype=bool))

    def test_length_mismatch_rejected(self):
        with pytest.raises(GridError):
            band_logmean(np.ones(4), np.ones(5, dtype=bool))


class TestQualitySummaries:
    def test_cvar_single_smallest(self):
        med, lower = quality_summaries(np.arange(1.0, 11.0), "cvar10")
        assert med == 5.5  # midpoint convention for even N
        assert lower == 1.0

    def test_cvar_two_smallest(self):
        _, lower = quality_summaries(np.arange(1.0, 21.0), "cvar10")
        assert lower == 1.5

    def test_constant_set(self):
        for mode in ("min", "cvar10"):
            med, lower = quality_summaries(np.full(7, 3.25), mode)
            assert med == lower == 3.25

    def test_min_mode(self):
        _, lower = quality_summaries(np.array([4.0, -2.0, 7.0]), "min")
        assert lower == -2.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(9)
        vals = rng.normal(size=41)
        ref = quality_summaries(vals, "cvar10")
        for _ in range(5):
            assert quality_summaries(rng.permutation(vals), "cvar10") == ref

    def test_ordering_property(self):
        # min <= cvar10 <= median on arbitrary data
        rng = np.random.default_rng(13)
        for _ in range(25):
            vals = rng.normal(size=rng.integers(1, 60))
            med, lower = quality_summaries(vals, "cvar10")
            assert vals.min() <= lower <= med <= vals.max()

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            quality_summaries(np.array([]), "cvar10")

    def test_unknown_mode_rejected(self):
        with pytest.raises(EvaluationError):
            quality_summaries(np.ones(3), "p95")


class TestStabilityStats:
    def test_constant_field(self):
        edges, d = build_neighbor_edges((3, 3), 0.01)
        assert stability_stats(np.full(9, 2.0), edges, d) == (0.0, 0.0)

    def test_linear_field(self):
        # slope along rows only: half the edges see |a|, the other half zero
        a, spacing = 3.0, 0.01
        rows = np.arange(5) * spacing
        vals = (a * rows)[:, None].repeat(5, axis=1).ravel()
        edges, d = build_neighbor_edges((5, 5), spacing)
        s_mean, s_rms = stability_stats(vals, edges, d)
        assert abs(s_mean - a / 2.0) < 1e-12
        assert abs(s_rms - a / np.sqrt(2.0)) < 1e-12

    def test_rms_dominates_mean(self):
        rng = np.random.default_rng(21)
        edges, d = build_neighbor_edges((6, 6), 0.02)
        for _ in range(20):
            vals = rng.normal(size=36)
            s_mean, s_rms = stability_stats(vals, edges, d)
            assert s_rms >= s_mean >= 0.0

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(8)
        vals = rng.normal(size=12)
        edges, d = build_neighbor_edges((3, 4), 0.01)
        ref = stability_stats(vals, edges, d)
        perm = rng.permutation(12)
        inv = np.argsort(perm)
        got = stability_stats(vals[inv], perm[edges], d)
        assert np.allclose(got, ref, atol=1e-12)

    def test_empty_edges_rejected(self):
        with pytest.raises(EvaluationError):
            stability_stats(np.ones(1), np.empty((0, 2), dtype=int), np.empty(0))


class TestImprovement:
    def test_quality_example(self):
        v = improvement(9.35, 9.41, "quality")
        assert abs(v - 100.0 * 0.06 / 9.35) < 1e-6
        assert round(v, 1) == 0.6

    def test_stability_example(self):
        v = improvement(9.92, 4.38, "stability")
        assert abs(v - 100.0 * (9.92 - 4.38) / 9.92) < 1e-6
        assert abs(v - 55.9) < 0.1

    def test_equality_is_zero(self):
        assert improvement(3.3, 3.3, "quality") == 0.0
        assert improvement(3.3, 3.3, "stability") == 0.0

    def test_signs(self):
        # positive always means better: quality up, variation down
        assert improvement(10.0, 12.0, "quality") > 0
        assert improvement(10.0, 8.0, "stability") > 0
        assert improvement(10.0, 8.0, "quality") < 0

    def test_unknown_kind_rejected(self):
        with pytest.raises(EvaluationError):
            improvement(1.0, 2.0, "speed")


class TestEvaluateNeighborhood:
    def protocol(self):
        return EvalProtocol(r_max=0.02, spacing=0.01)

    def test_report_shape(self):
        scene, grid = tiny_scene(), tiny_grid()
        rep = evaluate_neighborhood(ANCHOR, {"w": tiny_params(scene=scene)},
                                    scene, grid, self.protocol())
        assert rep.points.shape == (25, 4)
        assert rep.grid_shape == (5, 5)
        assert rep.edge_count == 40
        assert set(rep.values) == {("izi", 2, "w"), ("ipi", 2, "w")}
        for vals in rep.values.values():
            assert vals.shape == (25,)

    def test_median_sort_oracle(self):
        scene, grid = tiny_scene(), tiny_grid()
        rep = evaluate_neighborhood(ANCHOR, {"w": tiny_params(seed=2, scene=scene)},
                                    scene, grid, self.protocol())
        for key, vals in rep.values.items():
            s = np.sort(vals)
            expect = 0.5 * (s[12] + s[12])  # odd N, middle element
            assert rep.summaries[key].median == expect
            assert rep.summaries[key].lower <= rep.summaries[key].median <= s[-1]

    def test_constant_generator_zero_sigma(self):
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=6, scene=scene)
        frozen, _ = forward(params, ANCHOR)

        def fixed_fn(p, x):
            return frozen, None

        rep = evaluate_neighborhood(ANCHOR, {"w": params}, scene, grid,
                                    self.protocol(), forward_fn=fixed_fn)
        for s in rep.summaries.values():
            assert s.sigma_mean == 0.0 and s.sigma_rms == 0.0
            assert s.lower == s.median

    def test_self_comparison_zero_improvement(self):
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=7, scene=scene)
        _, table = multi_anchor_run({"w": params}, scene, grid, self.protocol(),
                                    1, 0, anchors=[ANCHOR])
        for row in improvement_table(table, table):
            assert row["improvement_pct"] == 0.0

    def test_decoupling_counters(self):
        # one transfer build per anchor, one generator call per grid point
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=8, scene=scene)
        counts = {"atf": 0, "fwd": 0}

        def builder(x):
            counts["atf"] += 1
            return build_atf_set(scene, x, grid)

        def fwd(p, x):
            counts["fwd"] += 1
            return forward(p, x)

        evaluate_neighborhood(ANCHOR, {"w": params}, scene, grid, self.protocol(),
                              atf_builder=builder, forward_fn=fwd)
        assert counts == {"atf": 1, "fwd": 25}

    def test_inadmissible_anchor_rejected(self):
        scene, grid = tiny_scene(), tiny_grid()
        close = stack_coords((-0.4, 1.1), (-0.15, 1.1))  # sep 0.25 < d_ov
        with pytest.raises(EvaluationError, match="overlap"):
            evaluate_neighborhood(close, {"w": tiny_params(scene=scene)},
                                  scene, grid, self.protocol())

    def test_full_band_single_label(self):
        scene, grid = tiny_scene(), tiny_grid()
        proto = EvalProtocol(r_max=0.01, spacing=0.01, full_band=True)
        rep = evaluate_neighborhood(ANCHOR, {"w": tiny_params(scene=scene)},
                                    scene, grid, proto)
        assert set(rep.values) == {("izi", 2, "full"), ("ipi", 2, "full")}

    def test_full_band_equals_band_when_single_band(self):
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=4, scene=scene)
        kw = dict(r_max=0.01, spacing=0.01)
        rep_b = evaluate_neighborhood(ANCHOR, {"w": params}, scene, grid,
                                      EvalProtocol(**kw))
        rep_f = evaluate_neighborhood(ANCHOR, {"w": params}, scene, grid,
                                      EvalProtocol(full_band=True, **kw))
        assert np.array_equal(rep_b.values[("izi", 2, "w")],
                              rep_f.values[("izi", 2, "full")])

    def test_both_listeners(self):
        scene, grid = tiny_scene(), tiny_grid()
        proto = EvalProtocol(r_max=0.01, spacing=0.01, listeners=(1, 2))
        rep = evaluate_neighborhood(ANCHOR, {"w": tiny_params(scene=scene)},
                                    scene, grid, proto)
        assert ("izi", 1, "w") in rep.values and ("izi", 2, "w") in rep.values

    def test_admissibility_boundary_strict(self):
        d_ov, r_max = 0.30, 0.10
        sep = d_ov + np.sqrt(2.0) * r_max
        at = stack_coords((0.0, 1.0), (sep, 1.0))
        beyond = stack_coords((0.0, 1.0), (sep + 1e-9, 1.0))
        assert not admissible_anchor(at, d_ov, r_max)
        assert admissible_anchor(beyond, d_ov, r_max)

    def test_protocol_validation(self):
        with pytest.raises(EvaluationError):
            EvalProtocol(summary_mode="p90")
        with pytest.raises(EvaluationError):
            EvalProtocol(listeners=(0, 1))


class TestMultiAnchor:
    def test_singleton_table_equals_report(self):
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=10, scene=scene)
        proto = EvalProtocol(r_max=0.01, spacing=0.01)
        reports, table = multi_anchor_run({"w": params}, scene, grid, proto,
                                          1, 0, anchors=[ANCHOR])
        assert len(reports) == 1
        for key, stats in table.items():
            s = reports[0].summaries[key]
            assert stats["median"] == (s.median, 0.0)
            assert stats["sigma_rms"] == (s.sigma_rms, 0.0)

    def test_anchor_sampling_deterministic(self):
        scene = tiny_scene()
        a = sample_anchors(scene, 0.1, 4, np.random.default_rng(3))
        b = sample_anchors(scene, 0.1, 4, np.random.default_rng(3))
        assert np.array_equal(a, b)
        assert a.shape == (4, 4)

    def test_sampled_anchors_admissible(self):
        scene = tiny_scene()
        anchors = sample_anchors(scene, 0.1, 16, np.random.default_rng(5))
        assert np.all(anchors[:, :2] == np.asarray(scene.x1))
        for anchor in anchors:
            assert admissible_anchor(anchor, scene.d_ov, 0.1)

    def test_anchor_average_oracle(self):
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=12, scene=scene)
        proto = EvalProtocol(r_max=0.01, spacing=0.01)
        anchors = [stack_coords((-0.4, 1.1), (0.25, 1.0)),
                   stack_coords((-0.4, 1.1), (0.35, 1.2)),
                   stack_coords((-0.4, 1.1), (0.10, 1.4))]
        reports, table = multi_anchor_run({"w": params}, scene, grid, proto,
                                          3, 0, anchors=anchors)
        key = ("izi", 2, "w")
        meds = [r.summaries[key].median for r in reports]
        assert abs(table[key]["median"][0] - np.mean(meds)) < 1e-12
        assert abs(table[key]["median"][1] - np.std(meds)) < 1e-12

    def test_bounds_too_tight(self):
        # Listener 2 confined right on top of Listener 1, nothing admissible
        bounds = np.array([[[-0.8, 0.8], [0.7, 1.6]],
                           [[-0.45, -0.35], [1.05, 1.15]]])
        scene = SceneConfig(array=ArrayGeometry(positions={"w": np.array([[0.0, 0.0]])}),
                            bounds=bounds)
        with pytest.raises(EvaluationError, match="bounds too tight"):
            sample_anchors(scene, 0.1, 1, np.random.default_rng(0), max_tries=200)

    def test_mismatched_tables_rejected(self):
        t1 = {("izi", 2, "w"): {"median": (1.0, 0.0)}}
        t2 = {("ipi", 2, "w"): {"median": (1.0, 0.0)}}
        with pytest.raises(EvaluationError):
            improvement_table(t1, t2)


class TestCsvExport:
    def reports(self):
        scene, grid = tiny_scene(), tiny_grid()
        params = tiny_params(seed=14, scene=scene)
        proto = EvalProtocol(r_max=0.01, spacing=0.01)
        reports, table = multi_anchor_run({"w": params}, scene, grid, proto,
                                          1, 0, anchors=[ANCHOR])
        return reports, table

    def test_point_csv_rows(self, tmp_path):
        reports, _ = self.reports()
        path = str(tmp_path / "points.csv")
        write_point_csv(path, reports)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["anchor", "dx", "dy", "metric", "band", "value_db"]
        assert len(rows) - 1 == 9 * 2  # points x metrics, one anchor
        assert {r[3] for r in rows[1:]} == {"izi_2", "ipi_2"}

    def test_summary_csv_rows(self, tmp_path):
        reports, _ = self.reports()
        path = str(tmp_path / "summary.csv")
        write_summary_csv(path, reports)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0][:3] == ["anchor", "metric", "median"]
        assert {r[1] for r in rows[1:]} == {"izi_2_w", "ipi_2_w"}

    def test_improvement_csv_round_trip(self, tmp_path):
        _, table = self.reports()
        rows = improvement_table(table, table)
        path = str(tmp_path / "imp.csv")
        write_improvement_csv(path, rows)
        with open(path, newline="") as f:
            got = list(csv.reader(f))
        assert len(got) - 1 == len(rows)
        assert all(r[-1] == "0.0" for r in got[1:])

    def test_rewrites_byte_identical(self, tmp_path):
        reports, table = self.reports()
        for writer, arg in ((write_point_csv, reports),
                            (write_summary_csv, reports),
                            (write_improvement_csv, improvement_table(table, table))):
            p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
            writer(p1, arg)
            writer(p2, arg)
            assert open(p1, "rb").read() == open(p2, "rb").read()
