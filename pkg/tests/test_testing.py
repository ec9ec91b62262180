"""Local sums, testing constants, operator norms, tracked-constant checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import make_instance, random_corpus
from sparsebump import (CubeId, LeafFunction, SparseFamily, TreeGeometry,
                        WeightPair, apply_sparse, carleson_embedding_ratio,
                        cov_sides, eset_split_check, hytonen_ratio,
                        lambda_condition_constant, levelset_family, local_sum,
                        lp_norm, maximal_norm_lower, operator_norm_lower,
                        operator_norm_p2, prop31_bound, prop32_check,
                        prop33_check, sawyer_sum_bound, testing_constant,
                        theorem_main_ratio)
from sparsebump.bumps import BumpSpec, check_bump, nu_lambda_table
from sparsebump.dyadic import DomainError
from sparsebump.testing import (CheckReport, CHECK_CSV_HEADER,
                                cov_bracket_report, dyadic_maximal_full,
                                realized_levels)

ROOT = CubeId(0, 0)


class TestLocalSums:
    def test_instance_a_root(self, instance_a):
        f = local_sum(instance_a.family, instance_a.pair, ROOT)
        assert np.allclose(f.values, [8.25, 4.25, 1.75, 1.75])

    def test_instance_a_half(self, instance_a):
        f = local_sum(instance_a.family, instance_a.pair, CubeId(1, 0))
        assert np.allclose(f.values, [6.5, 2.5, 0.0, 0.0])

    def test_single_cube_family(self):
        inst = make_instance(3, np.ones(8), np.arange(1.0, 9.0), 2.0)
        fam = SparseFamily.build([ROOT], 1.0, inst.pair.geometry)
        f = local_sum(fam, inst.pair, ROOT)
        assert np.allclose(f.values, inst.pair.sigma_avg(ROOT))

    def test_matches_brute_force(self):
        for inst in random_corpus(30, seed=2, depths=(2, 3, 4, 5)):
            cubes = [(c.level, c.index) for c in inst.family.cubes]
            for R in inst.family.sorted_cubes()[:3]:
                ref = oracles.brute_local_sum(cubes, inst.pair.sigma_leaves,
                                              (R.level, R.index),
                                              inst.pair.geometry.depth)
                f = local_sum(inst.family, inst.pair, R)
                assert np.allclose(f.values, ref, rtol=1e-12)


class TestLpNorm:
    def test_flat(self):
        g = TreeGeometry(3)
        f = LeafFunction(g, np.ones(8))
        assert lp_norm(f, np.ones(8), 2.0) == pytest.approx(1.0)

    def test_instance_a_value(self, instance_a):
        f = local_sum(instance_a.family, instance_a.pair, ROOT)
        val = lp_norm(f, instance_a.pair.w_leaves, 2.0)
        assert val == pytest.approx(math.sqrt(23.0625), rel=1e-12)

    @given(st.floats(0.001, 1000.0))
    @settings(max_examples=40, deadline=None)
    def test_absolute_homogeneity(self, c):
        g = TreeGeometry(3)
        rng = np.random.default_rng(1)
        vals = rng.standard_normal(8)
        w = np.exp(rng.standard_normal(8))
        a = lp_norm(LeafFunction(g, c * vals), w, 1.5)
        b = c * lp_norm(LeafFunction(g, vals), w, 1.5)
        assert a == pytest.approx(b, rel=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(6)
        g = TreeGeometry(6)
        vals = rng.standard_normal(64)
        w = np.exp(rng.standard_normal(64))
        for p in (1.5, 2.0, 3.0):
            ref = oracles.brute_lp_norm(vals, w, p, 6)
            assert lp_norm(LeafFunction(g, vals), w, p) == pytest.approx(ref, rel=1e-12)


class TestTestingConstant:
    def test_flat_single_cube(self):
        inst = make_instance(3, np.ones(8), np.ones(8), 2.0)
        fam = SparseFamily.build([ROOT], 1.0, inst.pair.geometry)
        val, argmax = testing_constant(inst.pair, fam)
        assert val == pytest.approx(1.0, rel=1e-12)
        assert argmax == ROOT

    def test_instance_a(self, instance_a):
        val, argmax = testing_constant(instance_a.pair, instance_a.family)
        assert val == pytest.approx(math.sqrt(23.0625 / 1.75), rel=1e-12)
        assert argmax == ROOT

    def test_matches_brute_force(self):
        for inst in random_corpus(100, seed=3, depths=(2, 3, 4, 5)):
            cubes = [(c.level, c.index) for c in inst.family.cubes]
            ref, ref_arg = oracles.brute_testing(cubes, inst.pair.w_leaves,
                                                 inst.pair.sigma_leaves,
                                                 inst.pair.p,
                                                 inst.pair.geometry.depth)
            val, argmax = testing_constant(inst.pair, inst.family)
            assert val == pytest.approx(ref, rel=1e-12)

    def test_exact_scaling_laws(self, instance_a):
        pair = instance_a.pair
        fam = instance_a.family
        base, _ = testing_constant(pair, fam)
        g = pair.geometry
        for c in (1e-6, 1e6):
            sig, _ = testing_constant(
                WeightPair(g, pair.w_leaves, c * pair.sigma_leaves, 2.0), fam)
            assert sig == pytest.approx(c ** 0.5 * base, rel=1e-10)
            ws, _ = testing_constant(
                WeightPair(g, c * pair.w_leaves, pair.sigma_leaves, 2.0), fam)
            assert ws == pytest.approx(c ** 0.5 * base, rel=1e-10)


class TestSparseOperator:
    def test_apply_sparse_linearity(self, instance_a):
        g = instance_a.pair.geometry
        rng = np.random.default_rng(4)
        f1 = LeafFunction(g, rng.standard_normal(4))
        f2 = LeafFunction(g, rng.standard_normal(4))
        both = apply_sparse(instance_a.family,
                            LeafFunction(g, f1.values + 2.0 * f2.values))
        parts = apply_sparse(instance_a.family, f1).values \
            + 2.0 * apply_sparse(instance_a.family, f2).values
        assert np.allclose(both.values, parts, rtol=1e-12)

    def test_norm_flat_root(self):
        inst = make_instance(3, np.ones(8), np.ones(8), 2.0)
        fam = SparseFamily.build([ROOT], 1.0, inst.pair.geometry)
        assert operator_norm_p2(fam, inst.pair) == pytest.approx(1.0, rel=1e-9)

    def test_power_iteration_matches_dense(self):
        from sparsebump.testing import _SparseOperatorP2
        for inst in random_corpus(30, seed=9, depths=(2, 3, 4, 5, 6),
                                  ps=(2.0,)):
            iterative = operator_norm_p2(inst.family, inst.pair)
            dense = np.linalg.svd(
                _SparseOperatorP2(inst.family, inst.pair).dense(),
                compute_uv=False)[0]
            assert iterative == pytest.approx(dense, rel=1e-6)

    def test_lower_bound_below_norm(self):
        for inst in random_corpus(30, seed=10, depths=(2, 3, 4), ps=(2.0,)):
            norm = operator_norm_p2(inst.family, inst.pair)
            lower = operator_norm_lower(inst.family, inst.pair, budget=6, seed=0)
            assert lower <= norm + 1e-9

    def test_norm_dominates_both_testing_constants(self):
        for inst in random_corpus(30, seed=11, depths=(2, 3, 4, 5), ps=(2.0,)):
            norm = operator_norm_p2(inst.family, inst.pair)
            t1, _ = testing_constant(inst.pair, inst.family)
            t2, _ = testing_constant(inst.pair.swapped(), inst.family)
            assert max(t1, t2) <= norm + 1e-9

    def test_rejects_other_exponents(self, instance_a):
        pair = WeightPair(instance_a.pair.geometry, instance_a.pair.w_leaves,
                          instance_a.pair.sigma_leaves, 3.0)
        with pytest.raises(DomainError):
            operator_norm_p2(instance_a.family, pair)


class TestCov:
    @staticmethod
    def _setup(inst, rng):
        fam = inst.family.cubes
        a = {q: float(np.abs(rng.standard_normal()) + 0.01) for q in fam}
        return fam, a

    def test_instance_a_sides(self, instance_a):
        a = {q: instance_a.pair.sigma_avg(q)
             for q in instance_a.family.cubes}
        lhs, rhs = cov_sides(instance_a.family.cubes, a,
                             instance_a.pair.w_leaves, 2.0,
                             instance_a.pair.geometry)
        assert lhs ** 2 == pytest.approx(23.0625, rel=1e-12)
        assert rhs ** 2 == pytest.approx(16.625, rel=1e-12)

    def test_p2_exact_identity(self):
        # lhs^2 = 2 rhs^2 - sum a_Q^2 w(Q), which forces the sqrt(2) bracket
        rng = np.random.default_rng(12)
        for inst in random_corpus(50, seed=12, ps=(2.0,), depths=(2, 3, 4, 5)):
            fam, a = self._setup(inst, rng)
            lhs, rhs = cov_sides(fam, a, inst.pair.w_leaves, 2.0,
                                 inst.pair.geometry)
            tail = sum(a[q] ** 2 * inst.pair.w_mass(q) for q in fam)
            assert lhs ** 2 == pytest.approx(2.0 * rhs ** 2 - tail, rel=1e-9)

    def test_p2_bracket_hard(self):
        rng = np.random.default_rng(13)
        for inst in random_corpus(50, seed=13, ps=(2.0,), depths=(2, 3, 4, 5)):
            fam, a = self._setup(inst, rng)
            rep = cov_bracket_report(fam, a, inst.pair.w_leaves, 2.0,
                                     inst.pair.geometry)
            assert rep.passed, rep

    def test_other_p_reported_not_asserted(self, instance_a):
        a = {q: 1.0 for q in instance_a.family.cubes}
        lhs, rhs = cov_sides(instance_a.family.cubes, a,
                             instance_a.pair.w_leaves, 3.0,
                             instance_a.pair.geometry)
        assert lhs > 0.0 and rhs > 0.0


class TestEmbeddings:
    def test_carleson_single_cube_ratio_one(self):
        inst = make_instance(3, np.ones(8), np.ones(8), 2.0)
        fam = SparseFamily.build([ROOT], 1.0, inst.pair.geometry)
        rep = carleson_embedding_ratio(fam, inst.pair.w_leaves, 0.5, ROOT,
                                       inst.pair.geometry)
        assert rep.ratio == pytest.approx(1.0, rel=1e-12)

    def test_carleson_scale_invariance(self):
        for inst in random_corpus(20, seed=14, depths=(3, 4, 5)):
            for s in (0.25, 0.5, 0.75):
                base = carleson_embedding_ratio(inst.family, inst.pair.w_leaves,
                                                s, ROOT, inst.pair.geometry)
                scaled = carleson_embedding_ratio(
                    inst.family, 1e4 * inst.pair.w_leaves, s, ROOT,
                    inst.pair.geometry)
                assert scaled.ratio == pytest.approx(base.ratio, rel=1e-12)

    def test_hytonen_instance_a(self, instance_a):
        rep = hytonen_ratio(instance_a.family, instance_a.pair, ROOT)
        assert rep.ratio == pytest.approx(1.44140625, rel=1e-12)


class TestLevelSets:
    def test_partition(self):
        for inst in random_corpus(40, seed=15, depths=(2, 3, 4, 5)):
            seen = set()
            for k in realized_levels(inst.family, inst.pair):
                fam_k = levelset_family(inst.family, inst.pair, k)
                assert fam_k, k
                assert not (fam_k & seen)
                seen |= fam_k
            assert seen == set(inst.family.cubes)

    def test_boundary_convention(self):
        # sigma_Q = 1 must land in k = -1 under the strict/weak convention
        inst = make_instance(2, np.ones(4), np.ones(4), 2.0, strategy="tower")
        assert realized_levels(inst.family, inst.pair) == [-1]


class TestTrackedConstants:
    SPEC = BumpSpec()

    def test_prop32_instance_a(self, instance_a):
        rep = prop32_check(instance_a.family, instance_a.pair, ROOT, 1)
        assert rep.ratio == pytest.approx(2.25 / 1.75, rel=1e-12)
        assert rep.bound == pytest.approx(2.0 * instance_a.family.packing)
        assert rep.passed

    def test_prop33_uses_tail_sum_bound(self, instance_a):
        rep = prop33_check(instance_a.family, instance_a.pair, self.SPEC, ROOT)
        s_psi = check_bump(self.SPEC).s_psi
        assert rep.bound == pytest.approx(2.0 * instance_a.family.packing * s_psi)
        assert rep.passed

    def test_hard_checks_on_corpus(self):
        for inst in random_corpus(150, seed=16):
            pair = inst.pair
            fam = inst.family
            R = max(fam.cubes, key=lambda q: -q.level)
            for k in realized_levels(fam, pair)[:3]:
                assert prop32_check(fam, pair, R, k).passed
            assert prop33_check(fam, pair, self.SPEC, R).passed
            assert sawyer_sum_bound(pair, fam, self.SPEC, R).passed
            _, member = eset_split_check(pair, fam, R)
            assert member.passed

    def test_lambda_condition_matches_prop33(self, instance_a):
        table = nu_lambda_table(instance_a.pair, self.SPEC, instance_a.family)
        c = lambda_condition_constant(instance_a.family, instance_a.pair,
                                      table, ROOT)
        rep = prop33_check(instance_a.family, instance_a.pair, self.SPEC, ROOT)
        assert c == pytest.approx(rep.ratio, rel=1e-12)

    def test_lambda_below_one_rejected(self, instance_a):
        table = {q: 0.5 for q in instance_a.family.cubes}
        with pytest.raises(DomainError):
            lambda_condition_constant(instance_a.family, instance_a.pair,
                                      table, ROOT)

    def test_prop31_report(self, instance_a):
        table = nu_lambda_table(instance_a.pair, self.SPEC, instance_a.family)
        rep = prop31_bound(instance_a.pair, instance_a.family, table, self.SPEC)
        assert rep.lhs > 0.0 and rep.rhs > 0.0

    def test_theorem_ratio_components(self, instance_a):
        r1, r2 = theorem_main_ratio(instance_a.pair, instance_a.family, self.SPEC)
        tc, _ = testing_constant(instance_a.pair, instance_a.family)
        from sparsebump.bumps import nu_constant
        nu = nu_constant(instance_a.pair, self.SPEC, instance_a.family)
        assert r1.ratio == pytest.approx(tc / nu ** 0.5, rel=1e-12)
        assert r2.lhs == pytest.approx(
            testing_constant(instance_a.pair.swapped(), instance_a.family)[0],
            rel=1e-12)


class TestMaximal:
    def test_full_maximal_matches_brute(self):
        rng = np.random.default_rng(18)
        g = TreeGeometry(4)
        f = np.exp(rng.standard_normal(16))
        ref = oracles.brute_dyadic_maximal(f, 0, 0, 4)
        assert np.allclose(dyadic_maximal_full(f, g), ref, rtol=1e-12)

    def test_maximal_lower_positive(self, instance_a):
        val = maximal_norm_lower(instance_a.pair, budget=4, seed=0)
        assert val > 0.0


class TestCheckReport:
    def test_csv_row_format(self):
        rep = CheckReport.make("demo", 1.0, 2.0, bound=1.0, hard=True)
        row = rep.csv_row()
        assert row.startswith("demo,")
        assert row.split(",")[-1] in {"true", "false"}
        assert len(row.split(",")) == len(CHECK_CSV_HEADER.split(","))

    def test_pass_semantics(self):
        assert CheckReport.make("x", 1.0, 1.0, bound=1.0).passed
        assert not CheckReport.make("x", 2.0, 1.0, bound=1.0).passed
        # report-only checks carry no pass verdict semantics beyond ratio
        rep = CheckReport.make("x", 2.0, 1.0)
        assert rep.ratio == pytest.approx(2.0)
