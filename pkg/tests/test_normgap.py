import math

import numpy as np
import pytest

from oulab.budget import Budget
from oulab.engine import OUSystem
from oulab.errors import DomainError, InapplicableError
from oulab.normgap import (
    WitnessReport,
    buc_gap,
    cosine_witness,
    dichotomy_classify,
    disjoint_balls_witness,
    drift_l1_norm_measured,
    l1_invariant_gap,
    l1_lebesgue_gap,
    l1_norm_measured,
)

ROTATION = OUSystem(np.array([[0.0, -1.0], [1.0, 0.0]]), np.eye(2))
STABLE2 = OUSystem(-np.eye(2), np.eye(2))
UNSTABLE1 = OUSystem(np.array([[0.5]]), np.array([[1.0]]))
JORDAN = OUSystem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2))


class TestWitnessReport:
    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            WitnessReport(space="BUC", witness={}, lower_bound=1.5,
                          upper_bound=1.0)

    def test_rejects_unknown_space(self):
        with pytest.raises(ValueError):
            WitnessReport(space="L2", witness={}, lower_bound=0.0)


class TestCosineWitness:
    def test_exact_two_when_solvable(self):
        rep = cosine_witness(ROTATION, 1.0, 0.3)
        assert not rep.witness["fallback"]
        assert rep.lower_bound == 2.0

    def test_fallback_close_to_two(self):
        # scalar flows are collinear, so the phase constraints cannot be
        # met exactly and the 1-D maximization takes over
        rep = cosine_witness(STABLE2, 1.0, 0.5)
        assert rep.witness["fallback"]
        assert rep.lower_bound >= 1.99

    def test_equal_flow_rejected(self):
        with pytest.raises(InapplicableError):
            cosine_witness(ROTATION, 2.0 * math.pi, 0.0)


class TestBucGap:
    def test_rotation_periodic_times_half(self):
        rep = buc_gap(ROTATION, 2.0 * math.pi, 4.0 * math.pi)
        assert rep.witness["flow_equal"]
        assert abs(rep.lower_bound - 0.5) < 1e-10
        assert abs(rep.upper_bound - 0.5) < 1e-10

    def test_distinct_flows_reach_two(self):
        rep = buc_gap(STABLE2, 1.0, 0.5,
                      budget=Budget(max_evals=50_000))
        assert rep.lower_bound >= 1.999

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            buc_gap(STABLE2, -1.0, 0.5)


class TestDisjointBalls:
    @pytest.mark.parametrize("sys_", [STABLE2, UNSTABLE1, JORDAN])
    def test_certificate(self, sys_):
        balls = disjoint_balls_witness(sys_, 1.0, 0.5)
        assert balls.r > 0
        # certified: every point keeps at least distance r from one of
        # the two preimage targets
        assert balls.min_separation >= balls.r * (1 - 1e-9)

    def test_identity_flow_rejected(self):
        with pytest.raises(InapplicableError):
            disjoint_balls_witness(ROTATION, 2.0 * math.pi, 0.0)

    def test_time_order_enforced(self):
        with pytest.raises(DomainError):
            disjoint_balls_witness(STABLE2, 0.5, 1.0)


class TestLebesgueGap:
    @pytest.mark.parametrize("sys_", [UNSTABLE1, STABLE2, ROTATION])
    @pytest.mark.parametrize("ts", [(1.0, 0.5), (0.8, 0.1)])
    def test_drift_gap_exactly_two(self, sys_, ts):
        rep = l1_lebesgue_gap(sys_, ts[0], ts[1], semigroup="R")
        assert rep.lower_bound >= 2.0 - 1e-12
        assert rep.diagnostics["disjoint"]

    def test_ou_dilation_monotone(self):
        rep = l1_lebesgue_gap(STABLE2, 1.0, 0.5, semigroup="P",
                              rng=np.random.default_rng(7),
                              budget=Budget(max_evals=400_000))
        levels = rep.diagnostics["levels"]
        certified = [lv["certified"] for lv in levels]
        assert certified == sorted(certified)
        assert certified[-1] >= 1.9

    def test_scaled_drift_norm_identity(self):
        from oulab.fields import gaussian_bump

        f = gaussian_bump(np.array([1.0, -0.5]), width=0.7, amplitude=2.0)
        num = drift_l1_norm_measured(STABLE2, 0.6, f, [1.0, -0.5], 9.0)
        den = l1_norm_measured(f, [1.0, -0.5], 9.0, 2)
        scaled = math.exp(0.6 * np.trace(STABLE2.A)) * num / den
        assert abs(scaled - 1.0) < 1e-8


class TestInvariantGap:
    def test_monotone_and_large(self):
        rep = l1_invariant_gap(STABLE2, 1.0, 0.5,
                               rng=np.random.default_rng(11),
                               budget=Budget(max_evals=400_000))
        levels = rep.diagnostics["levels"]
        certified = [lv["certified"] for lv in levels]
        assert certified == sorted(certified)
        assert certified[-1] >= 1.9
        assert all(lv["std_error"] <= 0.01 for lv in levels)

    def test_equal_times_zero(self):
        rep = l1_invariant_gap(STABLE2, 1.0, 1.0)
        assert rep.lower_bound == 0.0 and rep.upper_bound == 0.0

    def test_requires_stability(self):
        from oulab.errors import StabilityError

        with pytest.raises(StabilityError):
            l1_invariant_gap(UNSTABLE1, 1.0, 0.5)


class TestDichotomy:
    def test_rotation_periodic(self):
        v = dichotomy_classify(ROTATION)
        assert v.kind == "periodic"
        assert abs(v.period - 2.0 * math.pi) < 1e-9

    def test_commensurable_blocks(self):
        A = np.zeros((4, 4))
        A[:2, :2] = [[0.0, -1.0], [1.0, 0.0]]
        A[2:, 2:] = [[0.0, -2.0], [2.0, 0.0]]
        v = dichotomy_classify(OUSystem(A, np.eye(4)))
        assert v.kind == "periodic"
        assert abs(v.period - 2.0 * math.pi) < 1e-9

    def test_stable_gap_everywhere(self):
        assert dichotomy_classify(STABLE2).kind == "gap-everywhere"

    def test_jordan_gap_everywhere(self):
        # purely imaginary (zero) but not semisimple
        v = dichotomy_classify(JORDAN)
        assert v.kind == "gap-everywhere"
        assert any(not e["semisimple"] for e in v.eigen_report)

    def test_incommensurable_gap_everywhere(self):
        A = np.zeros((4, 4))
        A[:2, :2] = [[0.0, -1.0], [1.0, 0.0]]
        w = math.sqrt(2.0)
        A[2:, 2:] = [[0.0, -w], [w, 0.0]]
        v = dichotomy_classify(OUSystem(A, np.eye(4)))
        assert v.kind == "gap-everywhere"

    def test_zero_drift_degenerate_period(self):
        v = dichotomy_classify(OUSystem(np.zeros((2, 2)), np.eye(2)))
        assert v.kind == "periodic"
        assert v.period == 0.0

    def test_report_carries_tolerance(self):
        v = dichotomy_classify(ROTATION, tolerance=1e-9)
        assert all(e["tolerance"] == 1e-9 for e in v.eigen_report)
