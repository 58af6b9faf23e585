#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
α-IoU 损失测试
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings, seed
from hypothesis import strategies as st

from app.models.box_models import Box
from app.models.loss_models import LossKind, LossSpec
from app.services.alpha_losses import (
    absolute_grad_weight, absolute_loss_weight, box_cox_loss, check_alpha_range, curve_samples,
    loss_eval, loss_value, relative_grad_weight, relative_loss_weight, turning_point
)
from app.services.geometry import iou
from app.utils.exceptions import LossSpecError
from conftest import feasible_boxes

A = Box.from_corners(0.0, 0.0, 0.5, 0.5)
B = Box.from_corners(0.25, 0.25, 0.75, 0.75)
ALL_KINDS = list(LossKind)


class TestLossSpec:

    def test_alpha2_defaults_to_alpha1(self):
        assert LossSpec(LossKind.ALPHA_GIOU, alpha1=3.0).alpha2 == 3.0

    @pytest.mark.parametrize("alpha1, alpha2", [(0.0, 1.0), (-1.0, None), (1.0, 0.0), (float('nan'), 1.0)])
    def test_rejects_non_positive_powers(self, alpha1, alpha2):
        with pytest.raises(LossSpecError):
            LossSpec(LossKind.ALPHA_IOU, alpha1=alpha1, alpha2=alpha2)

    @pytest.mark.parametrize("text, kind", [
        ('AlphaGIoU', LossKind.ALPHA_GIOU),
        ('alpha-diou', LossKind.ALPHA_DIOU),
        ('ciou', LossKind.ALPHA_CIOU),
        ('LogIoU', LossKind.LOG_IOU),
        ('alpha_iou', LossKind.ALPHA_IOU),
    ])
    def test_kind_aliases(self, text, kind):
        assert LossKind.parse(text) is kind

    def test_unknown_kind(self):
        with pytest.raises(LossSpecError):
            LossKind.parse('focal')

    def test_label(self):
        assert LossSpec('giou', 3.0).label() == 'alpha_giou(α=3)'
        assert LossSpec('giou', 3.0, 1.0).label() == 'alpha_giou(α₁=3,α₂=1)'


class TestLossValue:

    def test_recovers_iou_loss(self):
        assert loss_value(LossSpec(LossKind.ALPHA_IOU, 1.0), A, B) == pytest.approx(1 - 1 / 7, rel=1e-12)

    def test_alpha_three(self):
        assert loss_value(LossSpec(LossKind.ALPHA_IOU, 3.0), A, B) == pytest.approx(342 / 343, rel=1e-12)

    def test_giou(self):
        assert loss_value(LossSpec(LossKind.ALPHA_GIOU, 1.0), A, B) == pytest.approx(68 / 63, rel=1e-12)

    def test_diou(self):
        assert loss_value(LossSpec(LossKind.ALPHA_DIOU, 1.0), A, B) == pytest.approx(6 / 7 + 1 / 9, rel=1e-12)

    def test_ciou_same_aspect_equals_diou(self):
        diou = loss_value(LossSpec(LossKind.ALPHA_DIOU, 2.0), A, B)
        ciou = loss_value(LossSpec(LossKind.ALPHA_CIOU, 2.0), A, B)
        assert ciou == pytest.approx(diou, rel=1e-12)

    def test_log_iou(self):
        assert loss_value(LossSpec(LossKind.LOG_IOU), A, B) == pytest.approx(math.log(7), rel=1e-12)

    def test_log_iou_clamps_disjoint(self):
        far = Box(0.9, 0.9, 0.1, 0.1)
        assert loss_value(LossSpec(LossKind.LOG_IOU), A, far) == pytest.approx(-math.log(1e-7))

    def test_log_iou_custom_floor(self):
        far = Box(0.9, 0.9, 0.1, 0.1)
        spec = LossSpec(LossKind.LOG_IOU, log_eps=1e-3)
        assert loss_value(spec, A, far) == pytest.approx(-math.log(1e-3))
        assert loss_eval(spec, A, far).d_iou == pytest.approx(-1e3)

    @pytest.mark.parametrize("eps", [0.0, 1.0, -1e-3])
    def test_log_eps_range(self, eps):
        with pytest.raises(LossSpecError):
            LossSpec(LossKind.LOG_IOU, log_eps=eps)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
    def test_identical_boxes_zero(self, kind, alpha):
        box = Box(0.4, 0.6, 0.2, 0.3)
        assert loss_value(LossSpec(kind, alpha), box, box) == 0.0

    def test_box_cox_scaling(self):
        plain = loss_value(LossSpec(LossKind.ALPHA_IOU, 3.0), A, B)
        scaled = loss_value(LossSpec(LossKind.ALPHA_IOU, 3.0, box_cox=True), A, B)
        assert scaled == pytest.approx(plain / 3.0, rel=1e-12)

    @seed(11)
    @settings(max_examples=300)
    @given(feasible_boxes(), feasible_boxes(), st.sampled_from(ALL_KINDS),
           st.floats(min_value=0.1, max_value=10.0), st.floats(min_value=0.1, max_value=10.0))
    def test_non_negative(self, pred, gt, kind, alpha1, alpha2):
        assert loss_value(LossSpec(kind, alpha1, alpha2), pred, gt) >= 0.0

    @seed(12)
    @settings(max_examples=300)
    @given(feasible_boxes(), feasible_boxes(), feasible_boxes(), st.floats(min_value=0.1, max_value=10.0))
    def test_order_preserving(self, bi, bj, gt, alpha):
        iou_i, iou_j = iou(bi, gt), iou(bj, gt)
        if iou_i >= iou_j:
            return
        spec = LossSpec(LossKind.ALPHA_IOU, alpha)
        loss_i, loss_j = loss_value(spec, bi, gt), loss_value(spec, bj, gt)
        assert loss_i >= loss_j
        # 差值低于双精度分辨率时只要求不反序
        if iou_j ** alpha - iou_i ** alpha > 1e-12:
            assert loss_i > loss_j

    @seed(13)
    @settings(max_examples=300)
    @given(feasible_boxes(), feasible_boxes(), st.sampled_from([LossKind.ALPHA_GIOU, LossKind.ALPHA_DIOU]),
           st.floats(min_value=0.1, max_value=10.0))
    def test_penalty_term_below_one(self, pred, gt, kind, alpha2):
        spec = LossSpec(kind, alpha1=1.0, alpha2=alpha2)
        iou_part = 1.0 - iou(pred, gt)
        assert loss_value(spec, pred, gt) - iou_part <= 1.0 + 1e-12


class TestLossEval:

    @pytest.mark.parametrize("value", [0.05, 0.3, 0.7, 0.99])
    def test_iou_loss_has_constant_gradient(self, value):
        pred, gt = self._pair_with_iou(value)
        assert loss_eval(LossSpec(LossKind.ALPHA_IOU, 1.0), pred, gt).d_iou == pytest.approx(-1.0)

    def test_turning_point_gradient_matches_iou_loss(self):
        pred, gt = self._pair_with_iou(0.5)
        assert iou(pred, gt) == pytest.approx(0.5, rel=1e-12)
        assert loss_eval(LossSpec(LossKind.ALPHA_IOU, 2.0), pred, gt).d_iou == pytest.approx(-1.0, rel=1e-9)

    @seed(14)
    @settings(max_examples=200)
    @given(feasible_boxes(), feasible_boxes(), st.sampled_from(ALL_KINDS), st.floats(min_value=0.5, max_value=5.0))
    def test_d_iou_non_positive(self, pred, gt, kind, alpha):
        result = loss_eval(LossSpec(kind, alpha), pred, gt)
        assert result.d_iou <= 0.0
        assert result.value == loss_value(LossSpec(kind, alpha), pred, gt)

    def test_disjoint_alpha_iou_has_no_gradient(self):
        result = loss_eval(LossSpec(LossKind.ALPHA_IOU, 3.0), Box(0.2, 0.5, 0.2, 0.2), Box(0.8, 0.5, 0.2, 0.2))
        assert result.value == 1.0
        assert np.all(result.grad_pred == 0.0)

    def test_disjoint_giou_pulls_towards_gt(self):
        result = loss_eval(LossSpec(LossKind.ALPHA_GIOU, 3.0), Box(0.3, 0.5, 0.2, 0.2), Box(0.7, 0.5, 0.2, 0.2))
        # 沿 −grad 方向中心右移
        assert result.grad_pred[0] < 0.0

    def test_identical_boxes_zero_gradient(self):
        box = Box(0.5, 0.5, 0.3, 0.2)
        for kind in ALL_KINDS:
            result = loss_eval(LossSpec(kind, 2.0), box, box)
            assert np.all(result.grad_pred == 0.0)

    @staticmethod
    def _pair_with_iou(value):
        """同心正方形，面积比即 IoU"""
        gt = Box(0.5, 0.5, 0.4, 0.4)
        side = 0.4 * math.sqrt(value)
        return Box(0.5, 0.5, side, side), gt


class TestWeights:

    def test_relative_loss_weight(self):
        assert relative_loss_weight(3.0, 0.0) == 1.0
        assert relative_loss_weight(3.0, 1.0) == 3.0
        assert relative_loss_weight(2.0, 0.5) == pytest.approx(1.5)
        assert relative_loss_weight(3.0, 1 - 1e-9) == pytest.approx(3.0, rel=1e-6)

    def test_relative_grad_weight(self):
        assert relative_grad_weight(3.0, 0.9) == pytest.approx(2.43)
        assert relative_grad_weight(2.0, 0.5) == pytest.approx(1.0)
        assert relative_grad_weight(0.5, 0.0) == math.inf
        for value in np.linspace(0.0, 1.0, 11):
            assert relative_grad_weight(1.0, float(value)) == 1.0

    def test_absolute_loss_weight_extremes(self):
        grid = np.linspace(0.0, 1.0, 10001)
        w2 = np.array([absolute_loss_weight(2.0, float(u)) for u in grid])
        assert grid[np.argmax(w2)] == pytest.approx(0.5)
        assert w2.max() == pytest.approx(0.25)
        w_half = np.array([absolute_loss_weight(0.5, float(u)) for u in grid])
        assert grid[np.argmin(w_half)] == pytest.approx(0.25)
        assert w_half.min() == pytest.approx(-0.25)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 2.0, 3.0])
    def test_absolute_loss_weight_endpoints(self, alpha):
        assert absolute_loss_weight(alpha, 0.0) == 0.0
        assert absolute_loss_weight(alpha, 1.0) == 0.0

    @pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0, 5.0])
    def test_monotone_above_one(self, alpha):
        grid = np.linspace(0.0, 1.0, 501)
        wl = [relative_loss_weight(alpha, float(u)) for u in grid]
        wg = [relative_grad_weight(alpha, float(u)) for u in grid]
        assert all(b >= a - 1e-12 for a, b in zip(wl, wl[1:]))
        assert all(b >= a - 1e-12 for a, b in zip(wg, wg[1:]))

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
    def test_monotone_below_one(self, alpha):
        grid = np.linspace(0.0, 1.0, 501)
        wl = [relative_loss_weight(alpha, float(u)) for u in grid]
        wg = [relative_grad_weight(alpha, float(u)) for u in grid]
        assert all(b <= a + 1e-12 for a, b in zip(wl, wl[1:]))
        assert all(b <= a + 1e-12 for a, b in zip(wg, wg[1:]))

    @pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0, 5.0])
    def test_sign_structure_above_one(self, alpha):
        grid = np.linspace(0.001, 0.999, 999)
        assert all(absolute_loss_weight(alpha, float(u)) >= 0.0 for u in grid)
        signs = np.sign([absolute_grad_weight(alpha, float(u)) for u in grid])
        signs = signs[signs != 0]
        assert np.count_nonzero(np.diff(signs)) == 1
        tp = turning_point(alpha)
        assert math.exp(-1) < tp < 1.0
        assert absolute_grad_weight(alpha, tp) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
    def test_sign_structure_below_one(self, alpha):
        grid = np.linspace(0.001, 0.999, 999)
        assert all(absolute_loss_weight(alpha, float(u)) <= 0.0 for u in grid)
        signs = np.sign([absolute_grad_weight(alpha, float(u)) for u in grid])
        signs = signs[signs != 0]
        assert np.count_nonzero(np.diff(signs)) == 1
        assert 0.0 < turning_point(alpha) < math.exp(-1)

    def test_invalid_inputs(self):
        with pytest.raises(LossSpecError):
            relative_loss_weight(0.0, 0.5)
        with pytest.raises(LossSpecError):
            relative_grad_weight(1.0, 1.5)


class TestTurningPoint:

    def test_values(self):
        assert turning_point(2.0) == pytest.approx(0.5, rel=1e-12)
        assert turning_point(3.0) == pytest.approx(3 ** -0.5, rel=1e-12)
        assert turning_point(1.0) == pytest.approx(math.exp(-1), rel=1e-12)
        assert turning_point(1.0 + 1e-10) == pytest.approx(math.exp(-1), rel=1e-12)

    def test_continuous_near_one(self):
        assert turning_point(1.0 + 1e-6) == pytest.approx(math.exp(-1), rel=1e-5)


class TestBoxCoxLimit:

    def test_converges_to_log(self):
        grid = [k / 50.0 for k in range(1, 51)]
        gaps = []
        for alpha in (1e-1, 1e-2, 1e-3):
            gaps.append(max(abs(box_cox_loss(alpha, u) + math.log(u)) for u in grid))
        assert gaps[0] > gaps[1] > gaps[2]
        assert max(abs(box_cox_loss(1e-6, u) + math.log(u)) for u in grid) <= 1e-5

    def test_zero_alpha_is_log(self):
        assert box_cox_loss(0.0, 0.5) == pytest.approx(math.log(2))
        assert box_cox_loss(0.0, 0.0) == math.inf


class TestCurveSamples:

    def test_shape_and_endpoints(self):
        rows = curve_samples(LossKind.ALPHA_IOU, [0.5, 1.0, 3.0], 101)
        assert len(rows) == 303
        by_alpha = {}
        for row in rows:
            by_alpha.setdefault(row['alpha'], []).append(row)
        for row in by_alpha[1.0]:
            assert row['loss'] == pytest.approx(1.0 - row['iou'])
            assert row['grad_mag'] == 1.0
        last = by_alpha[3.0][-1]
        assert (last['iou'], last['loss'], last['grad_mag']) == (1.0, 0.0, 3.0)
        assert by_alpha[0.5][0]['grad_mag'] == math.inf

    def test_log_iou_single_series(self):
        rows = curve_samples('log_iou', [1.0, 2.0], 11)
        assert len(rows) == 11
        assert all(row['alpha'] == 0.0 for row in rows)

    def test_needs_two_points(self):
        with pytest.raises(LossSpecError):
            curve_samples(LossKind.ALPHA_IOU, [1.0], 1)

    def test_alpha_range_check(self):
        assert check_alpha_range(10.0) == 10.0
        with pytest.raises(LossSpecError):
            check_alpha_range(12.0)
