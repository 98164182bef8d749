import pytest
from hypothesis import given, strategies as st

from spx.quality import BBox, Detection, QualityScore, dice, match_and_score


def box(x1, y1, x2, y2):
    return BBox(float(x1), float(y1), float(x2), float(y2))


boxes = st.builds(
    lambda x1, y1, w, h: BBox(x1, y1, x1 + w, y1 + h),
    st.floats(-50, 50), st.floats(-50, 50),
    st.floats(0.1, 100), st.floats(0.1, 100),
)


class TestDice:
    def test_identity(self):
        assert dice(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert dice(box(0, 0, 10, 10), box(20, 20, 30, 30)) == 0.0

    def test_half_overlap(self):
        assert dice(box(0, 0, 10, 10), box(0, 0, 10, 5)) == pytest.approx(2 / 3)

    @given(boxes, boxes)
    def test_symmetric_and_bounded(self, a, b):
        assert dice(a, b) == pytest.approx(dice(b, a))
        assert 0.0 <= dice(a, b) <= 1.0 + 1e-12

    @given(boxes)
    def test_self_dice_is_one(self, a):
        assert dice(a, a) == pytest.approx(1.0)


class TestMatchAndScore:
    def test_perfect_match(self):
        gt = box(0, 0, 10, 10)
        q = match_and_score([Detection(gt, 0.9)], gt)
        assert q == QualityScore(pytest.approx(0.9), 0)

    def test_no_detections(self):
        q = match_and_score([], box(0, 0, 10, 10))
        assert q.value == 0.0 and q.matched_index is None

    def test_max_dice_rule_not_max_q(self):
        gt = box(0, 0, 10, 10)
        dets = [
            Detection(box(0, 0, 10, 5), 0.9),    # dice 2/3
            Detection(box(0, 9, 10, 19), 1.0),   # dice 0.1 but higher score
        ]
        q = match_and_score(dets, gt)
        assert q.matched_index == 0
        assert q.value == pytest.approx(2 / 3 * 0.9)

    def test_tie_break_higher_score_then_lower_index(self):
        gt = box(0, 0, 10, 10)
        same = box(0, 0, 10, 5)
        q = match_and_score([Detection(same, 0.4), Detection(same, 0.8)], gt)
        assert q.matched_index == 1
        q = match_and_score([Detection(same, 0.8), Detection(same, 0.8)], gt)
        assert q.matched_index == 0

    def test_monotone_in_score(self):
        gt = box(0, 0, 10, 10)
        det_box = box(0, 0, 10, 8)
        values = [match_and_score([Detection(det_box, s)], gt).value
                  for s in (0.1, 0.5, 0.9)]
        assert values == sorted(values)

    def test_permutation_invariant_value(self):
        gt = box(0, 0, 10, 10)
        dets = [Detection(box(0, 0, 10, 5), 0.9), Detection(box(5, 5, 15, 15), 0.7),
                Detection(box(0, 0, 10, 10), 0.3)]
        base = match_and_score(dets, gt).value
        assert match_and_score(dets[::-1], gt).value == pytest.approx(base)

    def test_min_score_filter(self):
        gt = box(0, 0, 10, 10)
        dets = [Detection(gt, 0.2)]
        assert match_and_score(dets, gt, min_score=0.5).value == 0.0
        assert match_and_score(dets, gt).value == pytest.approx(0.2)

    def test_label_filter(self):
        gt = box(0, 0, 10, 10)
        dets = [Detection(gt, 0.9, "car"), Detection(box(0, 0, 10, 5), 0.9, "pedestrian")]
        q = match_and_score(dets, gt, label="pedestrian")
        assert q.matched_index == 1
