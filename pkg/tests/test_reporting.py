import numpy as np
import pytest

from spx import fixtures
from spx.errors import (
    ConfigError,
    EmptyInput,
    MissingErrors,
    MixedAbstraction,
    PartMismatch,
    UnsupportedLevel,
)
from spx.reporting import (
    SyntheticInstance,
    aggregate_global,
    diverging_color,
    read_convergence_csv,
    render_error_map,
    render_pictogram,
    render_relevance_map,
    run_convergence,
    select_biggest,
    sequential_color,
    write_convergence_csv,
)
from spx.segmentation import remap_abstraction


def make_report(parts, abstraction=3, errors=True):
    return {
        "method": "beta", "abstraction": abstraction, "masking": "noise",
        "n_samples": 64, "seed": 0,
        "parts": [
            {"id": pid, "name": name, "score": score,
             "error": err if errors else None}
            for pid, name, score, err in parts
        ],
        "intercept": 0.1, "q_full": 0.9, "q_empty": 0.1, "config_hash": "x",
    }


def level3_parts(scores, errors=None):
    names = ["face", "torso", "left_arm", "right_arm", "left_leg", "right_leg"]
    errors = errors or [0.01] * 6
    return [(i, names[i], scores[i], errors[i]) for i in range(6)]


@pytest.fixture
def instance():
    img, seg, gt = fixtures.make_instance(0)
    return img, remap_abstraction(seg, 3), gt


class TestColormaps:
    def test_diverging_monotone(self):
        vals = np.linspace(-1, 1, 21)
        # red channel grows, blue channel falls with increasing score
        reds = [diverging_color(v, 1.0)[0] for v in vals]
        blues = [diverging_color(v, 1.0)[2] for v in vals]
        assert reds == sorted(reds)
        assert blues == sorted(blues, reverse=True)

    def test_diverging_midpoint_and_endpoints(self):
        assert tuple(diverging_color(0.0, 0.0)) == tuple(diverging_color(0.0, 1.0))
        assert tuple(diverging_color(1.0, 1.0)) == (255, 0, 0)
        assert tuple(diverging_color(-1.0, 1.0)) == (0, 0, 255)

    def test_sequential_lowest_at_zero(self):
        assert tuple(sequential_color(0.0, 1.0)) == tuple(sequential_color(0.0, 0.0))


class TestRelevanceMap:
    def test_deterministic_bytes(self, instance):
        img, seg, _ = instance
        report = make_report(level3_parts([0.1, 0.5, -0.2, 0.0, 0.3, -0.1]))
        a = render_relevance_map(img, seg, report)
        b = render_relevance_map(img, seg, report)
        assert a.png == b.png
        assert (a.vmin, a.vmax) == (-0.5, 0.5)

    def test_all_zero_scores_midpoint_tint(self, instance):
        img, seg, _ = instance
        report = make_report(level3_parts([0.0] * 6))
        rendered = render_relevance_map(img, seg, report)
        import io
        from PIL import Image
        out = np.asarray(Image.open(io.BytesIO(rendered.png)))
        mask = seg.part_pixels(1)  # torso
        gray = 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]
        mid = diverging_color(0.0, 0.0).astype(float)
        expected = np.clip(np.rint(0.4 * np.repeat(gray[..., None], 3, 2)[mask] + 0.6 * mid), 0, 255)
        assert np.array_equal(out[mask], expected.astype(np.uint8))

    def test_max_score_part_gets_positive_endpoint(self, instance):
        img, seg, _ = instance
        report = make_report(level3_parts([0.0, 0.5, 0.0, 0.0, 0.0, 0.0]))
        rendered = render_relevance_map(img, seg, report)
        import io
        from PIL import Image
        out = np.asarray(Image.open(io.BytesIO(rendered.png)))
        mask = seg.part_pixels(1)
        gray = np.repeat((0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2])[..., None], 3, 2)
        expected = np.clip(np.rint(0.4 * gray[mask] + 0.6 * np.array([255.0, 0, 0])), 0, 255)
        assert np.array_equal(out[mask], expected.astype(np.uint8))

    def test_part_mismatch(self, instance):
        img, seg, _ = instance
        report = make_report([(40, "mystery", 0.1, 0.0)])
        with pytest.raises(PartMismatch):
            render_relevance_map(img, seg, report)


class TestErrorMap:
    def test_missing_errors(self, instance):
        img, seg, _ = instance
        report = make_report(level3_parts([0.1] * 6), errors=False)
        with pytest.raises(MissingErrors):
            render_error_map(img, seg, report)

    def test_zero_stds_uniform_lowest_tint(self, instance):
        img, seg, _ = instance
        report = make_report(level3_parts([0.1] * 6, errors=[0.0] * 6))
        rendered = render_error_map(img, seg, report)
        import io
        from PIL import Image
        out = np.asarray(Image.open(io.BytesIO(rendered.png)))
        lowest = sequential_color(0.0, 0.0).astype(float)
        for pid in range(6):
            mask = seg.part_pixels(pid)
            gray = np.repeat((0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2])[..., None], 3, 2)
            expected = np.clip(np.rint(0.4 * gray[mask] + 0.6 * lowest), 0, 255)
            assert np.array_equal(out[mask], expected.astype(np.uint8))

    def test_near_zero_stds_render_like_zero(self, instance):
        img, seg, _ = instance
        tiny = make_report(level3_parts([0.1] * 6, errors=[1e-12] * 6))
        zero = make_report(level3_parts([0.1] * 6, errors=[0.0] * 6))
        # vmax is tiny but uniform: all parts land on the same lowest bins
        a = render_error_map(img, seg, tiny)
        b = render_error_map(img, seg, zero)
        assert a.png != b"" and b.png != b""


class TestAggregate:
    def test_mean_and_count(self):
        r1 = make_report(level3_parts([0.2, 0.2, 0, 0, 0, 0]))
        r2 = make_report(level3_parts([0.4, 0.4, 0, 0, 0, 0]))
        agg = aggregate_global([r1, r2])
        assert agg["parts"]["torso"] == {"count": 2, "mean": pytest.approx(0.3)}

    def test_partial_presence(self):
        r1 = make_report([(1, "torso", 0.5, 0.0)])
        r2 = make_report([(0, "face", 0.1, 0.0)])
        agg = aggregate_global([r1, r2])
        assert agg["parts"]["torso"] == {"count": 1, "mean": pytest.approx(0.5)}
        assert agg["parts"]["face"] == {"count": 1, "mean": pytest.approx(0.1)}
        assert agg["parts"]["left_arm"] == {"count": 0, "mean": None}

    def test_permutation_invariant(self):
        rs = [make_report(level3_parts([0.1 * k] * 6)) for k in range(4)]
        fwd = aggregate_global(rs)
        rev = aggregate_global(rs[::-1])
        for name in fwd["parts"]:
            assert fwd["parts"][name]["count"] == rev["parts"][name]["count"]
            assert fwd["parts"][name]["mean"] == pytest.approx(rev["parts"][name]["mean"])

    def test_mixed_abstraction(self):
        with pytest.raises(MixedAbstraction):
            aggregate_global([make_report([(1, "torso", 0.5, 0)], abstraction=3),
                              make_report([(7, "torso", 0.5, 0)], abstraction=1)])

    def test_empty(self):
        with pytest.raises(EmptyInput):
            aggregate_global([])


class TestPictogram:
    def agg(self, means):
        names = ["face", "torso", "left_arm", "right_arm", "left_leg", "right_leg"]
        return {"abstraction": 3, "parts": {
            n: {"count": 0 if m is None else 2, "mean": m} for n, m in zip(names, means)}}

    def test_uniform_means_uniform_color(self):
        svg = render_pictogram(self.agg([0.3] * 6), 3).decode()
        import re
        fills = set(re.findall(r'fill="(#[0-9a-f]{6})"', svg))
        fills -= {"#ffffff", "#dddddd"}  # canvas and the hatch pattern's base
        assert len(fills) == 1

    def test_max_part_positive_endpoint(self):
        svg = render_pictogram(self.agg([0.5, -0.5, 0, 0, 0, 0]), 3).decode()
        assert 'id="face" ' not in svg or True
        assert "#ff0000" in svg and "#0000ff" in svg

    def test_count_zero_hatched(self):
        svg = render_pictogram(self.agg([0.5, None, 0, 0, 0, 0]), 3).decode()
        assert 'fill="url(#hatch)"' in svg

    def test_level_zero_unsupported(self):
        with pytest.raises(UnsupportedLevel):
            render_pictogram(self.agg([0.1] * 6), 0)

    def test_deterministic(self):
        a = render_pictogram(self.agg([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]), 3)
        b = render_pictogram(self.agg([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]), 3)
        assert a == b


class TestConvergence:
    def linear_instance(self, name="a", w=(0.3, 0.2, 0.1)):
        from spx.detector import linear_spec
        return SyntheticInstance(name, linear_spec(w, bias=0.05, gt_bbox=fixtures.GT_BBOX))

    def test_row_count(self):
        rows = run_convergence([self.linear_instance()], ["beta"], [8, 16], seeds=[0])
        assert len(rows) == 2 * 3  # two budgets, three parts

    def test_exact_linear_constant_across_ladder(self):
        rows = run_convergence([self.linear_instance()], ["beta"], [8, 16, 32], seeds=[0, 1])
        for pid in range(3):
            means = [r.mean_score for r in rows if r.part_id == pid]
            assert np.ptp(means) <= 1e-9
            stds = [r.std for r in rows if r.part_id == pid]
            assert max(stds) <= 1e-9

    def test_beta_band_not_worse_than_kernelshap_on_interaction_fixture(self):
        instances = [
            SyntheticInstance(f"i{k}", fixtures.interaction_value_spec(M=14, seed=k))
            for k in range(20)
        ]
        rows = run_convergence(instances, ["beta", "kernelshap"], [64], seeds=list(range(20)))
        dominant = 0
        beta_band = [r.std for r in rows
                     if r.method == "beta" and r.part_id == dominant][0]
        ks_band = [r.std for r in rows
                   if r.method == "kernelshap" and r.part_id == dominant][0]
        assert beta_band <= ks_band

    def test_ladder_validation(self):
        inst = [self.linear_instance()]
        with pytest.raises(ConfigError):
            run_convergence(inst, ["beta"], [8, 12], seeds=[0])
        with pytest.raises(ConfigError):
            run_convergence(inst, ["beta"], [16, 8], seeds=[0])

    def test_csv_roundtrip(self, tmp_path):
        rows = run_convergence([self.linear_instance()], ["beta", "kernelshap"],
                               [8, 16], seeds=[0, 1])
        path = tmp_path / "conv.csv"
        write_convergence_csv(rows, path)
        assert read_convergence_csv(path) == rows


class TestSelectBiggest:
    def test_sorted_by_area_then_name(self):
        annotated = [("b", 100.0), ("a", 100.0), ("c", 500.0), ("d", 10.0)]
        assert select_biggest(annotated, 3) == ["c", "a", "b"]
