from __future__ import annotations

import numpy as np
import pytest

from vtgkit.encoding import (
    BudgetError,
    EncodingScheme,
    FramePlan,
    PatchGeometry,
    TimestampFormat,
    build_artifact,
    overlay_spec,
    plan_frames,
    render_interleaved,
    render_noninterleaved,
)


class TestPlanFrames:
    def test_sixty_second_default_budget(self):
        plan = plan_frames(60.0, fps=2.0, min_tokens=16, total_tokens=3584)
        assert plan.n_frames == 120
        assert plan.n_groups == 60
        assert plan.per_group_tokens == 3584 // 60 == 59
        assert plan.per_group_tokens >= 16

    def test_one_second_single_group(self):
        plan = plan_frames(1.0, fps=2.0, min_tokens=16, total_tokens=3584,
                           native_resolution=(640, 480))
        assert plan.n_frames == 2
        assert plan.frame_times == (0.0, 0.5)
        assert plan.n_groups == 1
        native_cap = PatchGeometry().tokens_for(640, 480)
        assert plan.per_group_tokens == min(3584, native_cap)

    def test_scaled_budget_110s_resolution(self):
        # 110 s at 2 fps -> 110 merged groups; 14336 tokens -> 130/group;
        # the largest square at 28 px/token is 11x11 patches = 308x308,
        # within one patch (28 px) of the documented ~320x320
        plan = plan_frames(110.0, fps=2.0, min_tokens=64, total_tokens=14336)
        assert plan.n_groups == 110
        assert plan.per_group_tokens == 130
        w, h = plan.effective_resolution
        assert abs(w - 320) <= 28 and abs(h - 320) <= 28

    def test_infeasible_budget_reports_max_duration(self):
        with pytest.raises(BudgetError) as exc_info:
            plan_frames(1000.0, fps=2.0, min_tokens=16, total_tokens=3584)
        max_dur = exc_info.value.max_feasible_duration
        assert max_dur == pytest.approx((3584 // 16) * 2 / 2.0)
        plan_frames(max_dur, fps=2.0, min_tokens=16, total_tokens=3584)  # boundary feasible

    def test_budget_safety_property(self):
        rng = np.random.default_rng(0)
        checked = 0
        while checked < 1000:
            duration = float(rng.uniform(0.2, 400))
            fps = float(rng.choice([1.0, 2.0, 4.0]))
            min_tokens = int(rng.integers(4, 128))
            total_tokens = int(rng.integers(min_tokens, 20_000))
            native = (int(rng.integers(64, 1920)), int(rng.integers(64, 1080))) \
                if rng.random() < 0.5 else None
            try:
                plan = plan_frames(duration, fps=fps, min_tokens=min_tokens,
                                   total_tokens=total_tokens, native_resolution=native)
            except BudgetError:
                continue
            assert plan.per_group_tokens >= min_tokens
            assert plan.n_groups * plan.per_group_tokens <= max(
                total_tokens, plan.n_groups * min_tokens)
            assert plan.n_groups * min(plan.per_group_tokens, total_tokens // plan.n_groups) \
                <= total_tokens
            # fitted resolution stays within the group budget
            geom = PatchGeometry()
            w, h = plan.effective_resolution
            assert geom.tokens_for(w, h) <= plan.per_group_tokens
            checked += 1

    def test_strictly_increasing_times_at_fps_spacing(self):
        plan = plan_frames(10.3, fps=2.0)
        diffs = np.diff(plan.frame_times)
        assert np.allclose(diffs, 0.5)
        assert plan.frame_times[-1] < 10.3

    def test_determinism(self):
        a = plan_frames(73.7, fps=2.0, min_tokens=16, total_tokens=3584)
        b = plan_frames(73.7, fps=2.0, min_tokens=16, total_tokens=3584)
        assert a == b


class TestRenderInterleaved:
    def test_raw_seconds_prefixes(self):
        plan = plan_frames(3.0, fps=2.0)  # 6 frames, 3 groups
        assert render_interleaved(plan) == ["0.0s", "1.0s", "2.0s"]

    def test_frame_index_prefixes(self):
        plan = plan_frames(3.0, fps=2.0)
        assert render_interleaved(plan, TimestampFormat.FRAME_INDEX) == ["1", "2", "3"]

    def test_empty_plan_errors(self):
        empty = FramePlan((), 1.0, 2.0, 2, 16, (28, 28))
        with pytest.raises(ValueError):
            render_interleaved(empty)

    def test_prefix_count_and_monotonicity(self):
        plan = plan_frames(33.4, fps=2.0)
        prefixes = render_interleaved(plan)
        assert len(prefixes) == plan.n_groups
        times = [float(p[:-1]) for p in prefixes]
        assert times == sorted(times) and len(set(times)) == len(times)


class TestRenderNoninterleaved:
    def test_exact_template(self):
        plan = plan_frames(1.0, fps=2.0)
        assert render_noninterleaved(plan) == (
            "This video samples 2 frames of a 1.0-second video at 0.0, 0.5 seconds."
        )

    def test_times_round_trip(self):
        plan = plan_frames(7.0, fps=2.0)
        text = render_noninterleaved(plan)
        listed = text.split(" at ")[1].removesuffix(" seconds.")
        times = tuple(float(t) for t in listed.split(", "))
        assert times == plan.frame_times

    def test_empty_plan_errors(self):
        empty = FramePlan((), 1.0, 2.0, 2, 16, (28, 28))
        with pytest.raises(ValueError):
            render_noninterleaved(empty)


class TestOverlaySpec:
    def test_two_frame_descriptors(self):
        plan = plan_frames(1.0, fps=2.0)
        spec = overlay_spec(plan)
        assert [d["text"] for d in spec] == ["0.0s", "0.5s"]
        assert all(d["color"] == "red" and d["size_pt"] == 40 and d["anchor"] == "bottom_left"
                   for d in spec)

    def test_empty_plan_empty_list(self):
        assert overlay_spec(FramePlan((), 1.0, 2.0, 2, 16, (28, 28))) == []


class TestArtifacts:
    def test_passthrough_has_no_payload(self):
        plan = plan_frames(4.0)
        artifact = build_artifact(plan, EncodingScheme.POSITION_EMBEDDING_PASSTHROUGH)
        assert artifact.payload is None

    def test_byte_identical_json(self):
        plan = plan_frames(42.0)
        a = build_artifact(plan, EncodingScheme.INTERLEAVED_PREFIX).to_json()
        b = build_artifact(plan_frames(42.0), EncodingScheme.INTERLEAVED_PREFIX).to_json()
        assert a == b

    def test_all_schemes_build(self):
        plan = plan_frames(10.0)
        for scheme in EncodingScheme:
            artifact = build_artifact(plan, scheme)
            assert artifact.to_dict()["scheme"] == scheme.value
