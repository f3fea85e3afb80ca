import numpy as np
import pytest

from poseguard.errors import ConfigError, StreamError
from poseguard.keypoints import (
    FEATURE_DIM,
    NUM_KEYPOINTS,
    BoundingBox,
    FeatureVector,
    Keypoint,
    PersonDetection,
    Skeleton,
)
from poseguard.tracking import (
    IouTracker,
    Track,
    TrackerConfig,
    VelocityHint,
    VelocityRuleConfig,
    apply_velocity_rule,
    iou,
    keypoint_velocity,
)


def box(x, y, w, h) -> BoundingBox:
    return BoundingBox(float(x), float(y), float(w), float(h))


def detection(bbox: BoundingBox) -> PersonDetection:
    cx, cy = bbox.x_min + bbox.width / 2, bbox.y_min + bbox.height / 2
    skeleton = Skeleton(tuple(Keypoint(cx, cy, 1.0) for _ in range(NUM_KEYPOINTS)))
    return PersonDetection(bbox=bbox, skeleton=skeleton)


class TestIou:
    def test_identical_boxes(self):
        assert iou(box(1, 2, 5, 5), box(1, 2, 5, 5)) == 1.0

    def test_disjoint_boxes(self):
        assert iou(box(0, 0, 5, 5), box(50, 50, 5, 5)) == 0.0

    def test_direct_arithmetic(self):
        # two 10x10 boxes shifted by half: intersection 50, union 150
        assert iou(box(0, 0, 10, 10), box(5, 0, 10, 10)) == pytest.approx(1.0 / 3.0)

    def test_symmetry_and_range_1000_random_pairs(self):
        rng = np.random.default_rng(50)
        for _ in range(1000):
            a = box(*rng.uniform(0, 50, size=2), *rng.uniform(1, 50, size=2))
            b = box(*rng.uniform(0, 50, size=2), *rng.uniform(1, 50, size=2))
            ab = iou(a, b)
            assert ab == iou(b, a)
            assert 0.0 <= ab <= 1.0


def greedy_oracle(track_boxes, det_boxes, threshold):
    """Brute-force greedy matching by descending IoU (independent of tracker)."""
    pairs = []
    for ti, tb in enumerate(track_boxes):
        for di, db in enumerate(det_boxes):
            v = iou(tb, db)
            if v >= threshold:
                pairs.append((v, ti, di))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    used_t, used_d, matches = set(), set(), {}
    for v, ti, di in pairs:
        if ti in used_t or di in used_d:
            continue
        used_t.add(ti)
        used_d.add(di)
        matches[di] = ti
    return matches


class TestTracker:
    def test_overlapping_detection_keeps_track_id(self):
        tracker = IouTracker()
        first = tracker.update(0, [detection(box(0, 0, 10, 10))])
        track_id = first.assignments[0].track_id
        second = tracker.update(1, [detection(box(3, 0, 10, 10))])  # IoU 7/13 > 0.3
        assert second.assignments[0].track_id == track_id
        assert second.new_track_ids == ()

    def test_non_overlap_eliminates_and_creates(self):
        tracker = IouTracker()
        first = tracker.update(0, [detection(box(0, 0, 10, 10))])
        old_id = first.assignments[0].track_id
        second = tracker.update(1, [detection(box(100, 100, 10, 10))])
        assert second.removed_track_ids == (old_id,)
        assert second.assignments[0].track_id != old_id

    def test_greedy_prefers_highest_overlap(self):
        # cross IoUs: (t1,d1) highest, then (t2,d2) is the only remaining pair
        tracker = IouTracker(TrackerConfig(iou_threshold=0.1))
        first = tracker.update(0, [detection(box(0, 0, 10, 10)), detection(box(20, 0, 10, 10))])
        t1, t2 = (a.track_id for a in first.assignments)
        d1 = detection(box(1, 0, 10, 10))  # strong overlap with t1, weak with t2
        d2 = detection(box(14, 0, 10, 10))  # overlaps both, more with t2
        second = tracker.update(1, [d1, d2])
        assert second.assignments[0].track_id == t1
        assert second.assignments[1].track_id == t2

    def test_matches_brute_force_greedy_oracle_on_random_scenes(self):
        rng = np.random.default_rng(51)
        for _ in range(100):
            n_tracks = int(rng.integers(1, 5))
            n_dets = int(rng.integers(1, 5))
            track_boxes = [box(*rng.uniform(0, 40, size=2), *rng.uniform(5, 20, size=2)) for _ in range(n_tracks)]
            det_boxes = [box(*rng.uniform(0, 40, size=2), *rng.uniform(5, 20, size=2)) for _ in range(n_dets)]

            tracker = IouTracker(TrackerConfig(iou_threshold=0.3, grace_frames=5))
            first = tracker.update(0, [detection(b) for b in track_boxes])
            ids = [a.track_id for a in first.assignments]
            second = tracker.update(1, [detection(b) for b in det_boxes])

            expected = greedy_oracle(track_boxes, det_boxes, 0.3)
            for di in range(n_dets):
                got = second.assignments[di].track_id
                if di in expected:
                    assert got == ids[expected[di]]
                else:
                    assert got not in ids  # fresh id

    def test_identity_persists_over_100_frames(self):
        tracker = IouTracker()
        seen_ids = set()
        for frame in range(100):
            b = box(frame * 1.0, 0, 20, 40)  # IoU with previous well above 0.3
            update = tracker.update(frame, [detection(b)])
            seen_ids.add(update.assignments[0].track_id)
        assert len(seen_ids) == 1

    def test_ids_never_reused(self):
        tracker = IouTracker()
        issued = []
        for frame in range(30):
            b = box((frame % 2) * 500.0, 0, 10, 10)  # jumps: every frame a new track
            update = tracker.update(frame, [detection(b)])
            issued.append(update.assignments[0].track_id)
        assert sorted(issued) == sorted(set(issued))
        assert issued == sorted(issued)

    def test_grace_period_keeps_unseen_track(self):
        tracker = IouTracker(TrackerConfig(grace_frames=2))
        first = tracker.update(0, [detection(box(0, 0, 10, 10))])
        track_id = first.assignments[0].track_id
        tracker.update(1, [])
        tracker.update(2, [])
        assert track_id in tracker.tracks
        update = tracker.update(3, [])
        assert track_id in update.removed_track_ids

    def test_non_monotone_frame_rejected(self):
        tracker = IouTracker()
        tracker.update(5, [])
        with pytest.raises(StreamError):
            tracker.update(5, [])

    def test_matching_is_a_matching(self):
        rng = np.random.default_rng(52)
        tracker = IouTracker(TrackerConfig(iou_threshold=0.1, grace_frames=3))
        for frame in range(20):
            dets = [
                detection(box(*rng.uniform(0, 30, size=2), *rng.uniform(5, 15, size=2)))
                for _ in range(int(rng.integers(0, 5)))
            ]
            update = tracker.update(frame, dets)
            ids = [t.track_id for t in update.assignments]
            assert len(ids) == len(set(ids))


def feature_with(positions: dict[int, tuple[float, float]]) -> FeatureVector:
    values = [0.5] * FEATURE_DIM
    for index, (x, y) in positions.items():
        values[2 * index] = x
        values[2 * index + 1] = y
    return FeatureVector(tuple(values))


class TestKeypointVelocity:
    def make_track(self, features_by_frame, fps=30.0) -> Track:
        track = Track(track_id=1)
        for frame, fv in features_by_frame:
            track.record_feature(frame, frame / fps, fv)
        return track

    def test_stationary_keypoints_zero(self):
        fv = feature_with({})
        track = self.make_track([(i, fv) for i in range(6)])
        assert keypoint_velocity(track, VelocityRuleConfig()) == 0.0

    def test_direct_arithmetic_at_30fps(self):
        # every tracked keypoint advances 0.1 normalized units per frame
        rule = VelocityRuleConfig(window_frames=2)
        frames = [(i, feature_with({k: (0.1 + 0.1 * i, 0.5) for k in rule.tracked_keypoints})) for i in range(3)]
        track = self.make_track(frames)
        assert keypoint_velocity(track, rule) == pytest.approx(3.0)

    def test_single_entry_not_applicable(self):
        track = self.make_track([(0, feature_with({}))])
        assert keypoint_velocity(track, VelocityRuleConfig()) is None

    def test_sentinel_keypoints_skipped(self):
        rule = VelocityRuleConfig(tracked_keypoints=(9, 10))
        first = feature_with({9: (0.0, 0.0), 10: (0.2, 0.2)})  # 9 undetected
        second = feature_with({9: (0.9, 0.9), 10: (0.2, 0.2)})
        track = self.make_track([(0, first), (1, second)])
        assert keypoint_velocity(track, rule) == pytest.approx(0.0)

    def test_all_sentinels_not_applicable(self):
        rule = VelocityRuleConfig(tracked_keypoints=(9,))
        track = self.make_track([(0, feature_with({9: (0.0, 0.0)})), (1, feature_with({9: (0.0, 0.0)}))])
        assert keypoint_velocity(track, rule) is None

    def test_entries_outside_window_ignored(self):
        rule = VelocityRuleConfig(window_frames=3, tracked_keypoints=(9,))
        frames = [
            (0, feature_with({9: (0.1, 0.5)})),
            (10, feature_with({9: (0.4, 0.5)})),
            (11, feature_with({9: (0.5, 0.5)})),
        ]
        track = self.make_track(frames)
        # window covers frames 9..11 only: displacement 0.1 over 1/30 s
        assert keypoint_velocity(track, rule) == pytest.approx(3.0)


class TestVelocityRule:
    def test_fast_fight_upheld(self):
        rule = VelocityRuleConfig(velocity_threshold=1.0)
        assert apply_velocity_rule(0.9, 5.0, rule) == VelocityHint.UPHOLD

    def test_slow_fight_downgraded(self):
        rule = VelocityRuleConfig(velocity_threshold=1.0)
        assert apply_velocity_rule(0.9, 0.2, rule) == VelocityHint.DOWNGRADE

    def test_non_fight_never_gated(self):
        rule = VelocityRuleConfig(velocity_threshold=1.0)
        assert apply_velocity_rule(0.1, 0.0, rule) == VelocityHint.UPHOLD
        assert apply_velocity_rule(0.1, 99.0, rule) == VelocityHint.UPHOLD

    def test_unavailable_velocity_upholds(self):
        rule = VelocityRuleConfig(velocity_threshold=1.0)
        assert apply_velocity_rule(0.95, None, rule) == VelocityHint.UPHOLD

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            VelocityRuleConfig(window_frames=1)
        with pytest.raises(ConfigError):
            VelocityRuleConfig(velocity_threshold=0.0)
