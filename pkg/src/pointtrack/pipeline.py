"""Per-frame orchestration of the online tracker and sequence execution.

Frame order: gate from altitude, camera-motion estimate, Kalman predict +
affine correction, gated optimal assignment, match bookkeeping with the
classification gate, correlation-filter recovery of unmatched confirmed
tracks, births, miss handling, emission.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import lifecycle, motion
from .assignment import AssignmentResult, GatingPolicy, build_cost_matrix, dynamic_threshold, solve_assignment
from .cmc import AffineTransform, Correspondence, RansacConfig, estimate_affine
from .ddcf import DcfConfig, FeatureMap, extract_patch, localize, train_filter, update_filter
from .errors import InvalidInputError, NoMotionEstimateError, SequencingError
from .formats import Detection, SequenceBundlePaths, parse_correspondences, parse_detections, parse_metadata, read_feature_map
from .lifecycle import LifecycleConfig, Track, TrackState, TrajectoryValidator, ValidationContext
from .metrics import TrajectorySet
from .motion import MotionConfig

logger = logging.getLogger(__name__)

SOURCE_COASTED = "coasted"


@dataclass(frozen=True)
class TrackerConfig:
    motion: MotionConfig = field(default_factory=MotionConfig)
    gating: GatingPolicy = field(default_factory=GatingPolicy)
    lifecycle: LifecycleConfig = field(default_factory=LifecycleConfig)
    dcf: DcfConfig = field(default_factory=DcfConfig)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    use_cmc: bool = True
    use_alt: bool = True
    use_cls: bool = True
    use_ddcf: bool = True
    emit_coasted: bool = False


@dataclass
class FrameInput:
    frame: int
    detections: list[Detection] = field(default_factory=list)
    altitude: float | None = None
    correspondences: list[Correspondence] = field(default_factory=list)
    features: FeatureMap | None = None


@dataclass(frozen=True)
class TrackRecord:
    track_id: int
    x: float
    y: float
    conf: float
    source: str


@dataclass
class FrameOutput:
    frame: int
    records: list[TrackRecord]
    gate: float
    affine: AffineTransform
    births: int
    deaths: int
    recoveries: int


@dataclass
class SequenceSummary:
    confirmed_ids: list[int] = field(default_factory=list)   # first-emission order
    lifespans: dict[int, tuple[int, int]] = field(default_factory=dict)
    births: int = 0
    deaths: int = 0
    recoveries: int = 0
    match_count: int = 0
    match_distance_sum: float = 0.0

    @property
    def trajectory_count(self) -> int:
        return len(self.confirmed_ids)

    @property
    def mean_match_distance(self) -> float:
        return self.match_distance_sum / self.match_count if self.match_count else 0.0


class PointTracker:
    """Online tracker over one sequence; call process_frame in frame order."""

    def __init__(self, config: TrackerConfig | None = None,
                 validator: TrajectoryValidator | None = None):
        self.config = config or TrackerConfig()
        self.validator = validator
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_frame: int | None = None
        self._prev_features: FeatureMap | None = None
        self.summary = SequenceSummary()

    @property
    def _cls_enabled(self) -> bool:
        return self.config.use_cls and self.validator is not None

    def process_frame(self, frame_input: FrameInput) -> FrameOutput:
        frame = frame_input.frame
        if self._last_frame is not None and frame != self._last_frame + 1:
            raise SequencingError(
                f"frame {frame} does not follow frame {self._last_frame}")
        if self._last_frame is None and frame < 0:
            raise SequencingError(f"negative frame index {frame}")

        gate = self._gate(frame_input)
        affine = self._camera_motion(frame_input)
        self._predict(affine)

        detections = frame_input.detections
        result = self._associate(detections, gate)
        matched_ids = self._handle_matches(result, detections, frame_input)
        claimed = np.array([[detections[dj].x, detections[dj].y]
                            for _, dj, _ in result.matches]).reshape(-1, 2)
        recovered_ids = self._recover(result, frame_input, claimed, gate)
        births = self._spawn(result, detections)
        deaths = self._handle_misses(result)

        records = self._emit(matched_ids, recovered_ids)
        self.tracks = [t for t in self.tracks if not t.is_deleted]
        self._prev_features = frame_input.features
        self._last_frame = frame
        return FrameOutput(frame=frame, records=records, gate=gate, affine=affine,
                           births=births, deaths=deaths, recoveries=len(recovered_ids))

    # --- pipeline steps ---

    def _gate(self, frame_input: FrameInput) -> float:
        if not self.config.use_alt:
            return self.config.gating.base_radius
        altitude = frame_input.altitude
        if altitude is None:
            altitude = self.config.gating.reference_altitude
        return dynamic_threshold(altitude, self.config.gating)

    def _camera_motion(self, frame_input: FrameInput) -> AffineTransform:
        if not self.config.use_cmc or not frame_input.correspondences:
            return AffineTransform.identity()
        try:
            return estimate_affine(frame_input.correspondences, self.config.ransac)
        except NoMotionEstimateError as exc:
            logger.warning("frame %d: camera-motion estimate failed (%s), using identity",
                           frame_input.frame, exc)
            return AffineTransform.identity()

    def _predict(self, affine: AffineTransform):
        apply = not affine.is_identity()
        for track in self.tracks:
            track.kalman = motion.predict(track.kalman, self.config.motion)
            if apply:
                track.kalman = motion.apply_affine(track.kalman, affine)

    def _associate(self, detections: list[Detection], gate: float) -> AssignmentResult:
        predicted = [t.kalman.position for t in self.tracks]
        points = [(d.x, d.y) for d in detections]
        costs = build_cost_matrix(predicted, points) if self.tracks and detections \
            else np.zeros((len(self.tracks), len(detections)))
        return solve_assignment(costs, gate)

    def _validator_prob(self, track: Track, det: Detection,
                        frame_input: FrameInput) -> float | None:
        if not self._cls_enabled or track.state is TrackState.CONFIRMED:
            return None
        if not lifecycle.classification_gate_active(track.hits + 1, self.config.lifecycle):
            return None
        context = ValidationContext(
            frame=frame_input.frame,
            position=np.array([det.x, det.y]),
            detection_score=det.score,
            features=frame_input.features,
        )
        try:
            return lifecycle.validate(self.validator, context)
        except lifecycle.ValidationUnavailableError:
            return None

    def _handle_matches(self, result: AssignmentResult, detections: list[Detection],
                        frame_input: FrameInput) -> dict[int, float]:
        matched: dict[int, float] = {}
        for ti, dj, dist in result.matches:
            track = self.tracks[ti]
            det = detections[dj]
            prob = self._validator_prob(track, det, frame_input)
            lifecycle.on_match(track, (det.x, det.y), det.conf, prob,
                               self.config.lifecycle, self.config.motion,
                               classification_enabled=self._cls_enabled)
            self.summary.match_count += 1
            self.summary.match_distance_sum += dist
            if track.is_confirmed:
                matched[track.track_id] = det.conf
                self._maintain_filter(track, det, frame_input)
        return matched

    @staticmethod
    def _in_coverage(features: FeatureMap, position) -> bool:
        x, y = float(position[0]), float(position[1])
        return (0.0 <= x < features.width * features.stride
                and 0.0 <= y < features.height * features.stride)

    def _maintain_filter(self, track: Track, det: Detection, frame_input: FrameInput):
        cfg = self.config
        if not cfg.use_ddcf or cfg.dcf.init_on_miss or frame_input.features is None:
            return
        if not self._in_coverage(frame_input.features, (det.x, det.y)):
            return
        try:
            patch = extract_patch(frame_input.features, (det.x, det.y), cfg.dcf.patch_cells)
            if track.filter is None:
                track.filter = train_filter(patch, cfg.dcf)
            else:
                track.filter = update_filter(track.filter, patch)
        except InvalidInputError:
            pass  # degenerate patch; keep whatever model we had

    def _recover(self, result: AssignmentResult, frame_input: FrameInput,
                 claimed: np.ndarray, gate: float) -> dict[int, float]:
        recovered: dict[int, float] = {}
        cfg = self.config
        if not cfg.use_ddcf or frame_input.features is None:
            return recovered
        for ti in result.unmatched_tracks:
            track = self.tracks[ti]
            if not track.is_confirmed:
                continue
            if track.filter is None and self._prev_features is not None:
                # first miss: build the model from the last measured position
                try:
                    patch = extract_patch(self._prev_features, track.last_position,
                                          cfg.dcf.patch_cells)
                    track.filter = train_filter(patch, cfg.dcf)
                except InvalidInputError:
                    continue
            if track.filter is None:
                continue
            if not self._in_coverage(frame_input.features, track.kalman.position):
                continue  # target outside the feature map; let it age out
            patch = extract_patch(frame_input.features, track.kalman.position,
                                  cfg.dcf.patch_cells)
            offset, psr = localize(track.filter, patch)
            if psr < cfg.dcf.psr_min:
                continue
            point = patch.origin + offset
            if claimed.size and np.linalg.norm(claimed - point, axis=1).min() < gate:
                # the spot is explained by a detection another track already
                # owns; recovering here would duplicate that object
                continue
            track.kalman = motion.update(track.kalman, point, cfg.motion)
            track.last_position = np.asarray(point)
            track.last_source = lifecycle.SOURCE_DDCF
            recovered[track.track_id] = track.last_confidence
        return recovered

    def _spawn(self, result: AssignmentResult, detections: list[Detection]) -> int:
        for dj in result.unmatched_detections:
            det = detections[dj]
            state = motion.init_state((det.x, det.y), self.config.motion)
            self.tracks.append(Track(
                track_id=self._next_id, kalman=state,
                last_confidence=det.conf))
            self._next_id += 1
        return len(result.unmatched_detections)

    def _handle_misses(self, result: AssignmentResult) -> int:
        deaths = 0
        for ti in result.unmatched_tracks:
            outcome = lifecycle.on_miss(self.tracks[ti], self.config.lifecycle)
            if outcome is lifecycle.MissOutcome.DELETE:
                deaths += 1
        # tracks terminated by the classification decision also die this frame
        deaths += sum(1 for i, t in enumerate(self.tracks)
                      if t.is_deleted and i not in set(result.unmatched_tracks))
        return deaths

    def _emit(self, matched: dict[int, float], recovered: dict[int, float]) -> list[TrackRecord]:
        records = []
        for track in self.tracks:
            if track.is_deleted or not track.is_confirmed:
                continue
            pos = track.kalman.position
            if track.track_id in matched:
                records.append(TrackRecord(track.track_id, float(pos[0]), float(pos[1]),
                                           matched[track.track_id], lifecycle.SOURCE_DETECTION))
            elif track.track_id in recovered:
                records.append(TrackRecord(track.track_id, float(pos[0]), float(pos[1]),
                                           recovered[track.track_id], lifecycle.SOURCE_DDCF))
            elif self.config.emit_coasted:
                records.append(TrackRecord(track.track_id, float(pos[0]), float(pos[1]),
                                           track.last_confidence, SOURCE_COASTED))
        return records


@dataclass
class SequenceResult:
    outputs: list[FrameOutput]
    summary: SequenceSummary

    def to_trajectories(self) -> TrajectorySet:
        rows = []
        for out in self.outputs:
            for r in out.records:
                rows.append((out.frame, r.track_id, r.x, r.y, r.conf))
        return TrajectorySet.from_rows(rows)


def run_sequence(frame_inputs, config: TrackerConfig | None = None,
                 validator: TrajectoryValidator | None = None) -> SequenceResult:
    """Stream a whole ordered sequence through a fresh tracker."""
    tracker = PointTracker(config, validator)
    outputs = []
    summary = tracker.summary
    for frame_input in frame_inputs:
        out = tracker.process_frame(frame_input)
        outputs.append(out)
        summary.births += out.births
        summary.deaths += out.deaths
        summary.recoveries += out.recoveries
        for r in out.records:
            if r.track_id not in summary.lifespans:
                summary.confirmed_ids.append(r.track_id)
                summary.lifespans[r.track_id] = (out.frame, out.frame)
            else:
                first, _ = summary.lifespans[r.track_id]
                summary.lifespans[r.track_id] = (first, out.frame)
    if not outputs:
        raise InvalidInputError("empty frame sequence")
    return SequenceResult(outputs=outputs, summary=summary)


def frame_inputs_from_bundle(paths: SequenceBundlePaths):
    """Generate FrameInputs from a bundle directory, features loaded lazily."""
    detections = parse_detections(paths.detections.read_text())
    dets_by_frame: dict[int, list[Detection]] = {}
    for d in detections:
        dets_by_frame.setdefault(d.frame, []).append(d)

    alt_by_frame: dict[int, float] = {}
    if paths.metadata is not None:
        for row in parse_metadata(paths.metadata.read_text()):
            alt_by_frame[row.frame] = row.altitude

    corr_by_frame: dict[int, list[Correspondence]] = {}
    if paths.correspondences is not None:
        for row in parse_correspondences(paths.correspondences.read_text()):
            corr_by_frame.setdefault(row.frame, []).append(
                Correspondence(row.prev_x, row.prev_y, row.cur_x, row.cur_y))

    last = -1
    for source in (dets_by_frame, alt_by_frame, corr_by_frame):
        if source:
            last = max(last, max(source))
    if paths.features_dir is not None:
        for p in paths.features_dir.glob("*.fmap"):
            try:
                last = max(last, int(p.stem))
            except ValueError:
                continue
    if last < 0:
        raise InvalidInputError(f"bundle {paths.root} contains no frames")

    for frame in range(last + 1):
        fpath = paths.feature_path(frame)
        features = read_feature_map(fpath.read_bytes()) if fpath is not None else None
        yield FrameInput(
            frame=frame,
            detections=dets_by_frame.get(frame, []),
            altitude=alt_by_frame.get(frame),
            correspondences=corr_by_frame.get(frame, []),
            features=features,
        )
