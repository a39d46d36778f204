import numpy as np
import pytest
from sklearn.base import clone

from conftest import person
from playertrack.association import Feature
from playertrack.config import RunConfig
from playertrack.io import dumps
from playertrack.metrics import clear_mot_report
from playertrack.simulator import (AgentSpec, NoiseConfig, ScenarioConfig, generate,
                                   render_detections)
from playertrack.tracker import (Detection, FrameInput, MultiModalTracker, TrackStatus,
                                 TrajectorySet, run)

NOISELESS = NoiseConfig(position_sigma=0.0, feature_sigma=0.0, dropout=0.0, min_points=0)


def simulate(agents, duration=6.0, noise=None, seed=0):
    cfg = ScenarioConfig(seed=seed, agents=agents, duration=duration,
                         noise=noise or NoiseConfig(), feature_dim=64)
    gt = generate(cfg)
    return gt, render_detections(gt, cfg)


def crossing_agents():
    # lateral gap of 0.8 m keeps the pair above the merge distance
    return [AgentSpec([{"pos": [8.0, 7.0]}, {"pos": [20.0, 7.0], "t": 6.0}], team=0),
            AgentSpec([{"pos": [20.0, 7.8]}, {"pos": [8.0, 7.8], "t": 6.0}], team=1)]


def serialize(traj: TrajectorySet) -> str:
    return dumps({"frames": traj.frames,
                  "boxes": {str(f): [[i, b.as_array().tolist(), fl] for i, b, fl in rows]
                            for f, rows in traj.boxes.items()},
                  "summaries": {str(k): v for k, v in traj.summaries.items()}})


def test_empty_first_frame_has_no_tracks():
    trk = MultiModalTracker().reset()
    assert trk.step(FrameInput(0, [])) == []
    assert trk.tracks_ == []


def test_stationary_detection_becomes_one_active_track():
    trk = MultiModalTracker(hit_confirm=2).reset()
    feat = [Feature(np.eye(8)[0])]
    outs = [trk.step(FrameInput(f, [Detection(person(10, 5), 1.0, feat)])) for f in range(3)]
    assert outs[0] == []
    assert [[(i, s) for i, _, s in o] for o in outs[1:]] == [[(1, TrackStatus.ACTIVE)]] * 2


def test_confidence_gate_drops_weak_detections():
    trk = MultiModalTracker(hit_confirm=1, confidence_gate=0.5).reset()
    out = trk.step(FrameInput(0, [Detection(person(3, 3), 0.4), Detection(person(9, 9), 0.9)]))
    assert len(out) == 1 and np.allclose(out[0][1].center[:2], [9, 9])


def test_non_monotonic_frame_raises():
    trk = MultiModalTracker().reset()
    trk.step(FrameInput(5, []))
    with pytest.raises(ValueError):
        trk.step(FrameInput(5, []))
    with pytest.raises(ValueError):
        MultiModalTracker().fit([FrameInput(2, []), FrameInput(1, [])])


def test_invalid_parameters_raise():
    with pytest.raises(ValueError):
        MultiModalTracker(alpha=1.5).reset()
    with pytest.raises(ValueError):
        MultiModalTracker(k=0).reset()


def test_empty_sequence_gives_empty_set():
    traj = run(RunConfig(), [])
    assert len(traj) == 0 and traj.frames == [] and traj.labeled_frames() == []


def test_crossing_agents_keep_ids():
    gt, frames = simulate(crossing_agents())
    traj = run(RunConfig(alpha=0.5), frames)
    rep = clear_mot_report(gt.labeled_frames(), traj.labeled_frames())
    assert rep.IDS == 0
    assert len(traj.summaries) == 2


def test_noiseless_trajectories_match_ground_truth():
    agents = [AgentSpec([{"pos": [5.0, 5.0]}, {"pos": [15.0, 8.0], "t": 6.0}]),
              AgentSpec([{"pos": [20.0, 3.0]}, {"pos": [18.0, 12.0], "t": 6.0}], team=1)]
    gt, frames = simulate(agents, noise=NOISELESS)
    traj = run(RunConfig(), frames)
    gt_by_frame = dict(gt.labeled_frames())
    id_map, errs = {}, []
    for f, rows in traj.labeled_frames():
        if f < 5:
            continue
        for tid, box in rows:
            d = [np.linalg.norm(box.center - g.center) for _, g in gt_by_frame[f]]
            gid = gt_by_frame[f][int(np.argmin(d))][0]
            assert id_map.setdefault(tid, gid) == gid
            errs.append(min(d))
    assert len(id_map) == 2
    assert np.sqrt(np.mean(np.square(errs))) < 0.1


def test_same_input_gives_identical_output():
    _, frames = simulate(crossing_agents())
    a = serialize(run(RunConfig(), frames))
    b = serialize(run(RunConfig(), frames))
    assert a == b


def test_no_duplicate_ids_and_every_box_is_backed():
    gt, frames = simulate(crossing_agents() + [
        AgentSpec([{"pos": [3.0, 3.0]}, {"pos": [3.0, 12.0], "t": 6.0}])], seed=4)
    traj = run(RunConfig(), frames)
    det_by_frame = {fr.frame: fr.detections for fr in frames}
    trk = MultiModalTracker().fit(frames)
    for t in trk.finished_ + trk.tracks_:
        if not t.confirmed:
            continue
        for f, p in t.history.items():
            if p.interpolated:
                assert p.detection is None
            else:
                assert 0 <= p.detection < len(det_by_frame[f])
    for f, rows in traj.boxes.items():
        ids = [i for i, _, _ in rows]
        assert len(ids) == len(set(ids))
    # detections in one frame are claimed by at most one track
    for f in traj.frames:
        used = [t.history[f].detection for t in trk.finished_ + trk.tracks_
                if t.confirmed and f in t.history and not t.history[f].interpolated]
        assert len(used) == len(set(used))


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_single_modality_ablations_run(alpha):
    gt, frames = simulate(crossing_agents())
    traj = run(RunConfig(alpha=alpha), frames)
    assert len(traj.summaries) >= 1


def test_estimator_surface():
    _, frames = simulate(crossing_agents(), duration=2.0)
    est = MultiModalTracker(alpha=0.4)
    assert clone(est).get_params()["alpha"] == 0.4
    fitted = est.fit(frames)
    again = fitted.predict(frames)
    assert serialize(again) == serialize(fitted.trajectories_)
    with pytest.raises(Exception):
        MultiModalTracker().predict(frames)


def test_partial_fit_matches_fit():
    _, frames = simulate(crossing_agents(), duration=2.0)
    inc = MultiModalTracker().reset()
    for fr in frames:
        inc.partial_fit(fr)
    assert serialize(inc.trajectories()) == serialize(MultiModalTracker().fit_predict(frames))


def test_from_config_overrides():
    trk = MultiModalTracker.from_config(RunConfig(alpha=0.3), use_regain=False)
    assert trk.alpha == 0.3 and trk.use_regain is False
