import numpy as np
import pytest

from mapverify.fusion import FusionConfig
from mapverify.influence import InfluenceParams
from mapverify.mapmodel import MapData
from mapverify.pipeline import Frame, FrameError, check_frame, frame_influences, verify_frame
from mapverify.state import TrackState

from conftest import make_ego, make_track


@pytest.fixture
def frame():
    tracks = [
        make_track("car", 0.0, -1.75),  # on lane a
        make_track("ghost", 0.0, 14.0),  # inside the house
        make_track("walker", 30.0, 2.0),  # sidewalk
        make_track("far", 0.0, 150.0),  # nothing nearby
    ]
    return Frame(1.5, make_ego(), tracks)


def test_scores_and_decisions(street_map, frame):
    out = verify_frame(frame, street_map)
    eta = {e.label: e.eta for e in out.entries}
    assert eta["car"] > 0.95
    assert eta["ghost"] < 0.05
    assert eta["far"] == pytest.approx(0.5, abs=1e-12)
    assert [t.label for t in out.kept] == ["car", "walker", "far"]
    assert out.timestamp == 1.5


def test_threshold_extremes(street_map, frame):
    assert len(verify_frame(frame, street_map, theta_eta=0.0).kept) == 4
    assert verify_frame(frame, street_map, theta_eta=1.0).kept == ()


def test_kept_set_shrinks_with_threshold(street_map, frame):
    previous = None
    for theta in np.linspace(0, 1, 21):
        kept = {t.label for t in verify_frame(frame, street_map, theta_eta=theta).kept}
        if previous is not None:
            assert kept <= previous
        previous = kept


def test_kept_tracks_are_untouched(street_map, frame):
    out = verify_frame(frame, street_map)
    for track in out.kept:
        original = next(t for t in frame.tracks if t.label == track.label)
        assert track is original
        assert track == make_track(track.label, original.x, original.y)


@pytest.mark.parametrize("model", ["iim", "bn", "bne"])
def test_neutral_track_in_every_model(model):
    frame = Frame(0.0, make_ego(), [make_track("lonely", 5.0, 5.0)])
    out = verify_frame(frame, MapData.build([], []), config=FusionConfig(model))
    assert out.entries[0].eta == pytest.approx(0.5, abs=1e-12)
    assert len(out.kept) == 1


def test_deterministic(street_map, frame):
    a = verify_frame(frame, street_map, config=FusionConfig("bne"))
    b = verify_frame(frame, street_map, config=FusionConfig("bne"))
    assert [(e.label, e.eta) for e in a.entries] == [(e.label, e.eta) for e in b.entries]


def test_radius_limits_the_map(street_map, frame):
    ivs = frame_influences(frame, street_map, radius=3.0)
    assert all(iv.p_building == 0.0 for iv in ivs)
    ivs = frame_influences(frame, street_map)
    assert ivs[1].p_building > 0.99


def test_invalid_covariance_rejects_whole_frame(street_map):
    bad = np.diag([0.1] * 6)
    bad[0, 0] = -1.0
    tracks = [make_track("ok", 0, -1.75), TrackState("broken", 1, 1, 0, 0, 0, 0, bad, 0.5)]
    frame = Frame(3.0, make_ego(), tracks)
    with pytest.raises(FrameError, match="'broken'") as err:
        verify_frame(frame, street_map)
    assert "3.0" in str(err.value)


def test_duplicate_labels_rejected():
    with pytest.raises(FrameError, match="duplicate"):
        Frame(0.0, make_ego(), [make_track(1), make_track(1, x=3.0)])


def test_threshold_validation(street_map, frame):
    with pytest.raises(ValueError):
        verify_frame(frame, street_map, theta_eta=1.2)


def test_params_change_building_softness(street_map):
    frame = Frame(0.0, make_ego(), [make_track("edge", 0.0, 4.5, pos_var=1e-4)])
    sharp = frame_influences(frame, street_map, InfluenceParams(sigma_b=0.05))[0].p_building
    soft = frame_influences(frame, street_map, InfluenceParams(sigma_b=1.0))[0].p_building
    assert sharp > 0.99 and soft < 0.05
    check_frame(frame)
