import numpy as np
import pytest
from hypothesis import settings

from gesture_imputer import synth
from gesture_imputer.scene import AvatarModel, PointCloud

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def library():
    return synth.make_library()


@pytest.fixture(scope="session")
def room():
    return synth.make_room("room_fixture", np.random.default_rng(7), size=(6.0, 5.0, 3.0),
                           n_furniture=4)


def point_avatar(points, keypoints=None, hand="right", elevation=0.0, avatar_id="a"):
    """Minimal avatar over arbitrary points; keypoints default to plausible cells."""
    pts = np.asarray(points, dtype=np.float64)
    lo = pts.min(axis=0)
    kp = {
        "left_shoulder": pts[-1],
        "right_shoulder": pts[-1],
        "left_fingertip": pts[0] + [0.0, 0.0, 0.01],
        "right_fingertip": pts[0] + [0.0, 0.0, 0.01],
        "foot": np.array([pts[0][0], pts[0][1], lo[2]]),
    }
    if keypoints:
        kp.update(keypoints)
    return AvatarModel(avatar_id, PointCloud(pts), kp, hand, elevation, "")
