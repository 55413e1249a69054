"""Golden-image regression for the shipped sample scene.

The goldens were captured from the first verified run and are bit-exact
under the compiled kernel (pure-Python renders match positions bit-for-bit
and colors to the last ulp, so they reproduce the same 8-bit images too).
"""

import os

import numpy as np
import pytest

from canvox.cli import main, room_camera
from canvox.render import read_ppm, render_image, to_u8
from canvox.snapshot import load_snapshot

HERE = os.path.dirname(__file__)
SAMPLE_SCRIPT = os.path.join(HERE, "..", "scripts", "sample_session.jsonl")
GOLDEN_DIR = os.path.join(HERE, "golden")


@pytest.fixture(scope="module")
def sample_snapshot(tmp_path_factory):
    out = tmp_path_factory.mktemp("golden") / "sample.cvox"
    assert main(["replay", SAMPLE_SCRIPT, str(out)]) == 0
    return load_snapshot(out)


@pytest.mark.parametrize("room_name", ["vista", "detail"])
def test_room_renders_match_goldens(sample_snapshot, room_name):
    canvas, rooms = sample_snapshot
    room = next(r for r in rooms if r.name == room_name)
    cam = room_camera(room, 256, 256, 60.0)
    img = render_image(canvas, cam)
    golden = read_ppm(os.path.join(GOLDEN_DIR, f"room_{room_name}.ppm"))
    got = to_u8(img)
    diff = int(np.abs(got.astype(int) - golden.astype(int)).max())
    assert diff == 0, f"golden diff for {room_name}: max channel delta {diff}"


def test_goldens_are_distinct():
    a = read_ppm(os.path.join(GOLDEN_DIR, "room_vista.ppm"))
    b = read_ppm(os.path.join(GOLDEN_DIR, "room_detail.ppm"))
    assert a.shape == b.shape == (256, 256, 3)
    assert not np.array_equal(a, b)
