import json
import pathlib

import pytest

DATA = pathlib.Path(__file__).resolve().parents[2] / "tests" / "data"


@pytest.fixture
def toy_config():
    return json.loads((DATA / "toy_scene.json").read_text())
