import numpy as np
import pytest

from prnugroups import simkit
from prnugroups.calibration import LabeledPattern, calibrate
from prnugroups.filters import FilterConfig, extract_pattern

# corpus settings shared by the end-to-end tests: strong PRNU, a weak
# camera-model pattern common to all cameras
STRENGTH = 0.05
SIM = dict(read_noise_std=40.0, common_strength=0.01)


def labeled(db, config):
    return [LabeledPattern(d.image_id, d.camera_id, extract_pattern(d.image, config))
            for d in db]


def make_table(size, seed, n_cameras=20, per_camera=40, trials=2000, grid=(1, 2, 5, 10, 20, 40)):
    config = FilterConfig(crop=size)
    db = simkit.gen_database(n_cameras, per_camera, size, STRENGTH, seed, **SIM)
    return calibrate(labeled(db, config), grid, 0.01, trials, rng_seed=seed,
                     filter_config=config)


@pytest.fixture(scope="session")
def table128():
    return make_table(128, seed=1000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
