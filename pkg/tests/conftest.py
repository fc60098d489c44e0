import pathlib
import sys

import numpy as np
import pytest

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

from featalign import ArmModel, load_scenario

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def arm2():
    return ArmModel(link_lengths=(1.0, 1.0))


@pytest.fixture(scope="session")
def arm3():
    return ArmModel(link_lengths=(1.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def desk_scenario():
    return load_scenario(SCENARIO_DIR / "desk_shift.json")


@pytest.fixture(scope="session")
def missing_scenario():
    return load_scenario(SCENARIO_DIR / "missing_feature.json")


@pytest.fixture(scope="session")
def aligned_scenario():
    return load_scenario(SCENARIO_DIR / "aligned.json")


@pytest.fixture(scope="session")
def new_object_scenario():
    return load_scenario(SCENARIO_DIR / "new_object.json")


@pytest.fixture(scope="session")
def desk_episode(desk_scenario):
    """The desk-shift correction round, computed once and shared read-only:
    (xi_r, correction, xi_h) plus the solver ingredients."""
    from featalign import DeformationShape, deform, plan
    from featalign.oracle import TrueHuman

    sc = desk_scenario
    shape = DeformationShape(steps=sc.planner.steps, mu=sc.mu)
    human = TrueHuman(
        feature_specs=list(sc.oracle.feature_specs),
        theta_true=sc.oracle.theta_true,
        lam=sc.oracle.lam,
        correction_trigger=sc.oracle.trigger,
        seed=sc.oracle.seed + sc.seed,
        max_push=sc.oracle.max_push,
    )
    xi_r = plan(sc.model, sc.feature_set, sc.theta_init, sc.start, sc.goal, sc.planner)
    corr = human.maybe_correct(xi_r, sc.env_test, sc.model, shape)
    assert corr is not None
    xi_h = deform(xi_r, corr, shape)
    return {
        "scenario": sc,
        "shape": shape,
        "human": human,
        "xi_r": xi_r,
        "corr": corr,
        "xi_h": xi_h,
        "delta": np.array([-0.6, 0.4]),  # training minus test laptop position
    }
