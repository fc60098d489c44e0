"""Construct the bundled scenario files from scratch.

Shows how a scenario is assembled: pick an arm, place objects, anchor the
robot's trained features at the training-time object positions, describe what
the simulated human actually cares about, and choose solver knobs. Running this
script rewrites the files under scenarios/.
"""

import pathlib

import numpy as np

from featalign import (
    ArmModel,
    Environment,
    FeatureSet,
    ObjectPose,
    TrainedFeature,
)
from featalign.learning import LearnerParams
from featalign.oracle import TrueFeatureSpec
from featalign.planner import PlannerParams
from featalign.scenario import OracleSpec, Scenario, save_scenario

OUT = pathlib.Path(__file__).resolve().parent.parent / "scenarios"

ARM = ArmModel(link_lengths=(1.0, 1.0, 1.0))
LAPTOP_TRAIN = np.array([1.5, 1.0])
LAPTOP_TEST = np.array([2.1, 0.6])  # moved by (0.6, -0.4)
VASE = np.array([-0.5, 1.2])
WIDTH = 0.25

LEARNER = LearnerParams(
    k=3, alpha=0.5, lam=0.5, epsilon_beta=2.0, beta_max=100.0, slope=10.0
)
PLANNER = PlannerParams(steps=20)

# one corridor passes the moved-laptop position, the other runs low and right,
# far from every trained anchor (angles solved once via IK and frozen)
Q_START_SHIFT = np.array([-1.303812, 0.975423, 1.729875])
Q_GOAL_SHIFT = np.array([0.342014, 0.207081, 0.132741])
Q_START_LOW = np.array([-2.106297, 0.974524, 1.615612])
Q_GOAL_LOW = np.array([-0.705413, 0.708924, 0.348555])
Q_START_FAR = np.array([-2.315365, 0.930298, 1.503526])
Q_GOAL_FAR = np.array([-0.901887, 0.714047, 0.259137])
PLANT = np.array([1.975, -1.145])  # sits on the low corridor


def trained_features():
    return FeatureSet(
        (
            TrainedFeature("near-laptop", LAPTOP_TRAIN, WIDTH),
            TrainedFeature("near-vase", VASE, WIDTH),
        )
    )


def env(label, *objs):
    return Environment(tuple(ObjectPose(i, p) for i, p in objs), label)


def oracle(theta, *specs):
    return OracleSpec(
        tuple(specs), np.array(theta), lam=0.5, trigger=0.5, max_push=1.5, seed=1
    )


def base(label, **kw):
    defaults = dict(
        model=ARM,
        feature_set=trained_features(),
        theta_init=np.array([0.5, 0.5]),
        learner=LEARNER,
        planner=PLANNER,
        mu=0.15,
        seed=0,
        budget=10,
    )
    defaults.update(kw)
    return Scenario(label=label, **defaults)


def main():
    OUT.mkdir(exist_ok=True)

    desk_shift = base(
        "desk-shift",
        env_train=env("training", ("laptop", LAPTOP_TRAIN), ("vase", VASE)),
        env_test=env("test", ("laptop", LAPTOP_TEST), ("vase", VASE)),
        start=Q_START_SHIFT,
        goal=Q_GOAL_SHIFT,
        oracle=oracle(
            [16.0, 16.0],
            TrueFeatureSpec("laptop-zone", WIDTH, object_id="laptop"),
            TrueFeatureSpec("vase-zone", WIDTH, object_id="vase"),
        ),
    )

    missing = base(
        "missing-feature",
        env_train=env("training", ("laptop", LAPTOP_TRAIN), ("vase", VASE)),
        env_test=env("test", ("laptop", LAPTOP_TRAIN), ("vase", VASE)),
        start=Q_START_LOW,
        goal=Q_GOAL_LOW,
        oracle=oracle(
            [16.0, 16.0, 16.0],
            TrueFeatureSpec("laptop-zone", WIDTH, object_id="laptop"),
            TrueFeatureSpec("vase-zone", WIDTH, object_id="vase"),
            TrueFeatureSpec("plant-zone", WIDTH, anchor=PLANT),
        ),
    )

    new_object = base(
        "new-object",
        env_train=env("training", ("laptop", LAPTOP_TRAIN), ("vase", VASE)),
        env_test=env(
            "test",
            ("laptop", LAPTOP_TRAIN),
            ("vase", VASE),
            ("tablet", LAPTOP_TEST),
        ),
        start=Q_START_SHIFT,
        goal=Q_GOAL_SHIFT,
        oracle=oracle(
            [16.0, 16.0, 16.0],
            TrueFeatureSpec("laptop-zone", WIDTH, object_id="laptop"),
            TrueFeatureSpec("vase-zone", WIDTH, object_id="vase"),
            TrueFeatureSpec("tablet-zone", WIDTH, object_id="tablet"),
        ),
        new_object=True,
    )

    aligned = base(
        "aligned",
        env_train=env("training", ("laptop", LAPTOP_TRAIN), ("vase", VASE)),
        env_test=env("test", ("laptop", LAPTOP_TRAIN), ("vase", VASE)),
        start=Q_START_FAR,
        goal=Q_GOAL_FAR,
        oracle=oracle(
            [16.0, 16.0],
            TrueFeatureSpec("laptop-zone", WIDTH, object_id="laptop"),
            TrueFeatureSpec("vase-zone", WIDTH, object_id="vase"),
        ),
    )

    for sc in (desk_shift, missing, new_object, aligned):
        path = OUT / f"{sc.label.replace('-', '_')}.json"
        save_scenario(sc, path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
