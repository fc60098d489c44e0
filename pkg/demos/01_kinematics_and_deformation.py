"""Arm basics: forward/inverse kinematics and how a single push bends a
whole trajectory while the endpoints stay pinned."""

import numpy as np

from featalign import (
    ArmModel,
    CorrectionEvent,
    DeformationShape,
    Trajectory,
    deform,
    end_effector,
    forward_kinematics,
    inverse_kinematics,
)
from featalign.arm import ee_batch

arm = ArmModel(link_lengths=(1.0, 1.0, 1.0))

print("A 3-link planar arm, base at the origin, reach", arm.reach, "m")
q = np.array([0.4, -0.3, 0.6])
frames = forward_kinematics(arm, q)
print("joint frames for q =", q.round(2))
for i, p in enumerate(frames):
    name = "base" if i == 0 else ("end-effector" if i == len(frames) - 1 else f"joint {i}")
    print(f"  {name:>12}: ({p[0]: .3f}, {p[1]: .3f})")

target = np.array([1.8, 1.1])
sol = inverse_kinematics(arm, q, target)
print(f"\nIK to {target.tolist()}: q = {sol.round(4).tolist()}")
print("  residual:", np.linalg.norm(end_effector(arm, sol) - target))

# a straight joint-space trajectory between two solved configurations
q_start = inverse_kinematics(arm, np.array([0.1, 0.3, 0.2]), np.array([1.6, -0.8]))
q_goal = inverse_kinematics(arm, q_start, np.array([1.2, 1.5]))
alphas = np.linspace(0, 1, 21)[:, None]
traj = Trajectory((1 - alphas) * q_start + alphas * q_goal)

# one torque at waypoint 10 deforms the interior smoothly
shape = DeformationShape(steps=20, mu=0.15)
push = CorrectionEvent(waypoint_index=10, torque=np.array([1.2, 0.5, -0.3]))
bent = deform(traj, push, shape)

moved = np.linalg.norm(bent.waypoints - traj.waypoints, axis=1)
print("\nper-waypoint joint displacement after one push at waypoint 10:")
print(" ", np.array2string(moved, precision=3, suppress_small=True))
print("endpoints moved:", moved[0], moved[-1])

ee_before = ee_batch(arm, traj.waypoints)
ee_after = ee_batch(arm, bent.waypoints)
print("end-effector shift at the pushed waypoint:",
      np.round(ee_after[10] - ee_before[10], 3).tolist())
