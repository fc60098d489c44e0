"""The whole loop on the moved-laptop scenario, narrated from the event log:
plan, push, detect, diagnose, align, re-check, update, replan, and a second
episode that needs no help at all."""

import numpy as np

from featalign import Belief, FeatureSet, TrainedFeature, load_scenario, run_episode

sc = load_scenario("scenarios/desk_shift.json")
report = run_episode(sc)

for event in report.events:
    step, kind = event["step"], event["type"]
    if kind == "plan":
        clear = {k: round(v, 3) for k, v in event["clearances"].items()}
        print(f"[{step}] {event['reason']} plan, min clearance per object: {clear}")
    elif kind == "correction":
        print(f"[{step}] human pushes waypoint {event['waypoint_index']} "
              f"(effort {event['torque_norm_sq']:.2f})")
    elif kind in ("detection", "recheck"):
        betas = {p["feature_id"]: round(p["beta"], 2) for p in event["per_feature"]}
        print(f"[{step}] {kind}: confidences {betas} -> beta_hat {event['beta_hat']:.2f}")
    elif kind == "diagnosis":
        verdicts = {p["feature_id"]: p["verdict"] for p in event["per_feature"]}
        print(f"[{step}] diagnosis against {event['object_id']!r} moved by "
              f"{np.round(event['delta'], 2).tolist()}: {verdicts}")
    elif kind == "alignment":
        print(f"[{step}] aligned {event['feature_id']} -> peak "
              f"{np.round(event['new_peak'], 3).tolist()}")
    elif kind == "update":
        print(f"[{step}] weight update (posterior {event['weight']:.2f}): "
              f"{np.round(event['theta_before'], 3).tolist()} -> "
              f"{np.round(event['theta_after'], 3).tolist()}")
    elif kind == "done":
        print(f"[{step}] done: {event['status']}")

print("\nmetrics:", {k: (round(v, 3) if isinstance(v, float) else v)
                     for k, v in report.metrics.items()
                     if not isinstance(v, dict)})

# rerun with the repaired representation: nothing left to correct
fs = FeatureSet(tuple(
    TrainedFeature(f["id"], np.array(f["anchor"]), f["width"], np.array(f["delta_acc"]))
    for f in report.final_features
))
second = run_episode(sc, feature_set=fs, belief=Belief(np.array(report.final_theta)))
print(f"\nsecond episode: {second.status} with "
      f"{second.metrics['correction_count']} corrections "
      f"({sum(1 for e in second.events if e['type'] == 'plan')} plan event)")
