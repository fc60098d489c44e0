"""Missing-feature story: the human cares about something the robot has no
feature for. Every shifted confidence stays low, so the robot asks for samples
around the correction and fits a brand-new feature to them."""

import numpy as np

from featalign import TrainedFeature, learn_missing_feature, load_scenario, run_episode

sc = load_scenario("scenarios/missing_feature.json")
print("robot features:", [f.id for f in sc.feature_set])
print("the human additionally avoids a zone the robot knows nothing about\n")

report = run_episode(sc)
for event in report.events:
    kind = event["type"]
    if kind == "detection":
        print(f"detection: best confidence {event['beta_hat']:.3f}"
              f" (threshold {sc.learner.epsilon_beta})")
    elif kind == "diagnosis":
        print("diagnosis:", "missing feature!" if event["missing_feature"]
              else event["aligned_feature_ids"])
    elif kind == "missing_feature_query":
        print(f"query: {event['count']} samples around "
              f"{np.round(event['center'], 3).tolist()}, half-extent {event['half_extent']}")
    elif kind == "feature_learned":
        print(f"learned {event['feature_id']}: anchor "
              f"{np.round(event['anchor'], 4).tolist()}, width {event['width']:.4f}, "
              f"fit rmse {event['rmse']:.2e}")
    elif kind == "update":
        print("weights:", np.round(event["theta_after"], 3).tolist())
print("episode:", report.status, "with", report.metrics["correction_count"], "correction(s)\n")

# the standalone fitting utility works on any (point, value) samples
rng = np.random.default_rng(3)
truth = TrainedFeature("hidden", np.array([0.8, -0.4]), 0.3)
from featalign import MissingFeatureQuery

query = MissingFeatureQuery(center=np.array([0.9, -0.3]), half_extent=0.75, count=30)
pts = rng.uniform(query.center - 0.75, query.center + 0.75, (30, 2))
noisy = [(p, float(truth.eval_points(p[None])[0] + rng.normal(scale=0.02))) for p in pts]
fitted, rmse = learn_missing_feature(query, noisy)
print("standalone fit from noisy samples:")
print("  true anchor", truth.anchor.tolist(), "width", truth.width)
print("  fitted     ", fitted.anchor.round(3).tolist(), "width", round(fitted.width, 3),
      " sample rmse", round(rmse, 4))
