"""Diagnosis story: re-examine the unexplained correction in a frame shifted
by each object's displacement. A feature that explains the push there belongs
to that object and is translated to the object's new position.

Writes demos/out/diagnosis.png with the before/after picture when matplotlib
is available.
"""

import pathlib

import numpy as np

from featalign import (
    DeformationShape,
    deform,
    diagnose_and_correct,
    load_scenario,
    plan,
)
from featalign.arm import ee_batch
from featalign.oracle import TrueHuman

sc = load_scenario("scenarios/desk_shift.json")
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
xi_h = deform(xi_r, corr, shape)

fs_new, reports, query = diagnose_and_correct(
    xi_r, corr, xi_h, sc.feature_set, sc.env_train, sc.env_test,
    sc.model, shape, sc.learner,
)

for report in reports:
    print(f"examined object {report.applied_object!r}, displacement "
          f"{np.round(report.delta, 3).tolist()} (training minus test):")
    for p in report.per_feature:
        print(f"  {p.feature_id:>12}: beta_delta = {p.beta_delta:7.3f} -> {p.verdict.value}")
    print("  aligned:", list(report.aligned_feature_ids) or "nothing",
          "| missing feature:", report.missing_feature)

print("\nfeature peaks before -> after alignment:")
for old, new in zip(sc.feature_set, fs_new):
    print(f"  {old.id:>12}: {old.peak.round(3).tolist()} -> {new.peak.round(3).tolist()}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("\nmatplotlib not installed; skipping the figure")
else:
    out = pathlib.Path(__file__).resolve().parent / "out"
    out.mkdir(exist_ok=True)
    fig, axes = plt.subplots(1, 2, figsize=(11, 5), sharex=True, sharey=True)
    for ax, fs, title in (
        (axes[0], sc.feature_set, "before: anchors frozen at training poses"),
        (axes[1], fs_new, "after: explained feature moved to the object"),
    ):
        for f in fs:
            circle = plt.Circle(f.peak, 2 * f.width, color="tab:orange", alpha=0.25)
            ax.add_patch(circle)
            ax.annotate(f.id, f.peak, fontsize=8, ha="center")
        ee_r = ee_batch(sc.model, xi_r.waypoints)
        ee_h = ee_batch(sc.model, xi_h.waypoints)
        ax.plot(ee_r[:, 0], ee_r[:, 1], "o-", ms=3, label="planned")
        ax.plot(ee_h[:, 0], ee_h[:, 1], "s--", ms=3, label="after push")
        for env, marker, label in ((sc.env_train, "x", "training"), (sc.env_test, "*", "test")):
            pos = np.array([o.position for o in env.objects])
            ax.plot(pos[:, 0], pos[:, 1], marker, ls="none", ms=10, label=f"{label} objects")
        ax.set_title(title, fontsize=10)
        ax.set_aspect("equal")
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8, loc="lower left")
    fig.tight_layout()
    fig.savefig(out / "diagnosis.png", dpi=130)
    print(f"\nwrote {out / 'diagnosis.png'}")
