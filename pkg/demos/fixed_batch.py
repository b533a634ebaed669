"""Per-sample regret at a fixed total batch for a few network sizes.

With b fixed, adding nodes splits the same work, so the regret curves
against samples seen should lie on top of each other.
"""

from gossipdda.experiment import preset_configs, run_experiment

for cfg in preset_configs("fixed_batch", rounds=30, seeds=(0, 1)):
    if cfg.n > 16:
        continue
    res = run_experiment(cfg)
    seen = res.mean("samples_seen")
    per = res.mean("regret_per_sample")
    pts = "  ".join(f"{int(seen[t]):>7d}:{per[t]:.4f}" for t in (4, 14, 29))
    print(f"n={cfg.n:2d}  k={res.manifest['k']}  {pts}")
