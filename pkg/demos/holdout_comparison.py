"""Hold out 20% of the sites and rank models (a)-(d) by Tjur's R2 on the held-out part.

    python demos/holdout_comparison.py [--sweeps 3000] [--seed 0]
"""
import argparse

from prefsdm import (ChainConfig, ModelSpec, compare_models, figure4_scenario, fit, holdout_split,
                     holdout_tjur, simulate_scenario)
from prefsdm.evaluate import format_comparison

ap = argparse.ArgumentParser()
ap.add_argument("--sweeps", type=int, default=3000)
ap.add_argument("--seed", type=int, default=0)
opts = ap.parse_args()

sc = simulate_scenario(figure4_scenario(), opts.seed)
train, test = holdout_split(sc.pa, 0.2, opts.seed)
print(f"fitting on {len(train)} sites, scoring on {len(test)}")
results = []
for kind in ("a", "b", "c", "d"):
    arch = fit(ModelSpec(kind), train, sc.raster,
               chain=ChainConfig(burn_in=opts.sweeps, keep=opts.sweeps, seed=opts.seed))
    results.append((kind, holdout_tjur(arch, kind, sc.raster, test, seed=opts.seed)))
print(format_comparison(compare_models(results)))
