"""Fuse presence/absence sites with a degraded presence-only pattern using model (e).

    python demos/fusion.py [--sweeps 5000] [--seed 0]

The presence-only events come from an LGCP whose field eta_PO also shifts the
latent presence surface (delta_PO = 0.8). A quarter of the region is never
surveyed for presence-only data (q = 0 there), which the likelihood handles
through the degradation layers.
"""
import argparse

from prefsdm import ChainConfig, ModelSpec, PriorSpec, fit, fusion_scenario, simulate_scenario

ap = argparse.ArgumentParser()
ap.add_argument("--sweeps", type=int, default=5000)
ap.add_argument("--seed", type=int, default=0)
opts = ap.parse_args()

sc = simulate_scenario(fusion_scenario(delta_po=0.8), opts.seed)
print(f"{len(sc.pa)} presence/absence sites, {len(sc.po)} presence-only events, "
      f"{int((sc.layers.q == 0).sum())} unsurveyed cells")
for truncated in (True, False):
    arch = fit(ModelSpec("e"), sc.pa, sc.raster, sc.po, sc.layers,
               priors=PriorSpec(delta_po_truncated=truncated),
               chain=ChainConfig(burn_in=opts.sweeps, keep=opts.sweeps, seed=opts.seed))
    label = "delta_PO >= 0" if truncated else "delta_PO free"
    for name in ("delta_pa", "delta_po"):
        m, lo, hi = arch.summary(name)
        print(f"{label:>14}  {name}: {m:5.2f} [{lo:5.2f}, {hi:5.2f}]")
