"""Posterior draws and their on-disk delimited-text layout.

Directory layout written by :meth:`PosteriorArchive.save`::

    scalars_<block>.csv     param,iter,chain,value
    field_<name>.csv        cell_or_site,iter,value   (chain 0)
    field_<name>_chain<c>.csv                          (further chains)
    sites.csv               site,x,y   conditioning sites for omega
    run.manifest            JSON: model, grid, config, acceptance, ESS
"""
from __future__ import annotations

import csv
import dataclasses
import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

from ..geodata import GridSpec, Location

ESS_THRESHOLD = 100.0


def _block(name):
    if name.startswith("alpha"):
        return "alpha"
    if name.startswith("beta_pa"):
        return "beta_pa"
    if name.startswith("beta_po"):
        return "beta_po"
    if name.startswith("delta"):
        return "delta"
    m = re.match(r"(sigma2|phi)_(.+)", name)
    if m:
        return f"{m.group(2)}_cov"
    return "other"


@dataclass
class PosteriorArchive:
    model: object
    draws: dict
    fields: dict
    field_iters: np.ndarray
    acceptance: dict = field(default_factory=dict)
    ess: dict = field(default_factory=dict)
    site_coords: np.ndarray = None
    grid: GridSpec = None
    config: dict = field(default_factory=dict)

    @property
    def param_names(self):
        return list(self.draws)

    @property
    def n_chains(self):
        return next(iter(self.draws.values())).shape[0] if self.draws else 0

    @property
    def n_draws(self):
        return next(iter(self.draws.values())).shape[1] if self.draws else 0

    def pooled(self, name):
        return self.draws[name].reshape(-1)

    def alpha(self):
        names = sorted((n for n in self.draws if n.startswith("alpha[")),
                       key=lambda s: int(s[6:-1]))
        return np.stack([self.pooled(n) for n in names], axis=1)

    def summary(self, name, level=0.95):
        x = self.pooled(name)
        lo, hi = np.quantile(x, [(1 - level) / 2, (1 + level) / 2])
        return float(x.mean()), float(lo), float(hi)

    def excludes_zero(self, name, level=0.95):
        _, lo, hi = self.summary(name, level)
        return lo > 0 or hi < 0

    @property
    def ess_ok(self):
        """True when every scalar parameter has ESS above 100."""
        return bool(self.ess) and all(v > ESS_THRESHOLD for v in self.ess.values())

    def ess_report(self):
        lines = [f"{n},{self.ess[n]:.1f},{'pass' if self.ess[n] > ESS_THRESHOLD else 'FAIL'}"
                 for n in self.draws if n in self.ess]
        lines.append(f"all_gt_{int(ESS_THRESHOLD)},{'pass' if self.ess_ok else 'FAIL'}")
        return "\n".join(lines)

    def field_draws(self, name, chain=None):
        """Field draws as (n_field_draws, n_sites), pooled over chains unless one is chosen."""
        f = self.fields[name]
        if chain is not None:
            return f[chain]
        return f.reshape(-1, f.shape[-1])

    def scalar_at_field_draws(self, name):
        """Scalar draws aligned with the stored field draws, pooled over chains."""
        return self.draws[name][:, self.field_iters].reshape(-1)

    # ---- persistence ------------------------------------------------------

    def save(self, out_dir, extra_manifest=None):
        os.makedirs(out_dir, exist_ok=True)
        blocks = {}
        for name in self.draws:
            blocks.setdefault(_block(name), []).append(name)
        for block, names in blocks.items():
            with open(os.path.join(out_dir, f"scalars_{block}.csv"), "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["param", "iter", "chain", "value"])
                for name in names:
                    arr = self.draws[name]
                    for c in range(arr.shape[0]):
                        for it, v in enumerate(arr[c]):
                            w.writerow([name, it, c, repr(float(v))])
        for name, arr in self.fields.items():
            for c in range(arr.shape[0]):
                suffix = "" if c == 0 else f"_chain{c}"
                with open(os.path.join(out_dir, f"field_{name}{suffix}.csv"), "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["cell_or_site", "iter", "value"])
                    for j, it in enumerate(self.field_iters):
                        for s, v in enumerate(arr[c, j]):
                            w.writerow([s, int(it), repr(float(v))])
        with open(os.path.join(out_dir, "sites.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["site", "x", "y"])
            for s, (x, y) in enumerate(np.asarray(self.site_coords).reshape(-1, 2)):
                w.writerow([s, repr(float(x)), repr(float(y))])
        manifest = self.manifest()
        if extra_manifest:
            manifest.update(extra_manifest)
        with open(os.path.join(out_dir, "run.manifest"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def manifest(self):
        cfg = {}
        for key, val in self.config.items():
            cfg[key] = dataclasses.asdict(val) if dataclasses.is_dataclass(val) else val
        g = self.grid
        return {
            "model": {"response": self.model.response, "intensity_pa": self.model.intensity_pa,
                      "intensity_po": self.model.intensity_po},
            "grid": {"origin": list(g.origin), "cell_width": g.cell_width,
                     "cell_height": g.cell_height, "n_cols": g.n_cols, "n_rows": g.n_rows},
            "config": cfg,
            "n_chains": self.n_chains,
            "n_draws": self.n_draws,
            "field_iters": [int(i) for i in self.field_iters],
            "acceptance": {k: round(v, 6) for k, v in self.acceptance.items()},
            "ess": {k: round(v, 3) for k, v in self.ess.items()},
            "ess_all_gt_100": self.ess_ok,
        }

    @classmethod
    def load(cls, out_dir):
        from .config import ChainConfig, ModelSpec, PriorSpec

        with open(os.path.join(out_dir, "run.manifest")) as fh:
            man = json.load(fh)
        model = ModelSpec(**man["model"])
        g = man["grid"]
        grid = GridSpec(Location(*g["origin"]), g["cell_width"], g["cell_height"], g["n_cols"],
                        g["n_rows"])
        n_chains, n_draws = man["n_chains"], man["n_draws"]
        draws = {}
        for fname in sorted(os.listdir(out_dir)):
            if not (fname.startswith("scalars_") and fname.endswith(".csv")):
                continue
            with open(os.path.join(out_dir, fname), newline="") as fh:
                reader = csv.reader(fh)
                next(reader)
                for name, it, c, v in reader:
                    arr = draws.setdefault(name, np.empty((n_chains, n_draws)))
                    arr[int(c), int(it)] = float(v)
        field_iters = np.asarray(man["field_iters"], dtype=np.int64)
        fields = {}
        names = set()
        for fname in os.listdir(out_dir):
            m = re.fullmatch(r"field_(.+?)(?:_chain\d+)?\.csv", fname)
            if m:
                names.add(m.group(1))
        pos = {int(it): j for j, it in enumerate(field_iters)}
        for name in sorted(names):
            per_chain = []
            for c in range(n_chains):
                suffix = "" if c == 0 else f"_chain{c}"
                with open(os.path.join(out_dir, f"field_{name}{suffix}.csv"), newline="") as fh:
                    reader = csv.reader(fh)
                    next(reader)
                    rows = [(int(s), int(it), float(v)) for s, it, v in reader]
                n_sites = max(r[0] for r in rows) + 1 if rows else 0
                arr = np.empty((len(field_iters), n_sites))
                for s, it, v in rows:
                    arr[pos[it], s] = v
                per_chain.append(arr)
            fields[name] = np.array(per_chain)
        with open(os.path.join(out_dir, "sites.csv"), newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            sites = np.array([[float(x), float(y)] for _, x, y in reader]).reshape(-1, 2)
        cfg = dict(man["config"])
        if isinstance(cfg.get("chain"), dict):
            cfg["chain"] = ChainConfig(**cfg["chain"])
        if isinstance(cfg.get("priors"), dict):
            cfg["priors"] = PriorSpec(**cfg["priors"])
        return cls(model, draws, fields, field_iters, man.get("acceptance", {}), man.get("ess", {}),
                   sites, grid, cfg)
