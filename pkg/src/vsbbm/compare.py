"""Gaussian-comparison experiment: couple a profile with its envelopes on a
shared genealogy and test the Laplace-transform sandwich empirically.

The o(1) corrections of the limit statement are untestable at fixed t; the
acceptance band is three combined standard errors, and raw gaps are always
reported so t-trends can be studied.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from vsbbm.extremal import centering
from vsbbm.genealogy import GenealogyTree, OffspringDistribution, sample_tree, tree_rng
from vsbbm.sampler import ParticleConfiguration, sample_leaf_positions
from vsbbm.speed import EnvelopePair, SpeedProfile, blend


@dataclass(frozen=True, eq=False)
class CoupledTriple:
    """Three independent Gaussian draws (A, upper envelope, lower envelope)
    on one shared tree."""

    tree: GenealogyTree
    config_a: ParticleConfiguration
    config_upper: ParticleConfiguration
    config_lower: ParticleConfiguration
    horizon: float


def coupled_sample(
    tree: GenealogyTree,
    profile: SpeedProfile,
    envelopes: EnvelopePair,
    t: float,
    seed: int,
    rngs=None,
) -> CoupledTriple:
    """Sample the three fields on the same tree with independent Gaussian
    streams (seed offsets 0/1/2 unless explicit generators are supplied)."""
    if abs(envelopes.t - t) > 1e-12:
        raise ValueError("envelope pair was built for a different horizon")
    if rngs is None:
        rngs = [tree_rng((seed << 2) + i) for i in range(3)]
    configs = []
    for prof, rng in zip((profile, envelopes.upper, envelopes.lower), rngs):
        pos = sample_leaf_positions(tree, prof, t, rng)
        configs.append(
            ParticleConfiguration(tree=tree, profile=prof, horizon=t, leaf_positions=pos)
        )
    return CoupledTriple(
        tree=tree,
        config_a=configs[0],
        config_upper=configs[1],
        config_lower=configs[2],
        horizon=t,
    )


def interpolate(triple: CoupledTriple, h: float) -> ParticleConfiguration:
    """Leafwise sqrt(h) x + sqrt(1-h) y-bar; its speed function is the
    h-blend of the two speed functions."""
    if not 0.0 <= h <= 1.0:
        raise ValueError("h must lie in [0, 1]")
    pos = (
        math.sqrt(h) * triple.config_a.leaf_positions
        + math.sqrt(1.0 - h) * triple.config_upper.leaf_positions
    )
    prof = blend(triple.config_a.profile, triple.config_upper.profile, h)
    return ParticleConfiguration(
        tree=triple.tree, profile=prof, horizon=triple.horizon, leaf_positions=pos
    )


def _laplace_cells(counts_matrix, u_grid, c_grid):
    """Per-(u, c) mean and SE of exp(-c N_u) from per-replicate exceedance
    count matrices (replicates x len(u_grid))."""
    counts = np.asarray(counts_matrix)
    out = {}
    n = counts.shape[0]
    for iu, u in enumerate(u_grid):
        for c in c_grid:
            vals = np.exp(-c * counts[:, iu])
            mean = math.fsum(vals.tolist()) / n
            var = math.fsum(((vals - mean) ** 2).tolist()) / (n - 1)
            out[(u, c)] = (mean, math.sqrt(var / n))
    return out


def collect_exceedances(
    offspring: OffspringDistribution,
    profiles: dict[str, SpeedProfile],
    t: float,
    u_grid,
    replicates: int,
    seed: int,
) -> dict[str, np.ndarray]:
    """Replicate exceedance-count matrices for several profiles coupled on
    shared trees (trees redrawn per replicate, Gaussians independent per
    profile)."""
    u_grid = np.asarray(u_grid, dtype=np.float64)
    m = centering(t, "tilde")
    names = list(profiles)
    counts = {name: np.empty((replicates, len(u_grid)), dtype=np.int64) for name in names}
    tree_stream = tree_rng((seed << 3) + 7)
    gauss_streams = {name: tree_rng((seed << 3) + i) for i, name in enumerate(names)}
    for rep in range(replicates):
        tree = sample_tree(offspring, t, seed=0, rng=tree_stream)
        for name in names:
            pos = sample_leaf_positions(tree, profiles[name], t, gauss_streams[name])
            centered = np.sort(pos - m)
            counts[name][rep] = len(centered) - np.searchsorted(centered, u_grid, side="right")
    return counts


def sandwich_report(
    counts_a: np.ndarray,
    counts_upper: np.ndarray,
    counts_lower: np.ndarray,
    u_grid,
    c_grid,
    n_se: float = 3.0,
) -> dict:
    """Per-cell sandwich check L_lower - n_se*SE <= L_A <= L_upper + n_se*SE.

    The SE in each one-sided check combines both estimators in quadrature.
    Returns a JSON-ready report with per-cell estimates, gaps, and
    PASS/FAIL flags plus an aggregate count.
    """
    u_grid = list(np.asarray(u_grid, dtype=np.float64))
    c_grid = list(np.asarray(c_grid, dtype=np.float64))
    if not (counts_a.shape == counts_upper.shape == counts_lower.shape):
        raise ValueError("mismatched replicate count matrices")
    cells_a = _laplace_cells(counts_a, u_grid, c_grid)
    cells_up = _laplace_cells(counts_upper, u_grid, c_grid)
    cells_low = _laplace_cells(counts_lower, u_grid, c_grid)
    cells = []
    n_pass = 0
    for u in u_grid:
        for c in c_grid:
            la, se_a = cells_a[(u, c)]
            lu, se_u = cells_up[(u, c)]
            ll, se_l = cells_low[(u, c)]
            se_up = math.hypot(se_a, se_u)
            se_lo = math.hypot(se_a, se_l)
            pass_upper = la <= lu + n_se * se_up
            pass_lower = la >= ll - n_se * se_lo
            n_pass += pass_upper and pass_lower
            cells.append(
                {
                    "u": u,
                    "c": c,
                    "L_A": la,
                    "L_up": lu,
                    "L_low": ll,
                    "SE_A": se_a,
                    "SE_up": se_u,
                    "SE_low": se_l,
                    "gap_upper": lu - la,
                    "gap_lower": la - ll,
                    "pass_upper": bool(pass_upper),
                    "pass_lower": bool(pass_lower),
                }
            )
    return {
        "cells": cells,
        "n_cells": len(cells),
        "n_pass": int(n_pass),
        "n_se": n_se,
    }


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
