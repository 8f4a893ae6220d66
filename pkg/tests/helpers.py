"""Shared generators for the test suite (deterministic, seeded by caller)."""

import numpy as np

from jkoflow import Domain, GridDensity, ParticleDensity, from_grid


def spread_particles(rng, domain, n, fill=0.9):
    """Random sorted particles with gaps bounded away from zero.

    Gaps are drawn uniform in [0.3, 1.7] then rescaled so the configuration
    occupies a random subinterval covering `fill` of the domain at most.
    Keeps finite differences and log terms well conditioned.
    """
    if n == 1:
        return ParticleDensity(domain, rng.uniform(domain.lower, domain.upper, size=1))
    gaps = rng.uniform(0.3, 1.7, size=n - 1)
    x = np.concatenate([[0.0], np.cumsum(gaps)])
    width = rng.uniform(0.5, 1.0) * fill * domain.length
    x = x / x[-1] * width
    slack = domain.length - width
    x = x + domain.lower + rng.uniform(0.0, 1.0) * slack
    return ParticleDensity(domain, x)


def uniform_particles(domain, n):
    g = GridDensity(
        np.array([domain.lower, domain.upper]), np.array([1.0 / domain.length])
    )
    return from_grid(g, n)


def grid_profile(domain, values_fn, cells=512):
    """GridDensity sampling values_fn at cell midpoints, normalized."""
    edges = np.linspace(domain.lower, domain.upper, cells + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    vals = np.maximum(np.asarray(values_fn(mids), dtype=float), 0.0)
    mass = float(np.sum(vals * np.diff(edges)))
    return GridDensity(edges, vals / mass)
