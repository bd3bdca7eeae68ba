"""Seeded random models and states shared across test modules."""

import numpy as np

from recolat.forward import RecombinationModel
from recolat.measures import Distribution, Metapopulation, TypeSpace, tensor
from recolat.partitions import Partition, enumerate_partitions, finest


def random_model(rng, n, locations, sizes=None, include_finest=True):
    """Random recombination distribution and strictly positive migration matrix.

    With `include_finest` the all-singletons partition always carries weight,
    which makes the support separating (its meet is the finest partition).
    """
    space = TypeSpace(sizes if sizes is not None else (2,) * n)
    parts = enumerate_partitions(range(n))
    npick = int(rng.integers(1, len(parts) + 1))
    idx = rng.choice(len(parts), size=npick, replace=False)
    chosen = {parts[int(i)] for i in idx}
    if include_finest:
        chosen.add(finest(range(n)))
    if chosen == {finest(range(n))}:
        # keep a transient component so absorption is not sure in one step
        chosen.add(parts[0])
    ordered = sorted(chosen, key=lambda p: p.rgs())
    weights = rng.dirichlet(np.ones(len(ordered)))
    recomb = {p: float(w) for p, w in zip(ordered, weights)}
    mig = rng.random((locations, locations)) + 0.1
    mig = mig / mig.sum(axis=1, keepdims=True)
    return RecombinationModel(space, recomb, mig)


def two_site_model(rng, locations, r_split=None):
    """n = 2 model; only the whole-set and all-singletons partitions exist."""
    space = TypeSpace((2, 2))
    split = float(rng.uniform(0.1, 0.9)) if r_split is None else r_split
    recomb = {
        Partition([[0, 1]]): 1.0 - split,
        Partition([[0], [1]]): split,
    }
    mig = rng.random((locations, locations)) + 0.1
    mig = mig / mig.sum(axis=1, keepdims=True)
    return RecombinationModel(space, recomb, mig)


def nonmonotone_sojourn_model(locations=2, migration=None):
    """Four sites; weight 1/2 on all-singletons, 1/10 on {{0,1},{2,3}},
    2/5 on the one-block partition. Sojourn probabilities are not monotone
    along refinement here: 2/5 (one block), 1/4 ({{0,1},{2,3}}), then 1/2
    again at the half-split states, which therefore carry the quasi-limit."""
    space = TypeSpace((2, 2, 2, 2))
    recomb = {
        Partition([[0], [1], [2], [3]]): 0.5,
        Partition([[0, 1], [2, 3]]): 0.1,
        Partition([[0, 1, 2, 3]]): 0.4,
    }
    if migration is None:
        migration = np.array([[0.7, 0.3], [0.4, 0.6]])[:locations, :locations]
        migration = migration / migration.sum(axis=1, keepdims=True)
    return RecombinationModel(space, recomb, migration)


def random_ct_model(rng, n, locations, rate_scale=1.0):
    """Random continuous-time model: rates on a random set of proper
    partitions, conservative generator with positive off-diagonals."""
    from recolat.ctime import CtModel

    space = TypeSpace((2,) * n)
    parts = enumerate_partitions(range(n))
    rates = {}
    for p in parts:
        if len(p) > 1 and rng.random() < 0.7:
            rates[p] = float(rng.uniform(0.1, 1.5)) * rate_scale
    if not rates:
        rates[parts[-1]] = rate_scale
    gen = rng.random((locations, locations)) * 0.8
    np.fill_diagonal(gen, 0.0)
    np.fill_diagonal(gen, -gen.sum(axis=1))
    return CtModel(space, rates, gen)


def random_metapop(rng, space, locations, support=None):
    sup = space.sites if support is None else tuple(support)
    rows = rng.dirichlet(np.ones(space.dim(sup)), size=locations)
    return Metapopulation.from_stack(space, sup, rows)


def random_product_metapop(rng, space, locations):
    dists = []
    for _ in range(locations):
        factors = [
            Distribution(space, (s,), rng.dirichlet(np.ones(space.alphabet_sizes[s])))
            for s in space.sites
        ]
        dists.append(tensor(factors))
    return Metapopulation(dists)
