"""Long-run behaviour: stationary location weights, the limiting
metapopulation, absorption tails of the block process, and the quasi-limiting
law of the non-absorbed process.

The label-free block process only ever refines its state and is eventually
absorbed in the all-singletons partition whenever the recombination support
is separating (the meet of the support partitions is the all-singletons
partition). Conditioned on non-absorption it settles on the set of reachable
states with maximal sojourn probability; the conditional limit weights are
hitting-time transforms computed by back-substitution along the refinement
order. Labelled versions attach one stationary location weight per block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward import RecombinationModel
from .linear import build_base_matrix, build_linear_system, matrix_power
from .measures import Distribution, Metapopulation, tensor
from .partitions import (
    LabelledPartition,
    Partition,
    coarsest,
    finest,
    meet,
    whole_labelled,
)
import itertools

_PEAK_RTOL = 1e-12  # sojourn probabilities within this of the max count as maximal


@dataclass(frozen=True)
class StationaryProfile:
    """Stationary row vector of a primitive stochastic matrix, with the
    smallest power at which every entry of the matrix is positive."""

    weights: np.ndarray
    primitivity_index: int


def stationary_distribution(migration) -> StationaryProfile:
    m = np.asarray(migration, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("migration matrix must be square")
    if m.min() < 0 or np.abs(m.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("migration matrix is not row-stochastic")
    n = m.shape[0]
    positive = m > 0
    power = positive.copy()
    bound = (n - 1) ** 2 + 1
    index = None
    for k in range(1, bound + 1):
        if power.all():
            index = k
            break
        power = (power.astype(np.int64) @ positive.astype(np.int64)) > 0
    if index is None:
        reach = np.linalg.matrix_power(
            (np.eye(n, dtype=np.int64) + positive.astype(np.int64)), n - 1
        ) > 0
        kind = "reducible" if not reach.all() else "periodic"
        raise ValueError(
            f"migration matrix is not primitive ({kind}); no unique stationary profile"
        )
    rows = np.vstack([m.T - np.eye(n), np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    q, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    if q.min() <= 0 or np.abs(q @ m - q).max() > 1e-10:
        raise ValueError("failed to compute a positive stationary profile")
    return StationaryProfile(q, index)


def separating_support(model: RecombinationModel) -> bool:
    """True when the meet of the recombination support is all-singletons, so
    every pair of sites is eventually split apart."""
    parts = list(model.recomb)
    acc = parts[0]
    for p in parts[1:]:
        acc = meet(acc, p)
    return acc == finest(model.sites)


def limit_metapopulation(mu0: Metapopulation, model: RecombinationModel) -> Metapopulation:
    """The time-infinity metapopulation: identical across locations, a product
    over sites of stationarily averaged single-site marginals.

    Requires a primitive migration matrix and a separating recombination
    support.
    """
    profile = stationary_distribution(model.migration)
    if not separating_support(model):
        raise ValueError(
            "recombination support never separates some sites; model those "
            "sites merged into a single one"
        )
    if mu0.support != model.sites:
        raise ValueError("initial state must cover all sites")
    factors = []
    for site in model.sites:
        single = mu0.marginalise((site,)).stack()  # (locations, alphabet)
        factors.append(
            Distribution(mu0.space, (site,), profile.weights @ single, atol=1e-9)
        )
    limit = tensor(factors)
    return Metapopulation([limit] * model.num_locations)


def absorption_tail(
    model: RecombinationModel, t_max: int, start: Partition | None = None
) -> np.ndarray:
    """P(block process not yet fully split) for t = 0..t_max.

    Propagates mass through the transient part of the label-free matrix and
    sums what survives; subtracting the absorbed mass from 1 instead would
    cancel catastrophically once the tail falls below machine epsilon.
    """
    if t_max < 0:
        raise ValueError("negative horizon")
    if start is None:
        start = coarsest(model.sites)
    states, mat = build_base_matrix(model, start)
    fin = finest(model.sites)
    keep = [i for i, p in enumerate(states) if p != fin]
    sub = mat[np.ix_(keep, keep)]
    v = np.zeros(len(keep))
    for i, j in enumerate(keep):
        if states[j] == start:
            v[i] = 1.0
    out = np.empty(t_max + 1)
    for t in range(t_max + 1):
        out[t] = v.sum()
        if t < t_max:
            v = v @ sub
    return out


@dataclass(frozen=True)
class QldReport:
    """Quasi-limiting behaviour of the block process started at `start`."""

    start: Partition
    max_sojourn: float
    peak_states: list[Partition]
    hitting_weights: dict[Partition, float]
    qlim: dict[Partition, float]
    labelled_qlim: dict[LabelledPartition, float]
    location_weights: np.ndarray


def _hitting_transform(states, mat, pos, start_idx, eta, peak_set, boundary):
    """Expected eta^(-hitting time of `boundary`), restricted to hitting it,
    solved backwards along the refinement order.

    States in `boundary` get value 1. For a peak state outside the boundary
    the pivot vanishes; its value is 0 unless mass flows from it to the
    boundary, which cannot happen when peaks only stay or absorb.
    """
    h = np.zeros(len(states))
    for i in reversed(range(len(states))):
        if states[i] in boundary:
            h[i] = 1.0
            continue
        row = mat[i]
        rhs = float(row @ h) - row[i] * h[i]
        rhs /= eta
        pivot = 1.0 - row[i] / eta
        if states[i] in peak_set:
            if abs(rhs) > 1e-300:
                raise ValueError(
                    "divergent expectation: a maximal-sojourn state feeds the target"
                )
            h[i] = 0.0
        else:
            h[i] = rhs / pivot
    return h[start_idx]


def qld(model: RecombinationModel, start: Partition | None = None) -> QldReport:
    """Quasi-limiting distribution over maximal-sojourn states, with the
    labelled refinement weighted by stationary location weights.

    The default start is the one-block partition; other starts are computed
    the same way over their own reachable closure. With a non-separating
    support the maximal sojourn is 1 and the report degrades to hitting
    probabilities of the never-splitting states.
    """
    if start is None:
        start = coarsest(model.sites)
    states, mat = build_base_matrix(model, start)
    pos = {p: i for i, p in enumerate(states)}
    fin = finest(model.sites)
    transient = [p for p in states if p != fin]
    if not transient:
        raise ValueError("quasi-limit undefined: the start state is already fully split")
    diag = {p: mat[pos[p], pos[p]] for p in transient}
    eta = max(diag.values())
    if eta <= 0.0:
        raise ValueError("quasi-limit undefined: every step fully splits the state")
    peaks = [p for p in transient if diag[p] >= eta * (1.0 - _PEAK_RTOL)]
    peak_set = set(peaks)

    start_idx = pos[start]
    g = {
        p: _hitting_transform(states, mat, pos, start_idx, eta, peak_set, {p})
        for p in peaks
    }
    g_all = _hitting_transform(states, mat, pos, start_idx, eta, peak_set, peak_set)
    if g_all <= 0.0:
        raise ValueError("quasi-limit undefined: no maximal-sojourn state is reachable")
    qlim = {p: g[p] / g_all for p in peaks}

    profile = stationary_distribution(model.migration)
    q = profile.weights
    labelled: dict[LabelledPartition, float] = {}
    for p in peaks:
        for labels in itertools.product(range(model.num_locations), repeat=len(p)):
            weight = qlim[p]
            for lab in labels:
                weight *= q[lab]
            labelled[LabelledPartition(zip(p.blocks, labels))] = weight
    return QldReport(
        start=start,
        max_sojourn=eta,
        peak_states=peaks,
        hitting_weights=g,
        qlim=qlim,
        labelled_qlim=labelled,
        location_weights=q,
    )


def conditioned_law(
    model: RecombinationModel,
    t: int,
    start: LabelledPartition | None = None,
) -> dict[LabelledPartition, float]:
    """Exact law of the labelled process at time t conditioned on not yet
    being fully split.

    Propagates the restriction of the transition matrix to non-absorbed
    states, renormalising each step; algebraically identical to conditioning
    the t-th matrix power, but immune to underflow at large t.
    """
    if t < 0:
        raise ValueError("negative horizon")
    if start is None:
        start = whole_labelled(model.sites, 0)
    system = build_linear_system(model, starts=[start])
    nsites = model.num_sites
    keep = [i for i, s in enumerate(system.states) if len(s) < nsites]
    if not keep:
        raise ValueError("conditioning event has probability zero")
    sub = system.matrix[np.ix_(keep, keep)]
    kept_states = [system.states[i] for i in keep]
    v = np.zeros(len(keep))
    try:
        v[kept_states.index(start)] = 1.0
    except ValueError:
        raise ValueError("conditioning event has probability zero") from None
    for _ in range(t):
        v = v @ sub
        total = v.sum()
        if total <= 0.0:
            raise ValueError("conditioning event has probability zero")
        v /= total
    total = v.sum()
    return {s: v[i] / total for i, s in enumerate(kept_states)}


def fitted_decay_rate(errors, t_start: int | None = None, t_end: int | None = None) -> float:
    """Geometric rate fitted by least squares on the log of an error
    trajectory, over [t_start, t_end] (default: the last half)."""
    e = np.asarray(errors, dtype=float)
    if t_end is None:
        t_end = len(e) - 1
    if t_start is None:
        t_start = t_end // 2
    ts = np.arange(t_start, t_end + 1)
    window = e[t_start : t_end + 1]
    mask = window > 1e-300
    if mask.sum() < 2:
        raise ValueError("not enough positive errors to fit a rate")
    slope = np.polyfit(ts[mask], np.log(window[mask]), 1)[0]
    return float(np.exp(slope))
