"""JSON/CSV boundary. Sites are 1-based in every document and 0-based
internally; locations appear under their configured names. Partitions
serialise as lists of blocks, labelled partitions as block records with a
label field."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .asymptotics import QldReport
from .measures import Distribution, TypeSpace
from .partitions import LabelledPartition, Partition


def partition_to_doc(part: Partition) -> list[list[int]]:
    return [[s + 1 for s in block] for block in part.blocks]


def partition_from_doc(doc, n: int, path: str) -> Partition:
    if not isinstance(doc, list) or not doc:
        raise ValueError(f"{path}: expected a non-empty list of blocks")
    seen: set[int] = set()
    blocks = []
    for j, block in enumerate(doc):
        if not isinstance(block, list) or not block:
            raise ValueError(f"{path}[{j}]: expected a non-empty list of sites")
        cleaned = []
        for s in block:
            if not isinstance(s, int) or isinstance(s, bool) or not 1 <= s <= n:
                raise ValueError(f"{path}[{j}]: site {s!r} is not in 1..{n}")
            if s - 1 in seen:
                raise ValueError(f"{path}[{j}]: site {s} appears twice")
            seen.add(s - 1)
            cleaned.append(s - 1)
        blocks.append(cleaned)
    return Partition(blocks)


def labelled_to_doc(bdelta: LabelledPartition, names: Sequence[str]) -> list[dict]:
    return [
        {"sites": [s + 1 for s in block], "label": names[label]}
        for block, label in bdelta.items
    ]


def sequence_label(space: TypeSpace, support: Sequence[int], index: int) -> str:
    """Mixed-radix coordinates of one weight entry, comma-joined."""
    shape = space.shape(tuple(support))
    letters = np.unravel_index(index, shape)
    return ",".join(str(int(x)) for x in letters)


def distribution_rows(dist: Distribution, location: str, quantity: str):
    """(quantity, index, value) triples in mixed-radix order."""
    for i, w in enumerate(dist.weights):
        yield quantity, f"{location}:{sequence_label(dist.space, dist.support, i)}", float(w)


def qld_report_to_doc(report: QldReport, names: Sequence[str]) -> dict:
    """The quasi-limit document: eta, the peak states F, their conditional
    probabilities, the labelled weights, and the stationary location
    weights."""
    peaks = list(report.peak_states)
    labelled = sorted(report.labelled_qlim, key=lambda s: s.sort_key())
    return {
        "eta": float(report.max_sojourn),
        "F": [partition_to_doc(p) for p in peaks],
        "P_qlim": [float(report.qlim[p]) for p in peaks],
        "labelled_qlim": [
            {"blocks": labelled_to_doc(s, names), "p": float(report.labelled_qlim[s])}
            for s in labelled
        ],
        "q": [float(x) for x in report.location_weights],
    }


def partition_str(part: Partition) -> str:
    """Compact one-line form, blocks separated by '|': \"1,2|3\"."""
    return "|".join(",".join(str(s + 1) for s in block) for block in part.blocks)


def labelled_str(bdelta: LabelledPartition, names: Sequence[str]) -> str:
    """Compact labelled form: \"1,2@left|3@right\"."""
    return "|".join(
        ",".join(str(s + 1) for s in block) + "@" + names[label]
        for block, label in bdelta.items
    )


def csv_float(x: float) -> str:
    return f"{x:.12g}"
