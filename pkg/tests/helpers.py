"""Shared generators for randomized tests."""

from __future__ import annotations

import numpy as np

# pass/fail lines collected by the acceptance suite; conftest prints them
# in the terminal summary (pytest captures even low-level stdout writes)
ACCEPTANCE_VERDICTS: list[str] = []

from bnsl import Dataset, Graph
from bnsl.data import CategoricalColumn, NumericColumn


def random_dag(rng: np.random.Generator, n_nodes: int, p_edge: float = 0.35) -> Graph:
    """Random DAG: random topological order, each forward pair kept with p_edge."""
    labels = [f"N{i}" for i in range(n_nodes)]
    order = rng.permutation(n_nodes)
    arcs = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < p_edge:
                arcs.append((labels[order[i]], labels[order[j]]))
    return Graph(labels, arcs)


def random_discrete_dataset(rng: np.random.Generator, names, n_rows: int,
                            n_levels: int = 3) -> Dataset:
    cols = {}
    for name in names:
        codes = rng.integers(0, n_levels, size=n_rows)
        levels = tuple("abcd"[:n_levels])
        cols[name] = CategoricalColumn(levels, codes)
    return Dataset(tuple(names), cols)


def random_gaussian_dataset(rng: np.random.Generator, names, n_rows: int) -> Dataset:
    cols = {name: NumericColumn(rng.standard_normal(n_rows)) for name in names}
    return Dataset(tuple(names), cols)


def random_table(rng: np.random.Generator, max_dim: int = 4):
    """Random contingency counts (R, C, L) with every stratum populated."""
    from bnsl import ContingencyTable

    r = int(rng.integers(2, max_dim + 1))
    c = int(rng.integers(2, max_dim + 1))
    L = int(rng.integers(1, max_dim + 1))
    counts = rng.integers(0, 30, size=(r, c, L))
    # keep every stratum observed so L matches its definition
    for k in range(L):
        if counts[:, :, k].sum() == 0:
            counts[0, 0, k] = 1
    return ContingencyTable(counts.astype(np.int64), r, c, L, int(counts.sum()))
