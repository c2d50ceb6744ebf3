"""Reference networks used by the tests, the docs and the CLI examples.

``sixnode`` is a small six-variable discrete network with fixed,
strongly-identified parameters: every conditional probability lies in
[0.1, 0.8] and flipping any single parent level shifts the child's odds by
a factor well above 3, so desk-scale samples pin down the structure.
``alarm`` is the classic 37-node patient-monitoring benchmark structure;
``alarm_fitted`` dresses it with seeded random parameters for recovery
experiments.
"""

from __future__ import annotations

import numpy as np

from .data import DiscreteCPT, FittedNetwork
from .graph import Graph, parse_modelstring

SIXNODE_MODEL = "[A][C][F][B|A][D|A:C][E|B:F]"

ALARM_MODEL = (
    "[HIST|LVF][CVP|LVV][PCWP|LVV][HYP][LVV|HYP:LVF][LVF][STKV|HYP:LVF]"
    "[ERLO][HRBP|ERLO:HR][HREK|ERCA:HR][ERCA][HRSA|ERCA:HR][ANES][APL]"
    "[TPR|APL][ECO2|ACO2:VLNG][KINK][MINV|INT:VLNG][FIO2][PVS|FIO2:VALV]"
    "[SAO2|PVS:SHNT][PAP|PMB][PMB][SHNT|INT:PMB][INT][PRSS|INT:KINK:VTUB]"
    "[DISC][MVS][VMCH|MVS][VTUB|DISC:VMCH][VLNG|INT:KINK:VTUB]"
    "[VALV|INT:VLNG][ACO2|VALV][CCHL|ACO2:ANES:SAO2:TPR][HR|CCHL]"
    "[CO|HR:STKV][BP|CO:TPR]"
)

_L3 = ("a", "b", "c")
_L2 = ("a", "b")


def _peak(level: int) -> list[float]:
    out = [0.15, 0.15, 0.15]
    out[level] = 0.7
    return out


def _dip(level: int) -> list[float]:
    out = [0.45, 0.45, 0.45]
    out[level] = 0.1
    return out


def sixnode() -> FittedNetwork:
    """Six-node discrete network with fixed strong parameters.

    One parent of each two-parent node shifts the child's peak level, the
    other flips the peak into a dip, so every parent's effect survives
    marginalization over the co-parent (no parity-style cancellation) and
    every single-level change moves some outcome's odds by more than 3x.
    """
    graph = parse_modelstring(SIXNODE_MODEL)
    # parent configs indexed first-parent-major: j = 3 * a + c for D,
    # j = 2 * b + f for E
    d_cols = []
    for a in range(3):
        d_cols.append(_peak(a))          # c = 0: peak at a
        d_cols.append(_peak((a + 1) % 3))  # c = 1: peak shifted
        d_cols.append(_dip(a))           # c = 2: dip at a
    e_cols = []
    for b in range(3):
        e_cols.append(_peak(b))          # f = 0: peak at b
        e_cols.append(_dip(b))           # f = 1: dip at b
    locals_ = {
        "A": DiscreteCPT(_L3, (), (), np.array([[0.35], [0.40], [0.25]])),
        "C": DiscreteCPT(_L3, (), (), np.array([[0.40], [0.35], [0.25]])),
        "F": DiscreteCPT(_L2, (), (), np.array([[0.55], [0.45]])),
        # child level tracks the parent level
        "B": DiscreteCPT(_L3, ("A",), (_L3,),
                         np.array([_peak(a) for a in range(3)]).T),
        "D": DiscreteCPT(_L3, ("A", "C"), (_L3, _L3), np.array(d_cols).T),
        "E": DiscreteCPT(_L3, ("B", "F"), (_L3, _L2), np.array(e_cols).T),
    }
    return FittedNetwork(graph, locals_)


def alarm() -> Graph:
    """The 37-node, 46-arc patient-monitoring benchmark structure."""
    return parse_modelstring(ALARM_MODEL)


def alarm_fitted(seed: int, concentration: float = 0.5,
                 floor: float = 0.05) -> FittedNetwork:
    """ALARM structure with seeded random parameters.

    Level counts are drawn uniformly from {2, 3, 4} per node; each CPT column
    is Dirichlet(concentration) mixed with a uniform floor so every cell
    probability is at least ``floor``.
    """
    graph = alarm()
    rng = np.random.default_rng(seed)
    letters = "abcd"
    nlevels = {n: int(rng.integers(2, 5)) for n in graph.nodes}
    locals_ = {}
    for node in graph.nodes:
        r = nlevels[node]
        levels = tuple(letters[:r])
        parents = tuple(sorted(graph.parents(node)))
        plevels = tuple(tuple(letters[:nlevels[p]]) for p in parents)
        q = 1
        for ls in plevels:
            q *= len(ls)
        raw = rng.dirichlet([concentration] * r, size=q).T  # (r, q)
        table = floor + (1.0 - r * floor) * raw
        locals_[node] = DiscreteCPT(levels, parents, plevels, table)
    return FittedNetwork(graph, locals_)
