"""Greedy hill-climbing over directed acyclic graphs with delta scoring.

Each iteration evaluates every legal single-arc move (add, delete, reverse)
against the priors and the acyclicity constraint, then applies the move with
the largest positive score delta. Ties break on a canonical move order so
runs are exactly reproducible. Random restarts perturb the local optimum
with random legal moves and climb again, keeping the best graph seen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .graph import Graph, GraphError, Provenance, _has_directed_path, empty_graph
from .priors import Constraints, PriorKnowledge, PriorError, normalize_priors
from .scores import (ScoreCache, ScoreError, ScoreSpec, network_score,
                     score_delta)
from .trace import LearnTrace

_IMPROVEMENT_EPS = 1e-10
_TIE_EPS = 1e-8  # deltas closer than this are ties; the canonical move wins
_MOVE_ORDER = {"add": 0, "delete": 1, "reverse": 2}


@dataclass
class HillClimbConfig:
    """Options for the hill-climbing search."""

    score: ScoreSpec | str = "bic"
    priors: PriorKnowledge | None = None
    start: Graph | None = None
    restarts: int = 0
    perturb: int = 1
    max_iterations: int = 10000
    optimized: bool = True  # score cache on/off
    seed: int = 0
    debug: bool = False

    def __post_init__(self):
        if isinstance(self.score, str):
            self.score = ScoreSpec(kind=self.score)
        if self.score.kind == "lik":
            raise ScoreError("hill-climbing maximizes loglik, not its exponential")
        if self.restarts < 0:
            raise ScoreError("restarts must be nonnegative")
        if self.restarts > 0 and self.perturb < 1:
            raise ScoreError("perturb must be at least 1 when restarting")
        if self.max_iterations < 1:
            raise ScoreError("max_iterations must be positive")


def enumerate_moves(g: Graph, cons: Constraints | None = None) -> list[tuple[str, str, str]]:
    """Legal (kind, from, to) moves on a fully directed acyclic graph.

    Adds respect the blacklist and acyclicity; whitelisted arcs are immune
    to deletion and to reversal out of their forced direction; required
    edges (whitelisted in both directions) may be reversed but not deleted.
    """
    if g.undirected_arcs:
        raise GraphError("hill-climbing operates on completely directed graphs")
    moves: list[tuple[str, str, str]] = []
    arcs = g.directed_arcs
    for u in g.nodes:
        for v in g.nodes:
            if u == v or (u, v) in arcs or (v, u) in arcs:
                continue
            if cons is not None and not cons.arc_allowed(u, v):
                continue
            if _has_directed_path(g, v, u):
                continue
            moves.append(("add", u, v))
    for u, v in arcs:
        protected = cons is not None and (
            (u, v) in cons.forced_arcs
            or ((u, v) if u < v else (v, u)) in cons.required_edges)
        if not protected:
            moves.append(("delete", u, v))
        reversible = cons is None or (
            (u, v) not in cons.forced_arcs and cons.arc_allowed(v, u))
        if reversible and not _has_directed_path(g, u, v, skip_edge=(u, v)):
            moves.append(("reverse", u, v))
    moves.sort(key=lambda m: (_MOVE_ORDER[m[0]], m[1], m[2]))
    return moves


def apply_move(g: Graph, move: tuple[str, str, str]) -> Graph:
    kind, u, v = move
    directed = set(g.directed_arcs)
    if kind == "add":
        directed.add((u, v))
    elif kind == "delete":
        directed.discard((u, v))
    elif kind == "reverse":
        directed.discard((u, v))
        directed.add((v, u))
    else:
        raise ScoreError(f"unknown move kind {kind!r}")
    return Graph(g.nodes, directed, (), g.provenance)


def perturb_graph(g: Graph, k: int, cons: Constraints | None,
                  seed) -> tuple[Graph, int]:
    """Apply k uniformly random legal moves; returns the graph and how many applied.

    Fewer than k moves means the move set ran dry (flagged via the count).
    """
    if k < 1:
        raise ScoreError("perturb count must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    applied = 0
    for _ in range(k):
        moves = enumerate_moves(g, cons)
        if not moves:
            break
        g = apply_move(g, moves[rng.integers(len(moves))])
        applied += 1
    return g, applied


def _climb(g: Graph, d: Dataset, spec: ScoreSpec, cons: Constraints,
           cache: ScoreCache | None, trace: LearnTrace,
           max_iterations: int) -> tuple[Graph, float]:
    score = network_score(g, d, spec, cache)
    for _ in range(max_iterations):
        best_move = None
        best_delta = _IMPROVEMENT_EPS
        for move in enumerate_moves(g, cons):
            delta = score_delta(g, move, d, spec, cache)
            trace.add("test", move[1], move[2], note=move[0])
            # score-equivalent moves differ only by rounding noise; requiring
            # a clear margin keeps the canonical (first-enumerated) move
            if delta > best_delta + _TIE_EPS * max(1.0, abs(best_delta)):
                best_move = move
                best_delta = delta
        if best_move is None:
            break
        g = apply_move(g, best_move)
        score += best_delta
        trace.add("move", best_move[1], best_move[2], p_value=best_delta,
                  note=best_move[0])
        trace.say(f"* applying {best_move[0]} {best_move[1]} -> {best_move[2]} "
                  f"( delta: {best_delta:g} )")
    # squeeze out accumulated rounding so the reported score is exact
    return g, network_score(g, d, spec, cache)


def _starting_graph(d: Dataset, cfg: HillClimbConfig, cons: Constraints) -> Graph:
    g = cfg.start if cfg.start is not None else empty_graph(d.names)
    if set(g.nodes) != set(d.names):
        raise GraphError("start graph nodes and dataset columns do not match")
    if g.undirected_arcs:
        raise GraphError("the start graph must be completely directed")
    for u, v in g.directed_arcs:
        if not cons.arc_allowed(u, v):
            raise PriorError(f"start graph violates the blacklist on {u} -> {v}")
    directed = set(g.directed_arcs)
    directed |= cons.forced_arcs
    for a, b in sorted(cons.required_edges):
        if (a, b) not in directed and (b, a) not in directed:
            directed.add((a, b))
    try:
        return Graph(d.names, directed)
    except GraphError as exc:
        raise PriorError(f"priors conflict with the start graph: {exc}") from None


def hill_climb(d: Dataset, cfg: HillClimbConfig) -> tuple[Graph, LearnTrace]:
    """Greedy search for a high-scoring DAG; deterministic given the seed."""
    spec = cfg.score
    cons = normalize_priors(cfg.priors, d.names)
    trace = LearnTrace(cfg.debug)
    cache = ScoreCache() if cfg.optimized else None
    rng = np.random.default_rng(cfg.seed)

    current = _starting_graph(d, cfg, cons)
    best, best_score = _climb(current, d, spec, cons, cache, trace,
                              cfg.max_iterations)
    for _ in range(cfg.restarts):
        perturbed, applied = perturb_graph(best, cfg.perturb, cons, rng)
        if applied == 0:
            trace.add("restart", note="no legal perturbation")
            continue
        trace.add("restart", note=f"perturbed by {applied} moves")
        candidate, cand_score = _climb(perturbed, d, spec, cons, cache, trace,
                                       cfg.max_iterations)
        if cand_score > best_score:
            best, best_score = candidate, cand_score

    provenance = Provenance(
        method="score", algorithm="Hill-Climbing", score=spec.kind,
        penalty=spec.effective_penalty(d.n) if spec.kind in ("aic", "bic") else None,
        iss=spec.iss if spec.kind in ("bde", "bge") else None,
        ntests=trace.test_counter, optimized=cfg.optimized)
    return best.with_provenance(provenance), trace
