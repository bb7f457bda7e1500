"""Fusion of map influences into the extended existence probability.

Three models are available:

``iim``
    Independent influence model: average of ``1 - P_C`` and the mean of the
    four positive influences.
``bn``
    A discrete Bayes net over binary nodes. Observed influences are root
    nodes whose priors are the influence values; two hidden nodes collect
    map clearance (``M``, the negation of building containment) and lane
    support (``L``), and the query node ``E`` combines them. With the default
    linear counting tables its posterior equals the IIM.
``bne``
    The base net plus an observed class node ``C`` as third parent of ``E``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .influence import InfluenceVector

MODELS = ("iim", "bn", "bne")
POSITIVE_NODES = ("O", "N", "P", "A")


class BayesNetError(ValueError):
    """Malformed network: cycle, unknown node, or bad table."""


@dataclass
class BayesNet:
    """Binary-variable Bayes net with soft evidence.

    ``cpts[node][row]`` is ``P(node=T | parents)``, with ``row`` the parent
    assignment read as a binary number, first parent most significant and
    ``T`` as 1. Evidence on a root node replaces its prior; evidence ``e`` on
    any other node is applied as a virtual-evidence likelihood ``(e, 1 - e)``.
    """

    parents: dict[str, tuple[str, ...]] = field(default_factory=dict)
    cpts: dict[str, np.ndarray] = field(default_factory=dict)
    evidence: dict[str, float] = field(default_factory=dict)

    def add(self, name: str, parents: Sequence[str] = (), cpt=None) -> None:
        if name in self.parents:
            raise BayesNetError(f"duplicate node {name!r}")
        self.parents[name] = tuple(parents)
        self.cpts[name] = np.atleast_1d(np.asarray(0.5 if cpt is None else cpt, dtype=float))

    def observe(self, name: str, p_true: float) -> None:
        self.evidence[name] = float(p_true)

    @property
    def nodes(self) -> list[str]:
        return list(self.parents)

    def topological_order(self) -> list[str]:
        order: list[str] = []
        state: dict[str, int] = {}

        def visit(n: str, path: tuple[str, ...]) -> None:
            if state.get(n) == 2:
                return
            if state.get(n) == 1:
                raise BayesNetError(f"cycle through {' -> '.join(path + (n,))}")
            state[n] = 1
            for p in self.parents[n]:
                if p not in self.parents:
                    raise BayesNetError(f"node {n!r} has unknown parent {p!r}")
                visit(p, path + (n,))
            state[n] = 2
            order.append(n)

        for n in self.parents:
            visit(n, ())
        return order

    def validate(self) -> list[str]:
        order = self.topological_order()
        for n in order:
            cpt = self.cpts[n]
            rows = 2 ** len(self.parents[n])
            if cpt.shape != (rows,):
                raise BayesNetError(f"node {n!r}: CPT has {cpt.size} rows, expected {rows}")
            if np.any(~np.isfinite(cpt)) or np.any(cpt < 0.0) or np.any(cpt > 1.0):
                raise BayesNetError(f"node {n!r}: CPT entries must lie in [0, 1]")
        for n, e in self.evidence.items():
            if n not in self.parents:
                raise BayesNetError(f"evidence on unknown node {n!r}")
            if not 0.0 <= e <= 1.0:
                raise BayesNetError(f"evidence on {n!r} is {e!r}, outside [0, 1]")
        return order


def bn_infer(net: BayesNet, query: str) -> float:
    """Exact posterior ``P(query=T)`` by enumerating every joint assignment."""
    order = net.validate()
    if query not in net.parents:
        raise BayesNetError(f"unknown query node {query!r}")
    n = len(order)
    if n > 20:
        raise BayesNetError(f"{n} nodes is too many for enumeration")
    col = {name: i for i, name in enumerate(order)}
    states = _assignments(n)
    weight = np.ones(len(states))
    for name in order:
        x = states[:, col[name]]
        pa = net.parents[name]
        if not pa and name in net.evidence:
            p_true = np.full(len(states), net.evidence[name])
        else:
            row = np.zeros(len(states), dtype=np.int64)
            for p in pa:
                row = (row << 1) | states[:, col[p]]
            p_true = net.cpts[name][row]
            if name in net.evidence:
                e = net.evidence[name]
                weight = weight * np.where(x == 1, e, 1.0 - e)
        weight = weight * np.where(x == 1, p_true, 1.0 - p_true)
    total = weight.sum()
    if total <= 0.0:
        raise BayesNetError("evidence has zero probability")
    return float(weight[states[:, col[query]] == 1].sum() / total)


@lru_cache(maxsize=None)
def _assignments(n: int) -> np.ndarray:
    states = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    states.setflags(write=False)
    return states


def counting_cpt(n_parents: int) -> np.ndarray:
    """``P(T | parents)`` = fraction of parents that are true."""
    rows = np.arange(2**n_parents)
    return np.array([bin(r).count("1") / n_parents for r in rows])


def build_base_net(iv: InfluenceVector, cpts: Mapping[str, Sequence[float]] | None = None) -> BayesNet:
    """Base network; ``cpts`` optionally overrides the tables of ``M``, ``L`` or ``E``."""
    net = BayesNet()
    net.add("B")
    for name in POSITIVE_NODES:
        net.add(name)
    net.add("M", ("B",), [1.0, 0.0])
    net.add("L", POSITIVE_NODES, counting_cpt(4))
    net.add("E", ("L", "M"), counting_cpt(2))
    values = dict(zip(("B", *POSITIVE_NODES), (iv.p_building, *iv.positives)))
    for name, p in values.items():
        net.observe(name, p)
    _override(net, cpts)
    return net


def class_cpt(w_c: float) -> np.ndarray:
    """Table of ``E`` given ``(L, M, C)``.

    The class node shifts ``E`` by ``+-w_c / 2`` only where ``L`` and ``M``
    disagree. The all-false and all-true rows are left untouched, so the
    table never needs clipping and neutral class evidence (0.5) reproduces
    the base network exactly.
    """
    rows = []
    for l, m, c in itertools.product((0, 1), repeat=3):
        p = (l + m) / 2.0
        if l != m:
            p += w_c * (c - 0.5)
        rows.append(p)
    return np.array(rows)


def build_bne_net(iv: InfluenceVector, w_c: float = 0.1, cpts: Mapping[str, Sequence[float]] | None = None) -> BayesNet:
    """Base network with the class node ``C``; missing class evidence counts as 0.5."""
    if not 0.0 <= w_c <= 0.5:
        raise ValueError(f"w_c must lie in [0, 0.5], got {w_c!r}")
    net = build_base_net(iv)
    net.add("C")
    net.observe("C", 0.5 if iv.class_prob is None else iv.class_prob)
    net.parents["E"] = ("L", "M", "C")
    net.cpts["E"] = class_cpt(w_c)
    _override(net, cpts)
    return net


def _override(net: BayesNet, cpts: Mapping[str, Sequence[float]] | None) -> None:
    for name, table in (cpts or {}).items():
        if name not in net.parents:
            raise BayesNetError(f"CPT override for unknown node {name!r}")
        net.cpts[name] = np.asarray(table, dtype=float)


def iim_fuse(iv: InfluenceVector) -> float:
    negative = 1.0 - iv.p_building
    positive = sum(iv.positives) / 4.0
    return (negative + positive) / 2.0


@dataclass(frozen=True)
class FusionConfig:
    model: str = "iim"
    w_c: float = 0.1
    relevant_classes: tuple[str, ...] = ("car", "truck", "bus", "motorcycle", "bicycle", "pedestrian")
    # model name -> node name -> CPT rows, e.g. {"bn": {"L": [...]}}
    cpts: Mapping[str, Mapping[str, Sequence[float]]] | None = None

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown fusion model {self.model!r}; choose from {MODELS}")
        if not 0.0 <= self.w_c <= 0.5:
            raise ValueError(f"w_c must lie in [0, 0.5], got {self.w_c!r}")


def fuse(iv: InfluenceVector, config: FusionConfig = FusionConfig()) -> float:
    if config.model == "iim":
        return iim_fuse(iv)
    overrides = (config.cpts or {}).get(config.model)
    if config.model == "bn":
        return bn_infer(build_base_net(iv, overrides), "E")
    return bn_infer(build_bne_net(iv, config.w_c, overrides), "E")
