"""Compile boolean Bayesian networks into stochastic lambda terms.

A node with parents ``p1 .. pk`` becomes a k-ary function of its parents'
values whose body picks the CPT row by applying the parent booleans
(``T = (lam (lam 2))`` selects its first argument).  A query term is assembled
in topological order.  A node used in two or more places is bound once with
``((lam body) value)`` so every use sees the same sample.  A node used once is
inlined.

Evidence goes through one three-way gadget: the term yields the query value
when every evidence variable takes its observed value and ``N`` otherwise.
Marginalizing ``N`` away conditions on the evidence.
"""

from __future__ import annotations

import graphlib
import itertools
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from slc.distribution import Distribution
from slc.evaluator import EvalCache, EvalConfig, EvalResult, peval
from slc.terms import Term, mk_apps, mk_dist, mk_lam, mk_var

__all__ = [
    "TRUE", "FALSE", "NOT_OBSERVED", "NodeDef", "Network", "QuerySpec",
    "NetworkError", "CycleDetected", "UnknownParent", "BadCptShape", "BadProbability",
    "DuplicateName", "UnknownNode", "TooLarge", "AllMassConditioned",
    "parse_network", "load_network", "network_to_doc", "compile_node", "compile_query",
    "marginalize_n", "brute_force_query", "query_network", "random_network",
    "chain_network", "parse_evidence",
]

TRUE = mk_lam(mk_lam(mk_var(2)))
FALSE = mk_lam(mk_lam(mk_var(1)))
NOT_OBSERVED = mk_lam(mk_lam(mk_lam(mk_var(1))))

BRUTE_FORCE_LIMIT = 20


class NetworkError(ValueError):
    pass


class CycleDetected(NetworkError):
    pass


class UnknownParent(NetworkError):
    pass


class BadCptShape(NetworkError):
    pass


class BadProbability(NetworkError):
    pass


class DuplicateName(NetworkError):
    pass


class UnknownNode(NetworkError):
    pass


class TooLarge(NetworkError):
    pass


class AllMassConditioned(NetworkError):
    pass


@dataclass(frozen=True)
class NodeDef:
    name: str
    parents: tuple[str, ...]
    cpt: Mapping[str, float]  # parent assignment such as "TF" -> P(node = T)


@dataclass(frozen=True)
class QuerySpec:
    query: str
    evidence: Mapping[str, bool] = field(default_factory=dict)


@dataclass(frozen=True)
class Network:
    nodes: tuple[NodeDef, ...]
    query: str | None = None
    evidence: Mapping[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        _validate(self)

    @property
    def names(self) -> list[str]:
        return [n.name for n in self.nodes]

    def node(self, name: str) -> NodeDef:
        for n in self.nodes:
            if n.name == name:
                return n
        raise UnknownNode(f"no node named {name!r}")

    def spec(self, query: str | None = None, evidence: Mapping[str, bool] | None = None) -> QuerySpec:
        """The document's query, with optional overrides."""
        q = query or self.query
        if q is None:
            raise UnknownNode("no query node given")
        ev = dict(self.evidence)
        ev.update(evidence or {})
        return QuerySpec(q, ev)


def _rows(k: int) -> list[str]:
    return ["".join(r) for r in itertools.product("TF", repeat=k)]


def _validate(net: Network) -> None:
    seen: set[str] = set()
    for n in net.nodes:
        if n.name in seen:
            raise DuplicateName(f"node {n.name!r} is defined twice")
        seen.add(n.name)
    graph = {}
    for n in net.nodes:
        for p in n.parents:
            if p not in seen:
                raise UnknownParent(f"node {n.name!r} names unknown parent {p!r}")
        graph[n.name] = set(n.parents)
    try:
        tuple(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as exc:
        raise CycleDetected(f"cycle through {' -> '.join(exc.args[1])}") from None
    earlier: set[str] = set()
    for n in net.nodes:
        for p in n.parents:
            if p not in earlier:
                raise UnknownParent(f"parent {p!r} of {n.name!r} must be defined before it")
        if len(set(n.parents)) != len(n.parents):
            raise BadCptShape(f"node {n.name!r} lists a parent twice")
        if set(n.cpt) != set(_rows(len(n.parents))):
            raise BadCptShape(
                f"node {n.name!r} needs CPT rows {_rows(len(n.parents))}, got {sorted(n.cpt)}")
        for row, p in n.cpt.items():
            if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
                raise BadProbability(f"node {n.name!r} row {row!r}: {p!r} is not in [0, 1]")
        earlier.add(n.name)
    for name in ([net.query] if net.query is not None else []) + list(net.evidence):
        if name not in seen:
            raise UnknownNode(f"no node named {name!r}")
    for name, value in net.evidence.items():
        if not isinstance(value, bool):
            raise NetworkError(f"evidence for {name!r} must be true or false, got {value!r}")


def parse_network(doc: str | Mapping[str, Any]) -> Network:
    """Build a network from a JSON document (text or already decoded)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise NetworkError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, Mapping) or not isinstance(doc.get("nodes"), list):
        raise NetworkError("document needs a 'nodes' array")
    nodes = []
    for raw in doc["nodes"]:
        try:
            name, parents, cpt = raw["name"], raw.get("parents", []), raw["cpt"]
        except (KeyError, TypeError):
            raise NetworkError(f"node entry needs 'name' and 'cpt': {raw!r}") from None
        if not isinstance(name, str) or not isinstance(parents, list) \
                or not all(isinstance(p, str) for p in parents):
            raise NetworkError(f"malformed node entry {raw!r}")
        if not isinstance(cpt, Mapping):
            raise BadCptShape(f"cpt of {name!r} must be an object")
        nodes.append(NodeDef(name, tuple(parents), dict(cpt)))
    return Network(tuple(nodes), doc.get("query"), dict(doc.get("evidence") or {}))


def load_network(path: str | Path) -> Network:
    return parse_network(Path(path).read_text(encoding="utf-8"))


def network_to_doc(net: Network) -> dict:
    doc: dict[str, Any] = {"nodes": [
        {"name": n.name, "parents": list(n.parents), "cpt": dict(n.cpt)} for n in net.nodes]}
    if net.query is not None:
        doc["query"] = net.query
    if net.evidence:
        doc["evidence"] = dict(net.evidence)
    return doc


def parse_evidence(items: list[str]) -> dict[str, bool]:
    """``["C=T", "B=false"]`` -> ``{"C": True, "B": False}``."""
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        truth = {"t": True, "true": True, "1": True, "f": False, "false": False, "0": False}
        if not sep or value.strip().lower() not in truth:
            raise NetworkError(f"evidence must look like NAME=T or NAME=F, got {item!r}")
        out[name.strip()] = truth[value.strip().lower()]
    return out


def _leaf(p: float) -> Term:
    if p >= 1.0:
        return TRUE
    if p <= 0.0:
        return FALSE
    return mk_dist([(TRUE, p), (FALSE, 1.0 - p)])


def compile_node(node: NodeDef) -> Term:
    """A closed function of the parents' values returning this node's value."""
    k = len(node.parents)

    def select(prefix: str) -> Term:
        j = len(prefix)
        if j == k:
            return _leaf(node.cpt[prefix])
        hi, lo = select(prefix + "T"), select(prefix + "F")
        if hi is lo:
            return hi
        parent = mk_var(k - j)
        if hi is TRUE and lo is FALSE:
            return parent
        return mk_apps(parent, hi, lo)

    body = select("")
    for _ in range(k):
        body = mk_lam(body)
    return body


def _check_spec(net: Network, spec: QuerySpec) -> None:
    for name in [spec.query, *spec.evidence]:
        net.node(name)


def compile_query(net: Network, spec: QuerySpec) -> Term:
    """Closed term whose outcome is the query marginal (over T/F, plus N when
    there is evidence)."""
    _check_spec(net, spec)
    wanted = {spec.query, *spec.evidence}
    relevant: set[str] = set()
    stack = list(wanted)
    while stack:
        name = stack.pop()
        if name not in relevant:
            relevant.add(name)
            stack.extend(net.node(name).parents)
    order = [n for n in net.nodes if n.name in relevant]
    uses = {n.name: int(n.name == spec.query) + int(n.name in spec.evidence) for n in order}
    for n in order:
        for p in n.parents:
            uses[p] += 1

    compiled = {n.name: compile_node(n) for n in order}
    bound_at: dict[str, int] = {}

    def expr(name: str, depth: int) -> Term:
        if name in bound_at:
            return mk_var(depth - bound_at[name] + 1)
        node = net.node(name)
        return mk_apps(compiled[name], *(expr(p, depth) for p in node.parents))

    values = []
    for n in order:
        if uses[n.name] >= 2:
            values.append(expr(n.name, len(values)))
            bound_at[n.name] = len(values)
    depth = len(values)
    body = expr(spec.query, depth)
    for name in reversed([n.name for n in order if n.name in spec.evidence]):
        observed = expr(name, depth)
        if spec.evidence[name]:
            body = mk_apps(observed, body, NOT_OBSERVED)
        else:
            body = mk_apps(observed, NOT_OBSERVED, body)
    for value in reversed(values):
        body = mk_apps(mk_lam(body), value)
    return body


def marginalize_n(result: Mapping[Term, float]) -> Distribution:
    """Condition a T/F/N outcome on the evidence by dropping N and renormalizing."""
    extra = set(result) - {TRUE, FALSE, NOT_OBSERVED}
    if extra:
        raise NetworkError(f"outcome has values other than T, F and N: {extra}")
    kept = {t: p for t, p in result.items() if t is not NOT_OBSERVED}
    mass = math.fsum(kept.values())
    if mass <= 1e-12:
        raise AllMassConditioned("the evidence has probability zero")
    if NOT_OBSERVED not in result:
        return Distribution(kept)
    return Distribution((t, p / mass) for t, p in kept.items())


def brute_force_query(net: Network, spec: QuerySpec) -> Distribution:
    """Exact posterior of ``spec.query`` by summing over every joint assignment."""
    _check_spec(net, spec)
    n = len(net.nodes)
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{n} nodes is more than {BRUTE_FORCE_LIMIT} for enumeration")
    names = net.names
    position = {name: i for i, name in enumerate(names)}
    parents = [[position[p] for p in node.parents] for node in net.nodes]
    mass = {True: [], False: []}
    for assignment in itertools.product((True, False), repeat=n):
        if any(assignment[position[e]] != v for e, v in spec.evidence.items()):
            continue
        weight = 1.0
        for i, node in enumerate(net.nodes):
            row = "".join("T" if assignment[j] else "F" for j in parents[i])
            p = node.cpt[row]
            weight *= p if assignment[i] else 1.0 - p
            if weight == 0.0:
                break
        mass[assignment[position[spec.query]]].append(weight)
    p_true, p_false = math.fsum(mass[True]), math.fsum(mass[False])
    total = p_true + p_false
    if total <= 1e-12:
        raise AllMassConditioned("the evidence has probability zero")
    return Distribution((t, p / total) for t, p in ((TRUE, p_true), (FALSE, p_false)) if p > 0)


def query_network(net: Network, spec: QuerySpec, cfg: EvalConfig = EvalConfig(),
                  cache: EvalCache | None = None) -> tuple[Distribution, EvalResult]:
    """Compile, evaluate, and condition.  Returns (posterior, raw evaluation)."""
    result = peval(compile_query(net, spec), cfg, cache)
    return marginalize_n(result.outcome), result


def random_network(rng: random.Random, n_nodes: int, max_parents: int = 3,
                   extreme_rows: float = 0.1) -> Network:
    """A random DAG over ``n_nodes`` booleans with random CPTs.

    About ``extreme_rows`` of the CPT rows are deterministic (0 or 1).
    """
    nodes = []
    for i in range(n_nodes):
        k = rng.randint(0, min(i, max_parents))
        parents = tuple(f"X{j}" for j in sorted(rng.sample(range(i), k)))
        cpt = {}
        for row in _rows(k):
            if rng.random() < extreme_rows:
                cpt[row] = float(rng.random() < 0.5)
            else:
                cpt[row] = round(rng.uniform(0.05, 0.95), 3)
        nodes.append(NodeDef(f"X{i}", parents, cpt))
    return Network(tuple(nodes))


def chain_network(length: int, prior: float = 0.3, p_true_given_true: float = 0.8,
                  p_true_given_false: float = 0.25) -> Network:
    """Markov chain X0 -> X1 -> ... with the same CPT at every link."""
    nodes = [NodeDef("X0", (), {"": prior})]
    for i in range(1, length):
        nodes.append(NodeDef(f"X{i}", (f"X{i - 1}",),
                             {"T": p_true_given_true, "F": p_true_given_false}))
    return Network(tuple(nodes), query=f"X{length - 1}")
