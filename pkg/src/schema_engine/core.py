"""Schemas as port automata: ports, activation/support dynamics and assertion gating."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .errors import StructuralIntegrityError
from .patterns import SHARP, Pattern, check_dim, vector


class Role(str, Enum):
    PERCEPTUAL = "perceptual"
    MOTOR = "motor"
    PREDICTIVE = "predictive"
    DUAL = "dual"
    GOAL = "goal"
    INTERNAL = "internal"


class Direction(str, Enum):
    IN = "in"
    OUT = "out"


class PortKind(str, Enum):
    DATA = "data"
    CONTROL_IN = "control_in"
    CONTROL_OUT = "control_out"


@dataclass
class Port:
    """A typed port with a double buffer.

    ``next`` is written during evaluation and only becomes ``current`` at commit.
    External ports are fed by the environment or exploration policy instead of
    the connection map.
    """

    name: str
    dim: int
    direction: Direction = Direction.IN
    kind: PortKind = PortKind.DATA
    current: Any = SHARP
    next: Any = SHARP
    external: bool = False
    modulatory: bool = False

    def write(self, p: Pattern) -> None:
        self.next = check_dim(p, self.dim, self.name)

    def commit(self) -> None:
        self.current = self.next
        self.next = SHARP


@dataclass(eq=False)
class SchemaInstance:
    """One schema: ports, activation level, threshold and a registered behavior."""

    id: str
    role: Role
    inputs: List[Port]
    outputs: List[Port]
    behavior: str
    threshold: float = 0.5
    activation: float = 0.0
    vars: Dict[str, Any] = field(default_factory=dict)
    control_in: List[Port] = field(default_factory=list)
    control_out: Port = field(
        default_factory=lambda: Port("ctl", 1, Direction.OUT, PortKind.CONTROL_OUT)
    )
    model: Any = None
    effector: Optional[str] = None
    receptor: Optional[str] = None

    @property
    def asserted(self) -> bool:
        return self.activation > self.threshold

    @property
    def out(self) -> Port:
        return self.outputs[0]

    def input(self, name: str) -> Port:
        for p in self.inputs:
            if p.name == name:
                return p
        raise StructuralIntegrityError(f"schema {self.id!r} has no input port {name!r}")

    def output(self, name: str) -> Port:
        for p in self.outputs:
            if p.name == name:
                return p
        raise StructuralIntegrityError(f"schema {self.id!r} has no output port {name!r}")

    def commit(self) -> None:
        for p in self.outputs:
            p.commit()
        self.control_out.commit()


def make_schema(
    id: str,
    role: Role,
    in_ports: List[Tuple[str, int]],
    out_dim: int,
    behavior: str,
    threshold: float = 0.5,
    external: Tuple[str, ...] = (),
    **kw,
) -> SchemaInstance:
    """Convenience constructor: one ``out`` data port plus the given inputs."""
    inputs = [Port(n, d, Direction.IN, external=n in external) for n, d in in_ports]
    outputs = [Port("out", out_dim, Direction.OUT)]
    return SchemaInstance(id, role, inputs, outputs, behavior, threshold=threshold, **kw)


@dataclass
class SupportMatrix:
    """Support weights ``q[(x, y)]``: how much schema ``y`` supports schema ``x``."""

    q: Dict[Tuple[str, str], float] = field(default_factory=dict)
    q_max: float = 1.0

    def set(self, x: str, y: str, weight: float) -> None:
        if abs(weight) > self.q_max:
            raise StructuralIntegrityError(
                f"support weight q[{x},{y}]={weight} exceeds q_max={self.q_max}"
            )
        self.q[(x, y)] = float(weight)

    def ids(self) -> set:
        return {i for pair in self.q for i in pair}

    def remove_schema(self, sid: str) -> None:
        self.q = {k: v for k, v in self.q.items() if sid not in k}

    def rename(self, old: str, new: str) -> None:
        self.q = {
            (new if x == old else x, new if y == old else y): v for (x, y), v in self.q.items()
        }


@dataclass
class ConnectionMap:
    """Port-to-port wiring, ``(target id, input port) -> (source id, output port)``.

    Every input port has at most one source; modulatory inputs are separate ports.
    """

    edges: Dict[Tuple[str, str], Tuple[str, str]] = field(default_factory=dict)

    def connect(self, src: str, src_port: str, dst: str, dst_port: str) -> None:
        key = (dst, dst_port)
        if key in self.edges:
            raise StructuralIntegrityError(f"input port {dst}.{dst_port} already has a source")
        self.edges[key] = (src, src_port)

    def disconnect(self, src: str, src_port: str, dst: str, dst_port: str) -> None:
        if self.edges.get((dst, dst_port)) != (src, src_port):
            raise KeyError(f"no edge {src}.{src_port} -> {dst}.{dst_port}")
        del self.edges[(dst, dst_port)]

    def source_of(self, dst: str, dst_port: str) -> Optional[Tuple[str, str]]:
        return self.edges.get((dst, dst_port))

    def remove_schema(self, sid: str) -> None:
        self.edges = {k: v for k, v in self.edges.items() if k[0] != sid and v[0] != sid}

    def rename(self, old: str, new: str) -> None:
        self.edges = {
            ((new if d == old else d), dp): ((new if s == old else s), sp)
            for (d, dp), (s, sp) in self.edges.items()
        }

    def sorted_edges(self) -> List[Tuple[str, str, str, str]]:
        return sorted((s, sp, d, dp) for (d, dp), (s, sp) in self.edges.items())


# --- activation dynamics -------------------------------------------------------

def clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def logistic(x: float) -> float:
    return float(1.0 / (1.0 + np.exp(-x)))


SQUASHERS: Dict[str, Callable[[float], float]] = {"clamp": clamp01, "logistic": logistic}


def propagate_support(
    activations: Mapping[str, float], Q: SupportMatrix, squash: str = "clamp"
) -> Dict[str, float]:
    """One synchronous step of ``a'_i = sigma(sum_j q_ij * a_j)`` for every schema.

    ``activations`` should already hold 0 for deasserted schemas (their control
    output is inactive); schemas without incoming support get ``sigma(0)``.
    """
    sigma = SQUASHERS[squash]
    for x, y in Q.q:
        if x not in activations or y not in activations:
            missing = x if x not in activations else y
            raise StructuralIntegrityError(f"support matrix references unknown schema {missing!r}")
    totals = {i: 0.0 for i in activations}
    for (x, y), w in sorted(Q.q.items()):
        totals[x] += w * activations[y]
    return {i: sigma(v) for i, v in totals.items()}


def gate_assertion(schema: SchemaInstance) -> SchemaInstance:
    """Silence every output of a deasserted schema (``a <= threshold``)."""
    if schema.asserted:
        schema.control_out.next = vector([schema.activation])
    else:
        for p in schema.outputs:
            p.next = SHARP
        schema.control_out.next = SHARP
    return schema


# --- behaviors ------------------------------------------------------------------

Behavior = Callable[[SchemaInstance, List[Pattern]], List[Pattern]]
BEHAVIORS: Dict[str, Behavior] = {}


def register_behavior(name: str):
    def deco(fn: Behavior) -> Behavior:
        BEHAVIORS[name] = fn
        return fn

    return deco


@register_behavior("relay")
def _relay(schema, inputs):
    return [inputs[0]]


@register_behavior("silent")
def _silent(schema, inputs):
    return [SHARP for _ in schema.outputs]


@register_behavior("linear")
def _linear(schema, inputs):
    x = inputs[0]
    if x is SHARP:
        return [SHARP]
    return [vector(np.asarray(schema.vars["W"]) @ x)]


@register_behavior("modulated")
def _modulated(schema, inputs):
    # reconstructed cause schema: the last input is the modulatory port
    mod = inputs[-1]
    if mod is not SHARP:
        return [mod]
    return _base_output(schema, schema.vars["base_behavior"], inputs[:-1])


def _base_output(schema, name, inputs):
    if schema.vars.get("lesioned"):
        return [SHARP for _ in schema.outputs]
    return BEHAVIORS[name](schema, inputs)


def step_behavior(schema: SchemaInstance, inputs: List[Pattern]) -> List[Pattern]:
    """Evaluate a schema's behavior on bound inputs, before assertion gating."""
    if len(inputs) != len(schema.inputs):
        raise StructuralIntegrityError(
            f"schema {schema.id!r} expects {len(schema.inputs)} inputs, got {len(inputs)}"
        )
    for p, port in zip(inputs, schema.inputs):
        check_dim(p, port.dim, f"{schema.id}.{port.name}")
    try:
        fn = BEHAVIORS[schema.behavior]
    except KeyError:
        raise StructuralIntegrityError(
            f"schema {schema.id!r} names unknown behavior {schema.behavior!r}"
        ) from None
    if schema.behavior != "modulated" and schema.vars.get("lesioned"):
        outs = [SHARP for _ in schema.outputs]
    else:
        outs = fn(schema, inputs)
    for p, port in zip(outs, schema.outputs):
        check_dim(p, port.dim, f"{schema.id}.{port.name}")
    return outs


def check_structure(
    schemas: Mapping[str, SchemaInstance], C: ConnectionMap, Q: SupportMatrix
) -> None:
    """Raise if C or Q reference dead schemas/ports or connect mismatched dims."""
    for (dst, dport), (src, sport) in C.edges.items():
        for sid in (dst, src):
            if sid not in schemas:
                raise StructuralIntegrityError(f"connection references dead schema {sid!r}")
        din = schemas[dst].input(dport)
        sout = schemas[src].output(sport)
        if din.dim != sout.dim:
            raise StructuralIntegrityError(
                f"connection {src}.{sport} -> {dst}.{dport} joins dims {sout.dim} and {din.dim}"
            )
    for sid in Q.ids():
        if sid not in schemas:
            raise StructuralIntegrityError(f"support matrix references dead schema {sid!r}")
