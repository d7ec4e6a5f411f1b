"""Run configuration: JSON parsing and validation.

Every level of the document rejects unknown keys, and messages name the
offending field by its dotted path (``environment.name``, ``constants.delta``).
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .core import Role
from .drives import DriveKind
from .environments import ENVIRONMENTS, LesionMode, LesionSpec
from .errors import ConfigError

SEED_ENV = "SCHEMA_ENGINE_SEED"


@dataclass(frozen=True)
class Constants:
    squash: str = "clamp"
    delta: float = 0.1
    threshold: float = 0.5
    alpha_ce: float = 0.5
    beta_rel: float = 0.02
    theta_r: float = 0.5
    tau_max: int = 8
    discount: float = 0.9
    beta_value: float = 0.5
    eps_err: float = 1e-6
    eta_p: float = 0.1
    eta_d: float = 0.1
    context_n: int = 2
    pool_capacity: int = 32
    episode_horizon: int = 200
    value_grid: float = 0.1
    q_max: float = 1.0
    family: str = "linear"
    hidden: int = 8
    epoch_ticks: int = 100
    pairs: str = "causal"


# (check, description) per constant; checks receive the parsed value
_RANGES = {
    "squash": (lambda v: v in ("clamp", "logistic"), "one of 'clamp', 'logistic'"),
    "delta": (lambda v: 0.0 <= v <= 1.0, "in [0, 1]"),
    "threshold": (lambda v: 0.0 <= v < 1.0, "in [0, 1)"),
    "alpha_ce": (lambda v: v > 0.0, "> 0"),
    "beta_rel": (lambda v: 0.0 < v <= 1.0, "in (0, 1]"),
    "theta_r": (lambda v: v > 0.0, "> 0"),
    "tau_max": (lambda v: v >= 1, "an integer >= 1"),
    "discount": (lambda v: 0.0 < v < 1.0, "in (0, 1)"),
    "beta_value": (lambda v: True, "a number"),
    "eps_err": (lambda v: v >= 0.0, ">= 0"),
    "eta_p": (lambda v: v >= 0.0, ">= 0"),
    "eta_d": (lambda v: v >= 0.0, ">= 0"),
    "context_n": (lambda v: v >= 0, "an integer >= 0"),
    "pool_capacity": (lambda v: v >= 0, "an integer >= 0"),
    "episode_horizon": (lambda v: v >= 1, "an integer >= 1"),
    "value_grid": (lambda v: v > 0.0, "> 0"),
    "q_max": (lambda v: v > 0.0, "> 0"),
    "family": (lambda v: v in ("linear", "tanh"), "one of 'linear', 'tanh'"),
    "hidden": (lambda v: v >= 1, "an integer >= 1"),
    "epoch_ticks": (lambda v: v >= 1, "an integer >= 1"),
    "pairs": (lambda v: v in ("causal", "all"), "one of 'causal', 'all'"),
}


@dataclass(frozen=True)
class SchemaSpec:
    id: str
    role: Role
    dim: int
    effector: Optional[str] = None
    receptor: Optional[str] = None
    threshold: Optional[float] = None
    behavior: str = "relay"
    input_dim: Optional[int] = None


@dataclass(frozen=True)
class GoalSpec:
    id: str
    source: str
    objective: str
    buffer: int = 2
    learning_rate: float = 0.2
    init: Any = "zeros"


@dataclass(frozen=True)
class DriveSpec:
    name: str
    level: float
    max: float = 1.0
    alpha: float = 0.0
    kind: DriveKind = DriveKind.APPETITIVE
    reduction: Optional[Tuple[str, float]] = None
    incentive: Optional[Tuple[str, float]] = None


@dataclass(frozen=True)
class ExplorationSpec:
    schemas: Tuple[str, ...] = ()
    probability: float = 0.3
    amplitude: Any = 1.0


@dataclass(frozen=True)
class RunConfig:
    name: str
    environment: str
    env_params: Dict[str, Any]
    schemas: Tuple[SchemaSpec, ...]
    goals: Tuple[GoalSpec, ...] = ()
    support: Tuple[Tuple[str, str, float], ...] = ()
    connections: Tuple[Tuple[str, str, str, str], ...] = ()
    drives: Tuple[DriveSpec, ...] = ()
    exploration: ExplorationSpec = ExplorationSpec()
    constants: Constants = Constants()
    lesions: Tuple[LesionSpec, ...] = ()
    stop: Optional[Tuple[str, float]] = None
    seed: Optional[int] = None
    horizon: int = 100
    notes: Any = None
    source: Dict[str, Any] = field(default_factory=dict, compare=False)


# --- parsing helpers ------------------------------------------------------------

def _obj(d, where, allowed, required=()):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{where}.{k}: unknown key" if where else f"{k}: unknown key")
    for k in required:
        if k not in d:
            raise ConfigError(f"{where}.{k}: required" if where else f"{k}: required")
    return d


def _num(v, where, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number")
    if integer and not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer")
    return int(v) if integer else float(v)


def _str(v, where):
    if not isinstance(v, str) or not v:
        raise ConfigError(f"{where}: expected a non-empty string")
    return v


def _list(v, where):
    if not isinstance(v, list):
        raise ConfigError(f"{where}: expected a list")
    return v


def _constants(d) -> Constants:
    d = _obj(d, "constants", {f.name for f in fields(Constants)})
    out = {}
    for f in fields(Constants):
        if f.name not in d:
            continue
        where = f"constants.{f.name}"
        v = d[f.name]
        if f.type in ("str", str):
            v = _str(v, where)
        else:
            v = _num(v, where, integer=f.type in ("int", int))
        ok, desc = _RANGES[f.name]
        if not ok(v):
            raise ConfigError(f"{where}: must be {desc}, got {v!r}")
        out[f.name] = v
    return Constants(**out)


def _event_amount(d, where):
    d = _obj(d, where, {"event", "amount"}, ("event", "amount"))
    amount = _num(d["amount"], f"{where}.amount")
    if not 0.0 <= amount <= 1.0:
        raise ConfigError(f"{where}.amount: must be in [0, 1]")
    return _str(d["event"], f"{where}.event"), amount


def _endpoint(v, where):
    s = _str(v, where)
    if "." not in s:
        raise ConfigError(f"{where}: expected 'schema.port'")
    sid, port = s.rsplit(".", 1)
    return sid, port


def parse_config(doc: Dict[str, Any]) -> RunConfig:
    top = {"name", "seed", "horizon", "environment", "schemas", "goals", "support",
           "connections", "drives", "exploration", "constants", "lesions", "stop", "notes"}
    _obj(doc, "", top, ("environment", "schemas"))
    env = _obj(doc["environment"], "environment", {"name", "params"})
    if "name" not in env:
        raise ConfigError("environment.name: required")
    env_name = _str(env["name"], "environment.name")
    if env_name not in ENVIRONMENTS:
        raise ConfigError(f"environment.name: unknown environment {env_name!r}")
    params = env.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("environment.params: expected an object")

    constants = _constants(doc.get("constants", {}))

    schemas, ids = [], set()
    for i, s in enumerate(_list(doc["schemas"], "schemas")):
        w = f"schemas[{i}]"
        _obj(s, w, {"id", "role", "dim", "effector", "receptor", "threshold", "behavior",
                    "input_dim"}, ("id", "role", "dim"))
        sid = _str(s["id"], f"{w}.id")
        if sid in ids:
            raise ConfigError(f"{w}.id: duplicate schema id {sid!r}")
        ids.add(sid)
        try:
            role = Role(s["role"])
        except ValueError:
            raise ConfigError(f"{w}.role: unknown role {s['role']!r}") from None
        if role in (Role.PREDICTIVE, Role.DUAL, Role.GOAL):
            raise ConfigError(f"{w}.role: {role.value} schemas are constructed, not declared here")
        dim = _num(s["dim"], f"{w}.dim", integer=True)
        if dim < 1:
            raise ConfigError(f"{w}.dim: must be >= 1")
        thr = s.get("threshold")
        if thr is not None:
            thr = _num(thr, f"{w}.threshold")
            if not 0.0 <= thr < 1.0:
                raise ConfigError(f"{w}.threshold: must be in [0, 1)")
        if role is Role.MOTOR and "effector" not in s:
            raise ConfigError(f"{w}.effector: required for motor schemas")
        if role is Role.PERCEPTUAL and "receptor" not in s:
            raise ConfigError(f"{w}.receptor: required for perceptual schemas")
        input_dim = s.get("input_dim")
        if input_dim is not None:
            input_dim = _num(input_dim, f"{w}.input_dim", integer=True)
        schemas.append(SchemaSpec(
            sid, role, dim,
            effector=s.get("effector"), receptor=s.get("receptor"), threshold=thr,
            behavior=_str(s.get("behavior", "relay"), f"{w}.behavior"), input_dim=input_dim,
        ))

    goals = []
    for i, g in enumerate(_list(doc.get("goals", []), "goals")):
        w = f"goals[{i}]"
        _obj(g, w, {"id", "source", "objective", "buffer", "learning_rate", "init"},
             ("id", "source", "objective"))
        gid = _str(g["id"], f"{w}.id")
        if gid in ids:
            raise ConfigError(f"{w}.id: duplicate schema id {gid!r}")
        ids.add(gid)
        for k in ("source", "objective"):
            if _str(g[k], f"{w}.{k}") not in {s.id for s in schemas}:
                raise ConfigError(f"{w}.{k}: unknown schema {g[k]!r}")
        buf = _num(g.get("buffer", 2), f"{w}.buffer", integer=True)
        lr = _num(g.get("learning_rate", 0.2), f"{w}.learning_rate")
        if buf < 0 or lr < 0:
            raise ConfigError(f"{w}: buffer and learning_rate must be non-negative")
        init = g.get("init", "zeros")
        if not (init in ("zeros", "identity") or isinstance(init, dict)):
            raise ConfigError(f"{w}.init: expected 'zeros', 'identity' or {{W, b}}")
        if isinstance(init, dict):
            _obj(init, f"{w}.init", {"W", "b"}, ("W", "b"))
        goals.append(GoalSpec(gid, g["source"], g["objective"], buf, lr, init))

    support = []
    for i, q in enumerate(_list(doc.get("support", []), "support")):
        w = f"support[{i}]"
        _obj(q, w, {"to", "from", "q"}, ("to", "from", "q"))
        for k in ("to", "from"):
            if q[k] not in ids:
                raise ConfigError(f"{w}.{k}: unknown schema {q[k]!r}")
        val = _num(q["q"], f"{w}.q")
        if abs(val) > constants.q_max:
            raise ConfigError(f"{w}.q: |q| exceeds q_max={constants.q_max}")
        support.append((q["to"], q["from"], val))

    connections = []
    for i, c in enumerate(_list(doc.get("connections", []), "connections")):
        w = f"connections[{i}]"
        _obj(c, w, {"from", "to"}, ("from", "to"))
        src, sport = _endpoint(c["from"], f"{w}.from")
        dst, dport = _endpoint(c["to"], f"{w}.to")
        for sid, k in ((src, "from"), (dst, "to")):
            if sid not in ids:
                raise ConfigError(f"{w}.{k}: unknown schema {sid!r}")
        connections.append((src, sport, dst, dport))

    drives = []
    for i, d in enumerate(_list(doc.get("drives", []), "drives")):
        w = f"drives[{i}]"
        _obj(d, w, {"name", "level", "max", "alpha", "kind", "reduction", "incentive"},
             ("name", "level"))
        top = _num(d.get("max", 1.0), f"{w}.max")
        level = _num(d["level"], f"{w}.level")
        alpha = _num(d.get("alpha", 0.0), f"{w}.alpha")
        if top < 0:
            raise ConfigError(f"{w}.max: must be >= 0")
        if not 0.0 <= level <= top:
            raise ConfigError(f"{w}.level: must be in [0, max]")
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"{w}.alpha: must be in [0, 1]")
        try:
            kind = DriveKind(d.get("kind", "appetitive"))
        except ValueError:
            raise ConfigError(f"{w}.kind: unknown drive kind {d['kind']!r}") from None
        red = _event_amount(d["reduction"], f"{w}.reduction") if "reduction" in d else None
        inc = _event_amount(d["incentive"], f"{w}.incentive") if "incentive" in d else None
        drives.append(DriveSpec(_str(d["name"], f"{w}.name"), level, top, alpha, kind, red, inc))

    ex = _obj(doc.get("exploration", {}), "exploration", {"schemas", "probability", "amplitude"})
    ex_ids = tuple(_list(ex.get("schemas", []), "exploration.schemas"))
    motor = {s.id for s in schemas if s.role is Role.MOTOR}
    for sid in ex_ids:
        if sid not in motor:
            raise ConfigError(f"exploration.schemas: {sid!r} is not a motor schema")
    prob = _num(ex.get("probability", 0.3), "exploration.probability")
    if not 0.0 <= prob <= 1.0:
        raise ConfigError("exploration.probability: must be in [0, 1]")
    amp = ex.get("amplitude", 1.0)
    if isinstance(amp, list):
        if len(amp) != 2 or not all(isinstance(a, (int, float)) for a in amp) or amp[0] > amp[1]:
            raise ConfigError("exploration.amplitude: expected a number or [low, high]")
        amp = (float(amp[0]), float(amp[1]))
    else:
        amp = _num(amp, "exploration.amplitude")
    exploration = ExplorationSpec(ex_ids, prob, amp)

    lesions = []
    for i, l in enumerate(_list(doc.get("lesions", []), "lesions")):
        w = f"lesions[{i}]"
        _obj(l, w, {"target", "onset", "mode", "edge"}, ("target", "onset"))
        if l["target"] not in ids:
            raise ConfigError(f"{w}.target: unknown schema {l['target']!r}")
        try:
            mode = LesionMode(l.get("mode", "silence"))
        except ValueError:
            raise ConfigError(f"{w}.mode: unknown lesion mode {l['mode']!r}") from None
        edge = None
        if "edge" in l:
            e = _obj(l["edge"], f"{w}.edge", {"from", "to_port"}, ("from", "to_port"))
            src, sport = _endpoint(e["from"], f"{w}.edge.from")
            edge = (src, sport, _str(e["to_port"], f"{w}.edge.to_port"))
        onset = _num(l["onset"], f"{w}.onset", integer=True)
        if onset < 0:
            raise ConfigError(f"{w}.onset: must be >= 0")
        lesions.append(LesionSpec(l["target"], onset, mode, edge))

    stop = None
    if "stop" in doc and doc["stop"] is not None:
        st = _obj(doc["stop"], "stop", {"drive", "below"}, ("drive", "below"))
        if st["drive"] not in {d.name for d in drives}:
            raise ConfigError(f"stop.drive: unknown drive {st['drive']!r}")
        stop = (st["drive"], _num(st["below"], "stop.below"))

    seed = doc.get("seed")
    if seed is not None:
        seed = _num(seed, "seed", integer=True)
    horizon = _num(doc.get("horizon", 100), "horizon", integer=True)
    if horizon < 0:
        raise ConfigError("horizon: must be >= 0")

    return RunConfig(
        name=str(doc.get("name", env_name)), environment=env_name, env_params=dict(params),
        schemas=tuple(schemas), goals=tuple(goals), support=tuple(support),
        connections=tuple(connections), drives=tuple(drives), exploration=exploration,
        constants=constants, lesions=tuple(lesions), stop=stop, seed=seed, horizon=horizon,
        notes=doc.get("notes"), source=json.loads(json.dumps(doc)),
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc)


def resolve_seed(flag: Optional[int], config: RunConfig) -> int:
    """Command-line flag, then the config's ``seed``, then ``$SCHEMA_ENGINE_SEED``, then 0."""
    if flag is not None:
        return int(flag)
    if config.seed is not None:
        return config.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: expected an integer, got {env!r}") from None
    return 0


def constants_dict(k: Constants) -> Dict[str, Any]:
    return asdict(k)


SCENARIO_DIR = Path(__file__).with_name("scenarios")


def scenario_path(name: str) -> Path:
    """Path of a shipped scenario config (``grip_world``, ``linear_plant``, ...)."""
    p = SCENARIO_DIR / f"{name.replace('-', '_')}.json"
    if not p.exists():
        raise ConfigError(f"unknown scenario {name!r}")
    return p


def list_scenarios() -> List[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))
