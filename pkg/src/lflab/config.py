"""Experiment config files: flat ``key = value`` pairs grouped in ``[sections]``.

Example::

    [potential]
    id = quadratic
    lam = 1.0

    [schedule]
    kind = constant
    h = 0.05

    [run]
    N = 100
    n_chains = 10000
    seed = 7
    snapshot_steps = 0, 50, 100

Lists are comma separated.  ``#`` starts a comment.  Every key is checked
against a fixed schema, and errors carry the offending line number.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from .core import Constant, ConfigError, InitSpec, PowerDecay, RunConfig
from .potentials import builtin_potential

SEED_ENV = "LFL_SEED"

# section -> key -> kind; kinds: str, int, float, floats (list), ints (list)
SCHEMA = {
    "potential": {
        "id": "str",
        "lam": "float",
        "s": "float",
        "weights": "floats",
        "means": "floats",
        "centers": "floats",
        "curvatures": "floats",
    },
    "sampler": {"variant": "str", "p": "float", "eta": "float", "batch": "int"},
    "schedule": {"kind": "str", "h": "float", "h0": "float", "alpha": "float"},
    "run": {"N": "int", "d": "int", "n_chains": "int", "seed": "int", "snapshot_steps": "ints"},
    "init": {"kind": "str", "mean": "floats", "var": "float"},
    "oracle": {"bias": "floats", "noise_var": "float"},
    "output": {"directory": "str"},
}
REQUIRED = {"potential": ("id",), "schedule": ("kind",), "run": ("N",)}
SECTION_ORDER = tuple(SCHEMA)


class ConfigParseError(ConfigError):
    def __init__(self, message, line=None, key=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.key = key


def _convert(kind, raw, line, key):
    try:
        if kind == "str":
            if not raw:
                raise ValueError("empty value")
            return raw
        if kind == "int":
            return _to_int(raw)
        if kind == "float":
            return _to_float(raw)
        items = [t.strip() for t in raw.split(",")]
        if not raw or any(t == "" for t in items):
            raise ValueError("empty list element")
        conv = _to_int if kind == "ints" else _to_float
        return tuple(conv(t) for t in items)
    except ValueError as exc:
        raise ConfigParseError(f"bad value for {key!r}: {raw!r} ({exc})", line, key) from None


def _to_float(tok):
    v = float(tok)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _to_int(tok):
    # accept 1e5 style integers, reject 2.5
    try:
        return int(tok)
    except ValueError:
        v = float(tok)
        if not v.is_integer():
            raise ValueError("not an integer") from None
        return int(v)


def parse_text(text: str) -> dict:
    """Parse config text into {section: {key: value}} with schema checks."""
    return parse_with_lines(text)[0]


def parse_with_lines(text: str):
    """Like :func:`parse_text`, also returning {(section, key): line number}."""
    data: dict[str, dict] = {}
    lines: dict[tuple[str, str], int] = {}
    section = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigParseError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigParseError(f"unknown section [{section}]", lineno)
            if section in data:
                raise ConfigParseError(f"duplicate section [{section}]", lineno)
            data[section] = {}
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ConfigParseError("key outside of any section", lineno)
        key, value = (t.strip() for t in line.split("=", 1))
        kinds = SCHEMA[section]
        if key not in kinds:
            raise ConfigParseError(f"unknown key {key!r} in [{section}]", lineno, key)
        if key in data[section]:
            raise ConfigParseError(f"duplicate key {key!r} in [{section}]", lineno, key)
        data[section][key] = _convert(kinds[key], value, lineno, key)
        lines[(section, key)] = lineno
    for sec, keys in REQUIRED.items():
        for key in keys:
            if key not in data.get(sec, {}):
                raise ConfigParseError(f"missing required key {key!r} in [{sec}]", key=key)
    return data, lines


def _fmt_value(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(data: dict) -> str:
    """Inverse of :func:`parse_text` (canonical section and key order)."""
    blocks = []
    for sec in SECTION_ORDER:
        if sec not in data:
            continue
        lines = [f"[{sec}]"]
        for key in SCHEMA[sec]:
            if key in data[sec]:
                lines.append(f"{key} = {_fmt_value(data[sec][key])}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


@dataclass(frozen=True)
class Experiment:
    run: RunConfig
    snapshot_steps: tuple[int, ...]
    output_dir: str | None
    potential_id: str
    potential_params: dict = field(default_factory=dict)


def _scalar_or_tuple(v):
    if isinstance(v, tuple) and len(v) == 1:
        return v[0]
    return v


def build_experiment(data: dict, env=None) -> Experiment:
    """Turn parsed sections into a validated :class:`Experiment`.

    ``LFL_SEED`` in ``env`` (default ``os.environ``) overrides ``[run] seed``.
    """
    env = os.environ if env is None else env
    run = data.get("run", {})
    d = run.get("d", 1)
    pot_sec = dict(data["potential"])
    pid = pot_sec.pop("id")
    params = {k: (_scalar_or_tuple(v) if k in ("lam", "s") else v) for k, v in pot_sec.items()}
    try:
        potential = builtin_potential(pid, d=d, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(f"[potential] {exc}", key="id") from None
    potential = _with_dim(potential, d)

    sched = data["schedule"]
    kind = sched["kind"]
    if kind == "constant":
        _only(sched, "schedule", ("kind", "h"))
        schedule = Constant(_need(sched, "h", "schedule"))
    elif kind == "power_decay":
        _only(sched, "schedule", ("kind", "h0", "alpha"))
        schedule = PowerDecay(_need(sched, "h0", "schedule"), _need(sched, "alpha", "schedule"))
    else:
        raise ConfigParseError(f"unknown schedule kind {kind!r}; expected constant or power_decay", key="kind")

    init_sec = data.get("init", {})
    init = InitSpec(
        kind=init_sec.get("kind", "point"),
        mean=_scalar_or_tuple(init_sec.get("mean", (0.0,))),
        var=init_sec.get("var", 0.0),
    )
    sampler = data.get("sampler", {})
    oracle = data.get("oracle", {})
    seed = run.get("seed", 0)
    if env.get(SEED_ENV):
        try:
            seed = _to_int(env[SEED_ENV])
        except ValueError:
            raise ConfigParseError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    variant = sampler.get("variant", "lmc")
    if oracle and variant != "sg_lmc":
        raise ConfigParseError("[oracle] only applies to variant sg_lmc")
    cfg = RunConfig(
        potential=potential,
        variant=variant,
        schedule=schedule,
        N=run["N"],
        d=d,
        n_chains=run.get("n_chains", 1),
        seed=seed,
        init=init,
        p=sampler.get("p", 1.0),
        eta=sampler.get("eta", 0.0),
        batch=sampler.get("batch", 1),
        bias=_scalar_or_tuple(oracle.get("bias", (0.0,))),
        noise_var=oracle.get("noise_var", 0.0),
    )
    steps = run.get("snapshot_steps", (run["N"],))
    if any(s < 0 or s > cfg.N for s in steps):
        raise ConfigParseError(f"snapshot_steps must lie in [0, {cfg.N}], got {list(steps)}", key="snapshot_steps")
    return Experiment(
        run=cfg,
        snapshot_steps=tuple(sorted(set(steps))),
        output_dir=data.get("output", {}).get("directory"),
        potential_id=pid,
        potential_params=params,
    )


def _with_dim(pot, d):
    from dataclasses import replace

    return pot if pot.dim == d else replace(pot, dim=d)


def _need(sec, key, name):
    if key not in sec:
        raise ConfigParseError(f"missing required key {key!r} in [{name}]", key=key)
    return sec[key]


def _only(sec, name, allowed):
    for key in sec:
        if key not in allowed:
            raise ConfigParseError(f"key {key!r} does not apply to this [{name}] kind", key=key)


def load_experiment(path, env=None) -> Experiment:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    data, lines = parse_with_lines(text)
    try:
        return build_experiment(data, env)
    except ConfigParseError as exc:
        if exc.line is None and exc.key is not None:
            line = next((n for (_, k), n in lines.items() if k == exc.key), None)
            if line is not None:
                raise ConfigParseError(str(exc), line, exc.key) from None
        raise
    except ConfigError as exc:
        # admissibility failures are about the step size
        if "step size" in str(exc) or "h0" in str(exc):
            line = lines.get(("schedule", "h")) or lines.get(("schedule", "h0"))
            raise ConfigParseError(str(exc), line, "h") from None
        raise
