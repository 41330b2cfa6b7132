"""Flat key=value experiment configuration with sectioned keys."""

from pathlib import Path

from ..core import ConfigError

TASK_NAMES = ("blockmaze", "pacgrid", "jssp6x6", "jssp30x20")
AGENT_TAGS = ("IMPALA-V_TRACE", "IMPALA-PPO", "MGDT-DQN", "MGDT-PPO", "MGDT-MAENT")
BUDGET_TAGS = ("zero_shot", "one_pct", "two_pct")

# key -> (coercion, default); None default means the key is required
_SCHEMA = {
    "env.name": (str, None),
    "env.seed": (int, 0),
    "agent.tags": (str, ",".join(AGENT_TAGS)),
    "agent.actors": (int, 4),
    "agent.segment_length": (int, 20),
    "agent.batch_segments": (int, 32),
    "agent.updates_between_rollouts": (int, 300),
    "agent.context": (int, 4),
    "agent.temperature": (float, 1.0),
    "budget.tags": (str, ",".join(BUDGET_TAGS)),
    "budget.specialist": (float, -1.0),  # -1 falls back to the task default
    "pretrain.steps": (int, 0),
    "eval.scale": (float, 1.0),
    "eval.runs": (int, 5),
    "eval.seed_base": (int, 0),
}


def _coerce(key: str, raw: str):
    kind, _ = _SCHEMA[key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from exc


def _split_list(value: str) -> tuple[str, ...]:
    items = tuple(part.strip() for part in value.split(",") if part.strip())
    if not items:
        raise ConfigError(f"empty list value {value!r}")
    return items


def validate_config(cfg: dict) -> dict:
    for key in cfg:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
    out = {}
    for key, (_, default) in _SCHEMA.items():
        if key in cfg:
            out[key] = cfg[key]
        elif default is None:
            raise ConfigError(f"missing required config key {key!r}")
        else:
            out[key] = default
    if out["env.name"] not in TASK_NAMES:
        raise ConfigError(f"env.name {out['env.name']!r} not one of {TASK_NAMES}")
    for tag in _split_list(out["agent.tags"]):
        if tag not in AGENT_TAGS:
            raise ConfigError(f"agent tag {tag!r} not one of {AGENT_TAGS}")
    for tag in _split_list(out["budget.tags"]):
        if tag not in BUDGET_TAGS:
            raise ConfigError(f"budget tag {tag!r} not one of {BUDGET_TAGS}")
    for key in ("agent.actors", "agent.segment_length", "agent.batch_segments",
                "agent.updates_between_rollouts", "agent.context", "eval.runs"):
        if out[key] < 1:
            raise ConfigError(f"{key} must be >= 1, got {out[key]}")
    if out["eval.scale"] <= 0:
        raise ConfigError(f"eval.scale must be > 0, got {out['eval.scale']}")
    if out["pretrain.steps"] < 0:
        raise ConfigError(f"pretrain.steps must be >= 0, got {out['pretrain.steps']}")
    return out


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment; unknown keys fail."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = body.split("=", 1)
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = _coerce(key, value.strip())
    return validate_config(raw)


def load_config(path) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def agent_list(cfg: dict) -> tuple[str, ...]:
    return _split_list(cfg["agent.tags"])


def budget_list(cfg: dict) -> tuple[str, ...]:
    return _split_list(cfg["budget.tags"])
