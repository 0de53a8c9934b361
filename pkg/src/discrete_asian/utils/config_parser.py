from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from pydantic import ValidationError

from discrete_asian.exceptions.base_exceptions import ConfigError, ConfigIssue
from discrete_asian.exceptions.exception_constants import CONFIG_INVALID
from discrete_asian.schema.configs import RunConfig

_SECTION_RE = re.compile(r"^\[(?P<name>[A-Za-z_]+)\]$")
_ENTRY_RE = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_.]*)\s*=\s*(?P<value>.*)$")
_COMMENT_RE = re.compile(r"\s*[#;].*$")

_SCALAR_KEYS: dict[str, set[str]] = {
    "market": {"sigma", "r", "T", "K", "spot"},
    "engines": {
        "mc.paths",
        "mc.seed",
        "mc.scheme",
        "mc.steps",
        "mc.antithetic",
        "mc.workers",
        "pde.M",
        "pde.N",
        "pde.theta",
        "pde.rannacher_steps",
        "cascade.quad_order",
        "cascade.nodes",
    },
    "report": {"out"},
}
_LIST_KEYS: dict[str, set[str]] = {
    "engines": {"use", "pde.levels"},
    "report": {"formats"},
}
# repeatable "t, mass" entries and the field each one fills
_PAIR_KEYS = {"atom": "atoms", "dividend": "dividends"}

_SECTIONS = ("market", "sampling", "engines", "report")


@dataclass
class _ParseState:
    data: dict[str, dict[str, Any]] = field(default_factory=dict)
    lines: dict[tuple[Any, ...], int] = field(default_factory=dict)
    issues: list[ConfigIssue] = field(default_factory=list)

    def issue(self, line: int, message: str) -> None:
        self.issues.append(ConfigIssue(line=line, message=message))


def _split_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _set_nested(section: dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    for parent in parents:
        section = section.setdefault(parent, {})
    section[leaf] = value


def _read_pair(state: _ParseState, section: str, key: str, value: str, line: int) -> None:
    parts = _split_list(value)
    if len(parts) != 2:
        state.issue(line, f"{key} expects 't, mass', got {value!r}")
        return
    try:
        t, mass = float(parts[0]), float(parts[1])
    except ValueError:
        state.issue(line, f"{key} values must be numbers, got {value!r}")
        return

    field_name = _PAIR_KEYS[key]
    entries = state.data[section].setdefault(field_name, [])
    if entries and t <= entries[-1][0]:
        state.issue(line, f"{key} times must be strictly increasing ({t!r} follows {entries[-1][0]!r})")
        return
    if key == "atom" and not (t > 0 and mass > 0):
        state.issue(line, "atom needs a positive time and a positive mass")
        return
    if key == "dividend" and not (t >= 0 and mass >= 0):
        state.issue(line, "dividend needs a nonnegative time and mass")
        return
    state.lines[(section, field_name, len(entries))] = line
    entries.append((t, mass))


def _read_entry(state: _ParseState, section: str, key: str, value: str, line: int) -> None:
    if section == "sampling":
        if key not in _PAIR_KEYS:
            state.issue(line, f"unknown key {key!r} in [sampling]")
            return
        _read_pair(state, section, key, value, line)
        return

    is_list = key in _LIST_KEYS.get(section, set())
    if not is_list and key not in _SCALAR_KEYS.get(section, set()):
        state.issue(line, f"unknown key {key!r} in [{section}]")
        return

    path = (section, *key.split("."))
    if path in state.lines:
        state.issue(line, f"duplicate key {key!r} (first set on line {state.lines[path]})")
        return
    state.lines[path] = line
    _set_nested(state.data[section], key, _split_list(value) if is_list else value)


def _line_for(state: _ParseState, loc: tuple[Any, ...]) -> int:
    for size in range(len(loc), 0, -1):
        line = state.lines.get(tuple(loc[:size]))
        if line is not None:
            return line
    return 0


def _describe(error: dict[str, Any]) -> str:
    name = ".".join(str(part) for part in error["loc"] if not isinstance(part, int))
    ctx = error.get("ctx") or {}
    if error["type"] == "greater_than" and ctx.get("gt") == 0:
        return f"{name.split('.')[-1]} must be positive"
    if error["type"] == "missing":
        return f"missing required field {name!r}"
    return f"{name}: {error['msg']}"


def parse_config(text: str) -> RunConfig:
    """Parse the sectioned key/value format into a validated RunConfig.

    Every problem found is collected and raised together as a ConfigError
    whose issues carry 1-based line numbers.
    """
    state = _ParseState()
    section: str | None = None

    for number, raw in enumerate(text.splitlines(), start=1):
        line = _COMMENT_RE.sub("", raw).strip()
        if not line:
            continue

        header = _SECTION_RE.match(line)
        if header:
            section = header.group("name")
            if section not in _SECTIONS:
                state.issue(number, f"unknown section [{section}]")
                section = None
                continue
            if (section,) in state.lines:
                state.issue(number, f"duplicate section [{section}]")
            state.lines.setdefault((section,), number)
            state.data.setdefault(section, {})
            continue

        entry = _ENTRY_RE.match(line)
        if not entry:
            state.issue(number, f"expected 'key = value', got {raw.strip()!r}")
            continue
        if section is None:
            state.issue(number, "entry outside of a known section")
            continue
        _read_entry(state, section, entry.group("key"), entry.group("value").strip(), number)

    if not state.issues:
        try:
            config = RunConfig.model_validate(state.data)
        except ValidationError as exc:
            for error in exc.errors():
                state.issue(_line_for(state, tuple(error["loc"])), _describe(error))
        else:
            _check_sampling_horizon(state, config)
            if not state.issues:
                return config

    raise ConfigError(
        sorted(state.issues, key=lambda issue: issue.line),
        log_message=CONFIG_INVALID,
        internal_context={"issues": [str(issue) for issue in state.issues]},
    )


def _check_sampling_horizon(state: _ParseState, config: RunConfig) -> None:
    T = config.market.T
    for field_name in ("atoms", "dividends"):
        for index, (t, _) in enumerate(getattr(config.sampling, field_name)):
            if t > T:
                state.issue(
                    state.lines.get(("sampling", field_name, index), 0),
                    f"time {t!r} lies after maturity T = {T!r}",
                )


def _number(value: float) -> str:
    return repr(float(value))


def serialize_config(config: RunConfig) -> str:
    """Text that parses back to an equal RunConfig."""
    market = config.market
    engines = config.engines
    mc, pde, cascade = engines.mc, engines.pde, engines.cascade

    lines = [
        "[market]",
        f"sigma = {_number(market.sigma)}",
        f"r = {_number(market.r)}",
        f"T = {_number(market.T)}",
        f"K = {_number(market.K)}",
        f"spot = {_number(market.spot)}",
        "",
        "[sampling]",
        *(f"atom = {_number(t)}, {_number(a)}" for t, a in config.sampling.atoms),
        *(f"dividend = {_number(t)}, {_number(m)}" for t, m in config.sampling.dividends),
        "",
        "[engines]",
        f"use = {', '.join(kind.value for kind in engines.use)}",
        f"mc.paths = {mc.paths}",
        f"mc.seed = {mc.seed}",
        f"mc.scheme = {mc.scheme.value}",
        f"mc.steps = {mc.steps}",
        f"mc.antithetic = {str(mc.antithetic).lower()}",
        f"mc.workers = {mc.workers}",
        f"pde.M = {pde.M}",
        f"pde.N = {pde.N}",
        f"pde.theta = {_number(pde.theta)}",
        f"pde.rannacher_steps = {pde.rannacher_steps}",
        f"pde.levels = {', '.join(str(level) for level in pde.levels)}",
        f"cascade.quad_order = {cascade.quad_order}",
        f"cascade.nodes = {cascade.nodes}",
        "",
        "[report]",
        f"out = {config.report.out}",
        f"formats = {', '.join(config.report.formats)}",
    ]
    return "\n".join(lines) + "\n"
