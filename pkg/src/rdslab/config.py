"""YAML batch configuration.

A batch file has an optional ``defaults`` block and a ``scenarios`` list. Each
scenario (and the defaults) may carry ``population``, ``design``,
``estimators`` and ``replication`` blocks; a scenario entry may instead be
``{library: <scenario id or group>}`` to pull in built-in scenarios. See
docs/config.md for the annotated schema.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from rdslab.harness import EstimatorSpec, ScenarioSpec, library_groups, resolve_library
from rdslab.netgen import PopulationConfig
from rdslab.sampler import SamplingDesign


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


_POP_FIELDS = {f.name for f in dataclasses.fields(PopulationConfig)}
_DESIGN_FIELDS = {f.name for f in dataclasses.fields(SamplingDesign)}
_EST_FIELDS = {"kind", "discard_waves"}
_REPL_FIELDS = {"count", "seed"}
_SCENARIO_FIELDS = {"id", "population", "design", "estimators", "replication", "description", "figures", "library"}


_SCALARS = yaml.SafeLoader("")


def _to_python(node: yaml.Node, lines: dict[int, int]):
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            out[key] = _to_python(v, lines)
            lines[id(out)] = node.start_mark.line + 1
            lines[(id(out), key)] = k.start_mark.line + 1
        if not node.value:
            lines[id(out)] = node.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        out = [_to_python(v, lines) for v in node.value]
        lines[id(out)] = node.start_mark.line + 1
        return out
    return _SCALARS.construct_object(node)


class _Doc:
    def __init__(self, text: str, source: str):
        self.source = source
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"YAML syntax error: {exc}", mark.line + 1 if mark else None, source) from None
        self.lines: dict = {}
        self.data = {} if root is None else _to_python(root, self.lines)

    def line(self, obj, key=None) -> int | None:
        if key is not None and (id(obj), key) in self.lines:
            return self.lines[(id(obj), key)]
        return self.lines.get(id(obj))

    def error(self, message: str, obj=None, key=None):
        raise ConfigError(message, self.line(obj, key) if obj is not None else None, self.source)


def _check_keys(doc: _Doc, block: dict, allowed: set[str], what: str):
    if not isinstance(block, dict):
        doc.error(f"{what} must be a mapping")
    for k in block:
        if k not in allowed:
            doc.error(f"unknown key {k!r} in {what}; allowed: {', '.join(sorted(allowed))}", block, k)


def _build(doc: _Doc, cls, block: dict, allowed: set[str], what: str):
    _check_keys(doc, block, allowed, what)
    try:
        return cls(**block)
    except (TypeError, ValueError) as exc:
        # Blame the first key mentioned in the message, else the block.
        key = next((k for k in block if k in str(exc)), None)
        doc.error(f"invalid {what}: {exc}", block, key)


def _estimators(doc: _Doc, items) -> tuple[EstimatorSpec, ...]:
    if not isinstance(items, list) or not items:
        doc.error("estimators must be a non-empty list", items)
    out = []
    for e in items:
        if isinstance(e, str):
            e = {"kind": e}
        _check_keys(doc, e, _EST_FIELDS, "estimator")
        kind = e.get("kind")
        if kind is None:
            doc.error("estimator entry needs a 'kind'", e)
        try:
            out.append(EstimatorSpec(kind, int(e.get("discard_waves", 0))))
        except ValueError as exc:
            doc.error(f"field 'kind': {exc}" if "kind" in str(exc) else str(exc), e,
                      "kind" if "kind" in str(exc) else "discard_waves")
    return tuple(out)


def _merged(doc: _Doc, defaults: dict, entry: dict, key: str) -> dict:
    out: dict = {}
    for src in (defaults.get(key) or {}, entry.get(key) or {}):
        if not isinstance(src, dict):
            doc.error(f"{key} must be a mapping", src)
        for k, v in src.items():
            out[k] = v
            doc.lines[(id(out), k)] = doc.line(src, k)
        doc.lines.setdefault(id(out), doc.line(src))
    return out


def load_batch_text(text: str, source: str = "<config>") -> list[ScenarioSpec]:
    doc = _Doc(text, source)
    data = doc.data
    if not isinstance(data, dict):
        doc.error("top level must be a mapping with 'scenarios'")
    _check_keys(doc, data, {"defaults", "scenarios"}, "batch file")
    defaults = data.get("defaults") or {}
    _check_keys(doc, defaults, _SCENARIO_FIELDS - {"id", "library", "figures"}, "defaults")
    entries = data.get("scenarios")
    if not isinstance(entries, list) or not entries:
        doc.error("'scenarios' must be a non-empty list", data, "scenarios")

    specs: list[ScenarioSpec] = []
    for entry in entries:
        _check_keys(doc, entry, _SCENARIO_FIELDS, "scenario")
        repl = _merged(doc, defaults, entry, "replication")
        _check_keys(doc, repl, _REPL_FIELDS, "replication")
        overrides = {}
        if "count" in repl:
            overrides["n_replications"] = int(repl["count"])
        if "seed" in repl:
            overrides["master_seed"] = int(repl["seed"])
        if "library" in entry:
            name = str(entry["library"])
            if name not in library_groups() and name not in library_groups()["all"]:
                doc.error(f"unknown library scenario or group {name!r}", entry, "library")
            specs.extend(resolve_library(name, **overrides))
            continue
        if "id" not in entry:
            doc.error("scenario needs an 'id' (or a 'library' reference)", entry)
        pop = _build(doc, PopulationConfig, _merged(doc, defaults, entry, "population"), _POP_FIELDS, "population")
        design = _build(doc, SamplingDesign, _merged(doc, defaults, entry, "design"), _DESIGN_FIELDS, "design")
        kwargs = dict(scenario_id=str(entry["id"]), population=pop, design=design, **overrides)
        est = entry.get("estimators", defaults.get("estimators"))
        if est is not None:
            kwargs["estimators"] = _estimators(doc, est)
        if "description" in entry:
            kwargs["description"] = str(entry["description"])
        if "figures" in entry:
            kwargs["figures"] = tuple(str(f) for f in entry["figures"])
        try:
            specs.append(ScenarioSpec(**kwargs))
        except ValueError as exc:
            doc.error(str(exc), entry)

    seen = set()
    for s in specs:
        if s.scenario_id in seen:
            raise ConfigError(f"duplicate scenario id {s.scenario_id!r}", None, source)
        seen.add(s.scenario_id)
    return specs


def load_batch(path: str | Path) -> list[ScenarioSpec]:
    return load_batch_text(Path(path).read_text(), str(path))


def load_block(path: str | Path, key: str, cls, allowed: set[str]):
    """A single population/design block from a file, bare or under `key`."""
    doc = _Doc(Path(path).read_text(), str(path))
    data = doc.data or {}
    if isinstance(data, dict) and key in data:
        data = data[key]
    return _build(doc, cls, data, allowed, key)


def load_population(path: str | Path) -> PopulationConfig:
    return load_block(path, "population", PopulationConfig, _POP_FIELDS)


def load_design(path: str | Path) -> SamplingDesign:
    return load_block(path, "design", SamplingDesign, _DESIGN_FIELDS)


def dump_batch(specs: list[ScenarioSpec]) -> str:
    """Batch YAML that load_batch_text reads back to equal specs."""
    entries = []
    for s in specs:
        d = s.to_dict()
        entries.append({
            "id": d["scenario_id"],
            "description": d["description"],
            "figures": d["figures"],
            "population": d["population"],
            "design": d["design"],
            "estimators": d["estimators"],
            "replication": {"count": d["n_replications"], "seed": d["master_seed"]},
        })
    return yaml.safe_dump({"scenarios": entries}, sort_keys=False)
