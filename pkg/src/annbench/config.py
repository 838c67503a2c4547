"""Experiment configuration: parsing and Cartesian expansion.

The document is a mapping tree: point kind on the first level, metric on
the second, one algorithm definition per key on the third. An algorithm
names either an in-process constructor (``module`` plus ``constructor``)
or an external ``command``, and declares run groups whose ``args`` and
``query-args`` entries expand by Cartesian product. ``docker-tag`` keys
are accepted and dropped so upstream files parse unchanged.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field

import yaml

from .core import Metric, PointKind, as_metric, point_kind_for
from .errors import ConfigError

Scalar = str | int | float | bool

NAME_RE = re.compile(r"^[A-Za-z0-9._-]+$")

IN_PROCESS = "in-process"
EXTERNAL = "external"

_ALG_KEYS = {"docker-tag", "module", "constructor", "command",
             "base-args", "run-groups"}
_GROUP_KEYS = {"args", "query-args"}


@dataclass
class RunGroupDef:
    name: str
    args: list
    query_args: list


@dataclass
class AlgorithmDef:
    name: str
    runner_kind: str
    entry_point: str
    base_args: list
    run_groups: list[RunGroupDef]


@dataclass
class AlgorithmInstance:
    algorithm: str
    group: str
    constructor_args: list
    query_param_groups: list[list]
    definition: AlgorithmDef = field(repr=False, compare=False, default=None)

    @property
    def label(self) -> str:
        return format_label(self.algorithm, self.constructor_args)


def format_label(name: str, args: list) -> str:
    return f"{name} {json.dumps(args)}"


def parse_label(label: str) -> tuple[str, list]:
    cut = label.find(" [")
    if cut < 0:
        raise ConfigError(f"not an instance label: {label!r}")
    name, raw = label[:cut], label[cut + 1:]
    try:
        args = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"bad argument list in label {label!r}: {e}") from e
    if not NAME_RE.match(name) or not isinstance(args, list):
        raise ConfigError(f"not an instance label: {label!r}")
    return name, args


def _is_scalar(v) -> bool:
    return isinstance(v, (str, int, float, bool))


def _check_template(entries, path: str, allow_lists=True) -> list:
    """One nesting level: each entry a scalar or a flat list of scalars."""
    if entries is None:
        return []
    if not isinstance(entries, list):
        raise ConfigError("expected a list", path=path)
    for i, e in enumerate(entries):
        if isinstance(e, list) and allow_lists:
            for j, leaf in enumerate(e):
                if not _is_scalar(leaf):
                    raise ConfigError(
                        f"expected a scalar, got {type(leaf).__name__}",
                        path=f"{path}[{i}][{j}]")
        elif not _is_scalar(e):
            what = ("a scalar or a list of scalars" if allow_lists
                    else "a scalar (alternatives belong in args)")
            raise ConfigError(
                f"expected {what}, got {type(e).__name__}",
                path=f"{path}[{i}]")
    return entries


def _need_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(
            f"expected a mapping, got {type(node).__name__}", path=path)
    return node


def _parse_algorithm(name, node, path: str) -> AlgorithmDef:
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise ConfigError(f"bad algorithm name {name!r} "
                          "(letters, digits, '.', '_', '-' only)", path=path)
    node = _need_mapping(node, path)
    unknown = set(node) - _ALG_KEYS
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r}", path=path)

    has_ctor = "module" in node or "constructor" in node
    has_cmd = "command" in node
    if has_ctor and has_cmd:
        raise ConfigError("give module/constructor or command, not both",
                          path=path)
    if has_cmd:
        kind, entry = EXTERNAL, node["command"]
        if not isinstance(entry, str) or not entry.strip():
            raise ConfigError("command must be a non-empty string",
                              path=f"{path}.command")
    elif has_ctor:
        module, ctor = node.get("module"), node.get("constructor")
        if not isinstance(module, str) or not isinstance(ctor, str):
            raise ConfigError("module and constructor must both be strings",
                              path=path)
        kind, entry = IN_PROCESS, f"{module}:{ctor}"
    else:
        raise ConfigError("needs module/constructor or command", path=path)

    base_args = _check_template(node.get("base-args"), f"{path}.base-args",
                                allow_lists=False)

    groups_node = _need_mapping(node.get("run-groups"),
                                f"{path}.run-groups")
    if not groups_node:
        raise ConfigError("needs at least one run group",
                          path=f"{path}.run-groups")
    groups = []
    for gname, gnode in groups_node.items():
        gpath = f"{path}.run-groups.{gname}"
        gnode = _need_mapping(gnode, gpath)
        unknown = set(gnode) - _GROUP_KEYS
        if unknown:
            raise ConfigError(f"unknown key {sorted(unknown)[0]!r}",
                              path=gpath)
        groups.append(RunGroupDef(
            name=str(gname),
            args=_check_template(gnode.get("args"), f"{gpath}.args"),
            query_args=_check_template(gnode.get("query-args"),
                                       f"{gpath}.query-args"),
        ))
    return AlgorithmDef(name=name, runner_kind=kind, entry_point=entry,
                        base_args=base_args, run_groups=groups)


def parse_config(document, point_kind, metric) -> list[AlgorithmDef]:
    """Return the definitions scoped to (point_kind, metric), document order."""
    if isinstance(document, (str, bytes)):
        try:
            document = yaml.safe_load(document)
        except yaml.YAMLError as e:
            raise ConfigError(f"not parseable as YAML: {e}") from e
    document = _need_mapping(document, "<root>")
    metric = as_metric(metric)
    point_kind = PointKind(point_kind)

    wanted = None
    for pk_key, metrics_node in document.items():
        try:
            pk = PointKind(pk_key)
        except ValueError:
            raise ConfigError(f"unknown point kind {pk_key!r}", path=str(pk_key))
        metrics_node = _need_mapping(metrics_node, pk_key)
        for m_key, algs_node in metrics_node.items():
            m_path = f"{pk_key}.{m_key}"
            try:
                m = as_metric(m_key)
            except Exception:
                raise ConfigError(f"unknown metric {m_key!r}", path=m_path)
            if point_kind_for(m) is not pk:
                raise ConfigError(
                    f"metric {m.value} cannot appear under "
                    f"point kind {pk.value}", path=m_path)
            algs_node = _need_mapping(algs_node, m_path)
            if pk is point_kind and m is metric:
                wanted = [(name, node, f"{m_path}.{name}")
                          for name, node in algs_node.items()]
            else:
                for name, node in algs_node.items():
                    _parse_algorithm(name, node, f"{m_path}.{name}")
    if wanted is None:
        return []
    return [_parse_algorithm(name, node, path) for name, node, path in wanted]


@dataclass
class ExpandContext:
    metric: Metric
    dimension: int


_KEYWORDS = ("@metric", "@dimension")


def _substitute(value, ctx: ExpandContext, path: str):
    if isinstance(value, str) and value.startswith("@"):
        if value == "@metric":
            return ctx.metric.value
        if value == "@dimension":
            return ctx.dimension
        raise ConfigError(
            f"unknown keyword {value!r} (supported: {', '.join(_KEYWORDS)})",
            path=path)
    return value


def _axes(entries, ctx, path):
    out = []
    for i, e in enumerate(entries):
        if isinstance(e, list):
            out.append([_substitute(v, ctx, f"{path}[{i}][{j}]")
                        for j, v in enumerate(e)])
        else:
            out.append([_substitute(e, ctx, f"{path}[{i}]")])
    return out


def expand(adef: AlgorithmDef, ctx: ExpandContext) -> list[AlgorithmInstance]:
    """Cartesian expansion, left-to-right with the last axis fastest."""
    base = [_substitute(e, ctx, f"{adef.name}.base-args[{i}]")
            for i, e in enumerate(adef.base_args)]
    instances = []
    for g in adef.run_groups:
        arg_axes = _axes(g.args, ctx, f"{adef.name}.run-groups.{g.name}.args")
        q_axes = _axes(g.query_args, ctx,
                       f"{adef.name}.run-groups.{g.name}.query-args")
        q_groups = [list(combo) for combo in itertools.product(*q_axes)]
        for combo in itertools.product(*arg_axes):
            instances.append(AlgorithmInstance(
                algorithm=adef.name,
                group=g.name,
                constructor_args=base + list(combo),
                query_param_groups=[list(q) for q in q_groups],
                definition=adef,
            ))
    _check_collisions(instances)
    return instances


def expand_all(defs: list[AlgorithmDef], ctx: ExpandContext) -> list[AlgorithmInstance]:
    instances = [inst for adef in defs for inst in expand(adef, ctx)]
    _check_collisions(instances)
    return instances


def _check_collisions(instances) -> None:
    seen = {}
    for inst in instances:
        other = seen.setdefault(inst.label, inst)
        if other is not inst:
            raise ConfigError(
                f"instance label collision: {inst.label} produced by run "
                f"groups {other.group!r} and {inst.group!r}")
