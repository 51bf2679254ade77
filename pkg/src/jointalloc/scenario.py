"""Scenario files: one JSON document holding a topology and its channel gains.

Schema (version 1)::

    {
      "format": "jointalloc-scenario",
      "version": 1,
      "total_bandwidth": 10.0,
      "noise_psd": 1.0,
      "sources": [{"id": 1, "power_budget": 20.0}, ...],
      "relays":  [{"id": 1, "power_budget": 40.0}, ...],      # optional
      "users": [
        {"id": 1, "source": 1, "relay": 1, "c_min": 1.0,      # relay, c_min optional
         "h_sd": 0.3}                                         # or "h_sr" and "h_rd"
      ]
    }

Users without relays carry ``h_sd``; in relay mode every user carries
``h_sr`` and ``h_rd``.  Floats are written with shortest round-trip
precision, so dump followed by load is lossless.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from .errors import ScenarioFormatError
from .model import ChannelGains, NetworkTopology, Node, User, validate_topology

FORMAT = "jointalloc-scenario"
VERSION = 1


def _number(obj: dict, key: str, where: str, integer: bool = False, optional: bool = False):
    name = f"{where}.{key}" if where else key
    if key not in obj or obj[key] is None:
        if optional:
            return None
        raise ScenarioFormatError(name, "missing")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioFormatError(name, f"expected a number, got {type(v).__name__}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ScenarioFormatError(name, f"expected an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ScenarioFormatError(name, "must be finite")
    return v


def _list(obj: dict, key: str, optional: bool = False) -> list:
    if key not in obj:
        if optional:
            return []
        raise ScenarioFormatError(key, "missing")
    v = obj[key]
    if not isinstance(v, list):
        raise ScenarioFormatError(key, f"expected a list, got {type(v).__name__}")
    return v


def scenario_from_dict(doc: Any) -> tuple[NetworkTopology, ChannelGains]:
    """Parse and validate a scenario document."""
    if not isinstance(doc, dict):
        raise ScenarioFormatError("<root>", "expected an object")
    if doc.get("format") != FORMAT:
        raise ScenarioFormatError("format", f"expected {FORMAT!r}, got {doc.get('format')!r}")
    version = _number(doc, "version", "", integer=True)
    if version != VERSION:
        raise ScenarioFormatError("version", f"unsupported version {version}")
    W = _number(doc, "total_bandwidth", "")
    n0 = _number(doc, "noise_psd", "", optional=True)
    nodes = {}
    for kind in ("sources", "relays"):
        out = []
        for j, item in enumerate(_list(doc, kind, optional=(kind == "relays"))):
            where = f"{kind}[{j}]"
            if not isinstance(item, dict):
                raise ScenarioFormatError(where, "expected an object")
            out.append(Node(_number(item, "id", where, integer=True), _number(item, "power_budget", where)))
        nodes[kind] = tuple(out)
    relay_mode = bool(nodes["relays"])
    users, h_sd, h_sr, h_rd = [], [], [], []
    for j, item in enumerate(_list(doc, "users")):
        where = f"users[{j}]"
        if not isinstance(item, dict):
            raise ScenarioFormatError(where, "expected an object")
        users.append(User(
            _number(item, "id", where, integer=True),
            _number(item, "source", where, integer=True),
            _number(item, "relay", where, integer=True, optional=True),
            _number(item, "c_min", where, optional=True),
        ))
        if relay_mode:
            h_sr.append(_number(item, "h_sr", where))
            h_rd.append(_number(item, "h_rd", where))
        else:
            h_sd.append(_number(item, "h_sd", where))
    topology = NetworkTopology(nodes["sources"], nodes["relays"], tuple(users), W,
                               1.0 if n0 is None else n0)
    gains = ChannelGains.relayed(h_sr, h_rd) if relay_mode else ChannelGains.direct(h_sd)
    problems = validate_topology(topology, gains)
    if problems:
        raise ScenarioFormatError("<scenario>", "; ".join(problems))
    return topology, gains


def scenario_to_dict(topology: NetworkTopology, gains: ChannelGains) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "total_bandwidth": topology.total_bandwidth,
        "noise_psd": topology.noise_psd,
        "sources": [{"id": s.id, "power_budget": s.power_budget} for s in topology.sources],
    }
    if topology.relay_mode:
        doc["relays"] = [{"id": r.id, "power_budget": r.power_budget} for r in topology.relays]
    users = []
    for i, u in enumerate(topology.users):
        item = {"id": u.id, "source": u.source_id}
        if u.relay_id is not None:
            item["relay"] = u.relay_id
        if u.c_min is not None:
            item["c_min"] = u.c_min
        if topology.relay_mode:
            item["h_sr"] = float(gains.h_sr[i])
            item["h_rd"] = float(gains.h_rd[i])
        else:
            item["h_sd"] = float(gains.h_sd[i])
        users.append(item)
    doc["users"] = users
    return doc


def loads(text: str) -> tuple[NetworkTopology, ChannelGains]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError("<json>", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def dumps(topology: NetworkTopology, gains: ChannelGains) -> str:
    return json.dumps(scenario_to_dict(topology, gains), indent=2) + "\n"


def load_scenario(path) -> tuple[NetworkTopology, ChannelGains]:
    return loads(Path(path).read_text())


def save_scenario(path, topology: NetworkTopology, gains: ChannelGains) -> None:
    Path(path).write_text(dumps(topology, gains))
