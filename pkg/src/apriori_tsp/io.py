"""Instance, tour, cover and hierarchy files, plus the versioned CSV writer."""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .core import AprioriInstance, HopInstance, Tour
from .errors import ValidationError
from .hierarchy import HierInstance, dump_hierarchy, load_hierarchy
from .path_cover import PathLevelPair

SCHEMA_LINE = "# schema=1"


def _reject_constants(token: str):
    raise ValidationError(f"non-finite number {token!r} in input")


def loads_json(text: str) -> dict:
    try:
        data = json.loads(text, parse_constant=_reject_constants)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ValidationError("expected a JSON object")
    return data


def _cost_matrix(data: dict) -> np.ndarray:
    if "cost" not in data:
        raise ValidationError("instance needs a 'cost' field")
    raw = np.asarray(data["cost"])
    n = data.get("n")
    if raw.ndim == 1:
        if n is None or raw.size != int(n) ** 2:
            raise ValidationError("flat cost array needs n with n*n entries")
        raw = raw.reshape(int(n), int(n))
    if n is not None and raw.shape != (int(n), int(n)):
        raise ValidationError(f"cost shape {raw.shape} disagrees with n={n}")
    if raw.dtype.kind not in "iuf":
        raise ValidationError("cost entries must be numbers")
    return raw


def instance_to_dict(inst: AprioriInstance) -> dict:
    cost = inst.cost.tolist()
    return {"n": inst.n, "cost": [x for row in cost for x in row],
            "prob": inst.prob.tolist(), "metric": bool(inst.metric)}


def instance_from_dict(data: dict) -> AprioriInstance:
    cost = _cost_matrix(data)
    if "prob" not in data:
        raise ValidationError("instance needs a 'prob' field")
    return AprioriInstance(cost, np.asarray(data["prob"], dtype=float), bool(data.get("metric", False)))


def hop_from_dict(data: dict, k: int | None = None) -> HopInstance:
    cost = _cost_matrix(data)
    k = data.get("k") if k is None else k
    if k is None:
        raise ValidationError("hop instance needs a 'k' field or --k")
    well = bool(np.all(cost == np.round(cost)) and cost.max() <= 2 * cost.shape[0] ** 3)
    return HopInstance(cost, int(k), well_scaled=well)


def read_json(path: str | Path) -> dict:
    return loads_json(Path(path).read_text(encoding="utf-8"))


def load_instance(path: str | Path) -> AprioriInstance:
    return instance_from_dict(read_json(path))


def dumps_instance(inst: AprioriInstance) -> str:
    return json.dumps(instance_to_dict(inst), allow_nan=False) + "\n"


def dumps_tour(tour: Tour) -> str:
    return json.dumps({"visits": list(tour.visits), "closed": tour.closed}) + "\n"


def loads_tour(text: str) -> Tour:
    data = loads_json(text)
    try:
        return Tour(tuple(int(v) for v in data["visits"]), bool(data.get("closed", True)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed tour: {exc}") from exc


def dumps_cover(cover) -> str:
    rows = [{"level": p.level, "path": list(p.path)} for p in cover]
    return json.dumps({"cover": rows}) + "\n"


def loads_cover(text: str) -> list[PathLevelPair]:
    data = loads_json(text)
    try:
        return [PathLevelPair(tuple(r["path"]), r["level"]) for r in data["cover"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed cover: {exc}") from exc


def load_hier(path: str | Path) -> HierInstance:
    return load_hierarchy(Path(path).read_text(encoding="utf-8"))


def dumps_hier(h: HierInstance) -> str:
    return dump_hierarchy(h)


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def csv_text(header: list[str], rows: list[dict]) -> str:
    """CSV with the schema comment line; floats as shortest round-trip repr."""
    buf = _io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(r.get(h, "")) for h in header])
    return buf.getvalue()
