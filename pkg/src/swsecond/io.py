"""File formats: JSON sources in, CSV/JSON reports out.

CSV output starts with ``# key: value`` metadata lines, then a header row;
numbers carry 9 significant digits and lines end in ``\\n``.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

from .errors import ParseError
from .source_model import JointPmf, MixedSource, make_joint_pmf, make_mixed


def _read_json(path: str | Path) -> tuple[Any, bytes]:
    raw = Path(path).read_bytes()
    try:
        return json.loads(raw.decode("utf-8")), raw
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text ({exc.reason})") from None


def _matrix(obj: Any, where: str) -> list[list[float]]:
    if not isinstance(obj, list) or not all(isinstance(r, list) for r in obj):
        raise ParseError(f"{where}: 'p' must be a list of rows")
    try:
        return [[float(x) for x in row] for row in obj]
    except (TypeError, ValueError):
        raise ParseError(f"{where}: 'p' entries must be numbers") from None


def parse_source(obj: Any, where: str = "<input>") -> JointPmf | MixedSource:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected a JSON object with key 'p' or 'components'")
    if "components" in obj:
        comps = obj["components"]
        if not isinstance(comps, list):
            raise ParseError(f"{where}: 'components' must be a list")
        parsed = []
        for k, c in enumerate(comps):
            if not isinstance(c, dict) or "w" not in c or "p" not in c:
                raise ParseError(f"{where}: component {k} needs keys 'w' and 'p'")
            parsed.append((float(c["w"]), make_joint_pmf(_matrix(c["p"], f"{where}: component {k}"))))
        return make_mixed(parsed)
    if "p" in obj:
        return make_joint_pmf(_matrix(obj["p"], where))
    raise ParseError(f"{where}: expected key 'p' or 'components'")


def load_source(path: str | Path) -> tuple[JointPmf | MixedSource, str]:
    """Read a pmf or mixture file; also returns a short content hash."""
    obj, raw = _read_json(path)
    return parse_source(obj, str(path)), hashlib.sha256(raw).hexdigest()[:16]


def load_pmf(path: str | Path) -> JointPmf:
    src, _ = load_source(path)
    if not isinstance(src, JointPmf):
        raise ParseError(f"{path}: expected a single pmf, found a mixture")
    return src


def load_mixture(path: str | Path) -> MixedSource:
    src, _ = load_source(path)
    if isinstance(src, JointPmf):
        return make_mixed([(1.0, src)])
    return src


def fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.9g}"
    return str(x)


def config_hash(config: Mapping[str, Any]) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_csv(
    out: TextIO, meta: Mapping[str, Any], columns: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
    for key, val in meta.items():
        out.write(f"# {key}: {fmt(val)}\n")
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(fmt(v) for v in row) + "\n")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return fmt(obj)
        return obj
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    return obj


def write_json(out: TextIO, payload: Mapping[str, Any]) -> None:
    json.dump(_jsonable(payload), out, indent=2, sort_keys=True)
    out.write("\n")
