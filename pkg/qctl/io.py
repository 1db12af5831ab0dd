import json
import math
import os
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np

from qctl.errors import InvalidInputError
from qctl.linalg import as_matrix

FLOAT_FORMAT = ".17g"


def matrix_to_json(m: Any) -> List[List[List[float]]]:
  """Array of rows of [re, im] pairs."""
  a = as_matrix(m)
  return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def _entry(x: Any) -> complex:
  if isinstance(x, (list, tuple)):
    if len(x) != 2:
      raise InvalidInputError(f"Matrix entry {x!r} is not an [re, im] pair.")
    return complex(float(x[0]), float(x[1]))
  if isinstance(x, bool) or not isinstance(x, (int, float)):
    raise InvalidInputError(f"Matrix entry {x!r} is not a number.")
  return complex(float(x), 0.0)


def matrix_from_json(obj: Any) -> np.ndarray:
  """Inverse of ``matrix_to_json``; bare real entries are accepted too."""
  if isinstance(obj, dict) and "matrix" in obj:
    obj = obj["matrix"]
  if not isinstance(obj, list) or not all(isinstance(r, list) for r in obj):
    raise InvalidInputError("A matrix is a JSON array of rows.")
  rows = [[_entry(x) for x in row] for row in obj]
  if len({len(r) for r in rows}) > 1:
    raise InvalidInputError("Matrix rows have different lengths.")
  return as_matrix(np.array(rows, dtype=complex))


def read_matrix(path: str) -> np.ndarray:
  if not os.path.exists(path):
    raise InvalidInputError(f"Matrix file {path} not found.")
  with open(path, "r") as f:
    try:
      obj = json.load(f)
    except json.JSONDecodeError as e:
      raise InvalidInputError(f"{path} is not valid JSON: {e}") from None
  return matrix_from_json(obj)


def write_matrix(path: str, m: Any) -> None:
  write_json(path, {"matrix": matrix_to_json(m)})


def format_float(x: float) -> str:
  if math.isnan(x):
    return "NaN"
  if math.isinf(x):
    return "Infinity" if x > 0 else "-Infinity"
  s = format(x, FLOAT_FORMAT)
  if not any(c in s for c in ".en"):
    s += ".0"
  return s


def _plain(obj: Any) -> Any:
  if isinstance(obj, np.ndarray):
    return obj.tolist()
  if isinstance(obj, np.generic):
    return obj.item()
  return obj


def encode(obj: Any, indent: Optional[int] = 2, level: int = 0) -> str:
  """JSON text with every float at 17 significant digits.

  ``indent=None`` gives a single line.
  """
  obj = _plain(obj)
  pad = " " * ((indent or 0) * (level + 1))
  end = " " * ((indent or 0) * level)
  if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
    return json.dumps(obj)
  if isinstance(obj, float):
    return format_float(obj)
  if isinstance(obj, complex):
    return encode([obj.real, obj.imag], indent, level)
  if isinstance(obj, dict):
    if not obj:
      return "{}"
    if indent is None:
      items = [
        f"{json.dumps(str(k))}: {encode(v, None)}" for k, v in obj.items()
      ]
      return "{" + ", ".join(items) + "}"
    items = [
      f"{pad}{json.dumps(str(k))}: {encode(v, indent, level + 1)}"
      for k, v in obj.items()
    ]
    return "{\n" + ",\n".join(items) + "\n" + end + "}"
  if isinstance(obj, (list, tuple)):
    if not obj:
      return "[]"
    parts = [encode(v, indent, level + 1) for v in obj]
    if all("\n" not in p for p in parts):
      return "[" + ", ".join(parts) + "]"
    return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + end + "]"
  raise InvalidInputError(f"Cannot serialize {type(obj).__name__}.")


def write_json(path: str, obj: Any) -> None:
  with open(path, "w") as f:
    f.write(encode(obj) + "\n")


def write_csv(
  path: str,
  columns: Sequence[str],
  rows: Iterable[Sequence[float]],
  config: Any,
) -> None:
  """CSV whose first comment line carries the resolved config."""
  data = np.asarray(list(rows), dtype=float).reshape(-1, len(columns))
  header = "config: " + encode(config, indent=None) + "\n"
  header += ",".join(columns)
  np.savetxt(
    path, data, fmt="%.17g", delimiter=",", header=header, comments="# "
  )
