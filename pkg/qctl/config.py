"""Job configuration: one JSON document, one section per concern.

Times are in nanoseconds and frequencies in GHz. ``u_max_MHz`` is converted
here; the hyperfine ``_MHz`` fields stay in MHz because ``HyperfineParams``
takes them that way and scales them when it builds the Hamiltonian.
"""

import json
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from qctl.errors import ConfigError, InvalidInputError
from qctl.io import matrix_from_json
from qctl.spin import COUPLINGS, FRAMES, ChainSpec, heisenberg_to_chain

SECTIONS = (
  "chain",
  "actuator",
  "controllability",
  "synthesis",
  "pulse",
  "simulate",
  "ft",
)
GATES = ("identity", "had_i", "t_i", "i_had", "i_t", "cnot")
GENERATORS = ("switch_pair", "drift_only")
MHZ = 1e-3

_REQUIRED = object()


class _Reader(object):
  """Pops typed keys from one section and rejects whatever is left over."""

  def __init__(self, name: str, raw: Any) -> None:
    super().__init__()
    if not isinstance(raw, dict):
      raise ConfigError(name, "section must be a JSON object")
    self.name = name
    self.raw = dict(raw)
    self.resolved: Dict[str, Any] = {}

  def field(self, key: str) -> str:
    return f"{self.name}.{key}"

  def get(self, key: str, default: Any = _REQUIRED) -> Any:
    if key in self.raw:
      value = self.raw.pop(key)
    elif default is _REQUIRED:
      raise ConfigError(self.field(key), "required field missing")
    else:
      value = default
    self.resolved[key] = value
    return value

  def number(
    self,
    key: str,
    default: Any = _REQUIRED,
    positive: bool = False,
    minimum: Optional[float] = None,
  ) -> Any:
    value = self.get(key, default)
    if value is None:
      return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
      raise ConfigError(self.field(key), f"expected a number, got {value!r}")
    if not math.isfinite(value):
      raise ConfigError(self.field(key), "must be finite")
    if positive and value <= 0:
      raise ConfigError(self.field(key), f"must be positive, got {value}")
    if minimum is not None and value < minimum:
      raise ConfigError(self.field(key), f"must be >= {minimum}, got {value}")
    return float(value)

  def integer(
    self, key: str, default: Any = _REQUIRED, minimum: Optional[int] = None
  ) -> Any:
    value = self.get(key, default)
    if value is None:
      return None
    if isinstance(value, bool) or not isinstance(value, int):
      raise ConfigError(self.field(key), f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
      raise ConfigError(self.field(key), f"must be >= {minimum}, got {value}")
    return value

  def choice(self, key: str, options: Sequence[str], default: Any) -> str:
    value = self.get(key, default)
    if value not in options:
      raise ConfigError(
        self.field(key), f"expected one of {list(options)}, got {value!r}"
      )
    return str(value)

  def vector(self, key: str, default: Any = _REQUIRED) -> Any:
    value = self.get(key, default)
    if value is None:
      return None
    if not isinstance(value, list) or any(
      isinstance(x, bool) or not isinstance(x, (int, float)) for x in value
    ):
      raise ConfigError(self.field(key), "expected an array of numbers")
    return [float(x) for x in value]

  def matrix(self, key: str, default: Any = _REQUIRED) -> Any:
    value = self.get(key, default)
    if value is None:
      return None
    try:
      return matrix_from_json(value)
    except InvalidInputError as e:
      raise ConfigError(self.field(key), str(e)) from None

  def matrices(self, key: str) -> List[np.ndarray]:
    value = self.get(key, [])
    if not isinstance(value, list):
      raise ConfigError(self.field(key), "expected an array of matrices")
    out = []
    for k, m in enumerate(value):
      try:
        out.append(matrix_from_json(m))
      except InvalidInputError as e:
        raise ConfigError(f"{self.field(key)}[{k}]", str(e)) from None
    return out

  def done(self) -> Dict[str, Any]:
    if self.raw:
      key = sorted(self.raw)[0]
      raise ConfigError(self.field(key), "unknown field")
    return self.resolved


@dataclass(frozen=True)
class ChainSection:
  coupling: str
  N: int
  E: Tuple[float, ...]
  d: Tuple[float, ...]

  def spec(self) -> ChainSpec:
    return ChainSpec(self.N, self.E, self.d)


def _chain(raw: Any) -> Tuple[ChainSection, Dict[str, Any]]:
  r = _Reader("chain", raw)
  coupling = r.choice("coupling", ("explicit",) + COUPLINGS, "explicit")
  try:
    if coupling == "explicit":
      E = r.vector("E")
      d = r.vector("d")
      N = r.integer("N", len(E), minimum=1)
      spec = ChainSpec(N, tuple(E), tuple(d))
    else:
      J = r.vector("J")
      N = r.integer("N", len(J) + 1, minimum=2)
      spec = heisenberg_to_chain(J, N, coupling)
  except ConfigError:
    raise
  except InvalidInputError as e:
    raise ConfigError("chain", str(e)) from None
  return ChainSection(coupling, spec.N, spec.E, spec.d), r.done()


@dataclass(frozen=True)
class ControllabilitySection:
  generators: str
  rank_tol: float
  dim_cap: Optional[int]


def _controllability(raw: Any) -> Tuple[ControllabilitySection, Dict[str, Any]]:
  r = _Reader("controllability", raw)
  sec = ControllabilitySection(
    generators=r.choice("generators", GENERATORS, "switch_pair"),
    rank_tol=r.number("rank_tol", 1e-10, positive=True),
    dim_cap=r.integer("dim_cap", None, minimum=1),
  )
  return sec, r.done()


@dataclass(frozen=True)
class SynthesisSection:
  gate: str
  fidelity_goal: float
  max_segments: int
  min_segments: Optional[int]
  restarts: int
  seed: int
  total_time_cap: Optional[float]
  fidelity_mode: str
  lam: Optional[Tuple[float, ...]]
  switching_csv: bool


def _synthesis(raw: Any) -> Tuple[SynthesisSection, Dict[str, Any]]:
  r = _Reader("synthesis", raw)
  gate = r.choice("gate", GATES, _REQUIRED)
  goal = r.number("fidelity_goal", 0.9999, positive=True)
  if goal > 1:
    raise ConfigError("synthesis.fidelity_goal", "must not exceed 1")
  lam = r.vector("lambda", None)
  if lam is not None and any(v < 0 for v in lam):
    raise ConfigError("synthesis.lambda", "weights must be nonnegative")
  switching_csv = r.get("switching_csv", True)
  if not isinstance(switching_csv, bool):
    raise ConfigError("synthesis.switching_csv", "expected true or false")
  sec = SynthesisSection(
    gate=gate,
    fidelity_goal=goal,
    max_segments=r.integer("max_segments", 40, minimum=1),
    min_segments=r.integer("min_segments", None, minimum=1),
    restarts=r.integer("restarts", 32, minimum=1),
    seed=r.integer("seed", 0),
    total_time_cap=r.number("total_time_cap", None, positive=True),
    fidelity_mode=r.choice(
      "fidelity_mode", ("phase_sensitive", "phase_invariant"),
      "phase_sensitive"
    ),
    lam=None if lam is None else tuple(lam),
    switching_csv=switching_csv,
  )
  return sec, r.done()


@dataclass(frozen=True)
class PulseSection:
  """Frequencies in GHz, times in ns."""

  nu_s: float
  nu_n_MHz: float
  A_zx_MHz: float
  A_zz_MHz: float
  frame: str
  segments: int
  horizon: float
  u_max: float
  iters: int
  restarts: int
  seed: int
  fidelity_goal: float


def _pulse(raw: Any) -> Tuple[PulseSection, Dict[str, Any]]:
  r = _Reader("pulse", raw)
  sec = PulseSection(
    nu_s=r.number("nu_s_GHz", 11.885),
    nu_n_MHz=r.number("nu_n_MHz", 18.1),
    A_zx_MHz=r.number("A_zx_MHz", 14.2),
    A_zz_MHz=r.number("A_zz_MHz", -42.7),
    frame=r.choice("frame", FRAMES, "electron-rotating"),
    segments=r.integer("segments", 100, minimum=1),
    horizon=r.number("horizon_ns", 200.0, positive=True),
    u_max=r.number("u_max_MHz", 100.0, positive=True) * MHZ,
    iters=r.integer("iters", 500, minimum=0),
    restarts=r.integer("restarts", 4, minimum=1),
    seed=r.integer("seed", 0),
    fidelity_goal=r.number("fidelity_goal", 0.99, positive=True),
  )
  return sec, r.done()


@dataclass(frozen=True, eq=False)
class SimulateSection:
  H: np.ndarray
  collapse: Tuple[np.ndarray, ...]
  measured: Tuple[np.ndarray, ...]
  feedback_mode: str
  feedback_gain: float
  feedback_actuator: Optional[np.ndarray]
  rho0: np.ndarray
  T: float
  dt: float
  trajectories: int
  trajectory_files: int
  seed: int
  save_every: int


def _simulate(raw: Any) -> Tuple[SimulateSection, Dict[str, Any]]:
  r = _Reader("simulate", raw)
  H = r.matrix("H")
  collapse = r.matrices("collapse")
  measured = r.matrices("measured")
  fb = _Reader("simulate.feedback", r.get("feedback", {}))
  mode = fb.choice("mode", ("off", "current_proportional"), "off")
  gain = fb.number("gain", 0.0)
  actuator = fb.matrix("actuator", None)
  r.resolved["feedback"] = fb.done()
  if mode == "current_proportional" and actuator is None:
    raise ConfigError("simulate.feedback.actuator", "required field missing")
  trajectories = r.integer("trajectories", 0, minimum=0)
  sec = SimulateSection(
    H=H,
    collapse=tuple(collapse),
    measured=tuple(measured),
    feedback_mode=mode,
    feedback_gain=gain,
    feedback_actuator=actuator,
    rho0=r.matrix("rho0"),
    T=r.number("T", minimum=0.0),
    dt=r.number("dt", positive=True),
    trajectories=trajectories,
    trajectory_files=r.integer(
      "trajectory_files", min(trajectories, 10), minimum=0
    ),
    seed=r.integer("seed", 0),
    save_every=r.integer("save_every", 1, minimum=1),
  )
  return sec, r.done()


@dataclass(frozen=True)
class FtSection:
  target: str
  realized: str
  lam: Optional[Tuple[float, ...]]


def _ft(raw: Any, base: str) -> Tuple[FtSection, Dict[str, Any]]:
  r = _Reader("ft", raw)
  target = r.get("target")
  realized = r.get("realized")
  for key, value in (("target", target), ("realized", realized)):
    if not isinstance(value, str):
      raise ConfigError(f"ft.{key}", "expected a file path")
  lam = r.vector("lambda", None)
  if lam is not None and any(v < 0 for v in lam):
    raise ConfigError("ft.lambda", "weights must be nonnegative")
  sec = FtSection(
    target=os.path.join(base, target),
    realized=os.path.join(base, realized),
    lam=None if lam is None else tuple(lam),
  )
  return sec, r.done()


@dataclass(frozen=True, eq=False)
class JobConfig:
  chain: Optional[ChainSection] = None
  r: int = 1
  controllability: Optional[ControllabilitySection] = None
  synthesis: Optional[SynthesisSection] = None
  pulse: Optional[PulseSection] = None
  simulate: Optional[SimulateSection] = None
  ft: Optional[FtSection] = None
  resolved: Optional[Dict[str, Any]] = None

  def require(self, *names: str) -> None:
    for name in names:
      if getattr(self, name) is None:
        raise ConfigError(name, "required section missing")


def parse_config(
  raw: Any, base_dir: str = ".", seed: Optional[int] = None
) -> JobConfig:
  """Validate a config document; ``seed`` overrides every section seed."""
  if not isinstance(raw, dict):
    raise ConfigError("<root>", "config must be a JSON object")
  unknown = sorted(set(raw) - set(SECTIONS))
  if unknown:
    raise ConfigError(unknown[0], "unknown section")
  raw = dict(raw)
  if seed is not None:
    for name in ("synthesis", "pulse", "simulate"):
      if isinstance(raw.get(name), dict):
        raw[name] = dict(raw[name], seed=seed)

  resolved: Dict[str, Any] = {}
  kwargs: Dict[str, Any] = {}
  parsers = {
    "chain": _chain,
    "controllability": _controllability,
    "synthesis": _synthesis,
    "pulse": _pulse,
    "simulate": _simulate,
  }
  for name in SECTIONS:
    if name not in raw:
      continue
    if name == "actuator":
      reader = _Reader("actuator", raw[name])
      kwargs["r"] = reader.integer("r", 1, minimum=1)
      resolved[name] = reader.done()
    elif name == "ft":
      kwargs["ft"], resolved[name] = _ft(raw[name], base_dir)
    else:
      kwargs[name], resolved[name] = parsers[name](raw[name])
  chain = kwargs.get("chain")
  if chain is not None and kwargs.get("r", 1) > chain.N - 1:
    raise ConfigError("actuator.r", f"must lie in 1..{chain.N - 1}")
  return JobConfig(resolved=resolved, **kwargs)


def load_config(path: str, seed: Optional[int] = None) -> JobConfig:
  if not os.path.exists(path):
    raise ConfigError("--config", f"file {path} not found")
  with open(path, "r") as f:
    try:
      raw = json.load(f)
    except json.JSONDecodeError as e:
      raise ConfigError("--config", f"invalid JSON: {e}") from None
  return parse_config(raw, os.path.dirname(os.path.abspath(path)), seed)
