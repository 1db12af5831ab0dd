import os
import sys
import time
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from qctl.args import get_args
from qctl.bangbang import (
  CONVERGED,
  SynthesisJob,
  gate_fidelity,
  gate_library,
  hamiltonian_angle,
  switching_steps,
  synthesize_gate,
)
from qctl.config import JobConfig, load_config
from qctl.errors import ConfigError, QctlError
from qctl.grape import (
  bloch_trajectory,
  grape_multistart,
  nuclear_flip_problem,
  transfer_fidelity,
)
from qctl.io import read_matrix, write_csv, write_json
from qctl.lie import is_controllable, lie_closure
from qctl.opensys import (
  FeedbackRule,
  ensemble_average,
  homodyne_model,
  lindblad_propagate,
  saved_steps,
  sme_ensemble,
  time_grid,
  trace_distance,
)
from qctl.pauli import (
  PenaltyWeights,
  error_operator,
  pauli_coefficient_array,
  penalized_objective,
  qubit_count,
  weight_spectrum,
)
from qctl.spin import HyperfineParams, build_switch_pair

EXIT_OK = 0
EXIT_GOAL_NOT_REACHED = 1
EXIT_INVALID = 2


def cmd_synth(cfg: JobConfig, out: str, n_cpu: int = 1) -> int:
  cfg.require("chain", "synthesis")
  assert cfg.chain is not None and cfg.synthesis is not None
  syn = cfg.synthesis
  h_off, h_on = build_switch_pair(cfg.chain.spec(), cfg.r)
  penalty = None if syn.lam is None else PenaltyWeights(syn.lam)
  job = SynthesisJob(
    target=gate_library()[syn.gate],
    H_pair=(h_off, h_on),
    fidelity_goal=syn.fidelity_goal,
    max_segments=syn.max_segments,
    total_time_cap=syn.total_time_cap,
    restarts=syn.restarts,
    seed=syn.seed,
    fidelity_mode=syn.fidelity_mode,
    min_segments=syn.min_segments,
    penalty=penalty,
    n_cpu=n_cpu,
  )
  t = time.time()
  result = synthesize_gate(job)
  print(
    f"Gate {syn.gate}: fidelity {result.achieved_fidelity:.8f}, "
    f"{result.schedule.K} segments, status {result.status}, "
    f"{time.time() - t:.2f}s"
  )
  path = os.path.join(out, "schedule.json")
  write_json(
    path, {
      "gate": syn.gate,
      "m": list(result.schedule.m),
      "t": list(result.schedule.t),
      "fidelity": result.achieved_fidelity,
      "status": result.status,
      "hamiltonian_angle_rad": hamiltonian_angle(h_off, h_on),
      "norm_error": result.norm_error,
      "total_time": result.total_time,
      "config": cfg.resolved,
    }
  )
  print(f"Successfully write schedule to {path}")
  if syn.switching_csv:
    path = os.path.join(out, "switching.csv")
    write_csv(
      path, ["time", "actuator_state"], switching_steps(result.schedule),
      cfg.resolved
    )
    print(f"Successfully write switching plot data to {path}")
  return EXIT_OK if result.status == CONVERGED else EXIT_GOAL_NOT_REACHED


def cmd_controllability(cfg: JobConfig, out: str) -> int:
  cfg.require("chain")
  assert cfg.chain is not None
  sec = cfg.controllability
  generators = "switch_pair" if sec is None else sec.generators
  rank_tol = 1e-10 if sec is None else sec.rank_tol
  dim_cap = None if sec is None else sec.dim_cap
  pair = build_switch_pair(cfg.chain.spec(), cfg.r)
  gens = list(pair) if generators == "switch_pair" else [pair[0]]
  report = lie_closure(gens, rank_tol=rank_tol, dim_cap=dim_cap)
  controllable = is_controllable(report)
  print(
    f"Lie closure dimension {report.dimension} of {report.max_dimension}, "
    f"controllable: {controllable}"
  )
  path = os.path.join(out, "report.json")
  write_json(
    path, {
      "n": report.n,
      "dimension": report.dimension,
      "controllable": controllable,
      "max_dimension": report.max_dimension,
      "truncated": report.truncated,
      "rank_tol": report.rank_tolerance,
      "config": cfg.resolved,
    }
  )
  print(f"Successfully write report to {path}")
  return EXIT_OK


def cmd_ft_analyze(cfg: JobConfig, out: str, backend: str = "numpy") -> int:
  cfg.require("ft")
  assert cfg.ft is not None
  u_t = read_matrix(cfg.ft.target)
  u_r = read_matrix(cfg.ft.realized)
  n = qubit_count(u_t)
  lam = PenaltyWeights.default(n) if cfg.ft.lam is None else PenaltyWeights(
    cfg.ft.lam
  )
  u_e = error_operator(u_t, u_r)
  spectrum = weight_spectrum(pauli_coefficient_array(u_e, n, backend))
  fidelity = gate_fidelity(u_r, u_t)
  penalized = penalized_objective(u_r, u_t, lam, backend)
  print(f"Fidelity {fidelity:.8f}, penalized objective {penalized:.8f}")
  path = os.path.join(out, "weights.json")
  write_json(
    path, {
      "fidelity": fidelity,
      "weights": list(spectrum.W),
      "penalized": penalized,
      "lambda": list(lam.lam),
      "config": cfg.resolved,
    }
  )
  print(f"Successfully write weights to {path}")
  return EXIT_OK


def _populations(states: np.ndarray) -> np.ndarray:
  return np.real(np.diagonal(states, axis1=-2, axis2=-1))


def cmd_simulate(cfg: JobConfig, out: str) -> int:
  cfg.require("simulate")
  sim = cfg.simulate
  assert sim is not None
  model, channels = homodyne_model(sim.H, sim.measured, sim.collapse)
  fb = FeedbackRule(sim.feedback_gain, sim.feedback_actuator, sim.feedback_mode)
  dim = model.dim
  pops = [f"p_{j}" for j in range(dim)]

  master = lindblad_propagate(model, sim.rho0, sim.T, sim.dt, sim.save_every)
  path = os.path.join(out, "master.csv")
  write_csv(
    path, ["time"] + pops,
    np.column_stack([master.times, _populations(master.states)]), cfg.resolved
  )
  print(f"Successfully write master equation solution to {path}")
  if sim.trajectories == 0:
    return EXIT_OK

  t = time.time()
  trajectories = sme_ensemble(
    model, channels, fb, sim.rho0, sim.T, sim.dt, sim.trajectories, sim.seed,
    sim.save_every
  )
  print(f"Integrated {sim.trajectories} trajectories in {time.time() - t:.2f}s")
  ys = [f"y_{c}" for c in range(len(channels))]
  n_steps, _ = time_grid(sim.T, sim.dt)
  steps = saved_steps(n_steps, sim.save_every)
  for k, tr in enumerate(trajectories[:sim.trajectory_files]):
    # integrated current y(t) at the stored times
    y = np.vstack([np.zeros(len(ys)), np.cumsum(tr.record, axis=0)])[steps]
    write_csv(
      os.path.join(out, f"trajectory_{k}.csv"),
      ["time"] + pops + ys,
      np.column_stack([tr.times, _populations(tr.states), y]),
      cfg.resolved,
    )
  mean = ensemble_average(trajectories)
  distance = [trace_distance(a, b) for a, b in zip(mean.states, master.states)]
  path = os.path.join(out, "ensemble.csv")
  write_csv(
    path,
    ["time"] + pops + ["trace_distance"],
    np.column_stack([mean.times, _populations(mean.states), distance]),
    cfg.resolved,
  )
  print(
    f"Successfully write ensemble to {path}, "
    f"final trace distance to master equation {distance[-1]:.3e}"
  )
  return EXIT_OK


def cmd_pulse(cfg: JobConfig, out: str, n_cpu: int = 1) -> int:
  cfg.require("pulse")
  sec = cfg.pulse
  assert sec is not None
  params = HyperfineParams(sec.nu_s, sec.nu_n_MHz, sec.A_zx_MHz, sec.A_zz_MHz)
  problem = nuclear_flip_problem(
    params, sec.frame, sec.segments, sec.horizon, sec.u_max
  )
  t = time.time()
  result = grape_multistart(problem, sec.restarts, sec.iters, sec.seed, n_cpu)
  fidelity = transfer_fidelity(problem, result.program)
  print(
    f"Nuclear flip fidelity {fidelity:.8f} after "
    f"{len(result.history) - 1} iterations, {time.time() - t:.2f}s"
  )
  path = os.path.join(out, "pulse.json")
  write_json(
    path, {
      "dt": result.program.dt,
      "amplitudes": result.program.amplitudes,
      "units": {
        "dt": "ns",
        "amplitudes": "GHz"
      },
      "fidelity": fidelity,
      "history": result.history,
      "config": cfg.resolved,
    }
  )
  print(f"Successfully write pulse to {path}")
  times, vectors = bloch_trajectory(problem, result.program)
  path = os.path.join(out, "bloch.csv")
  write_csv(
    path, ["time", "bx", "by", "bz"], np.column_stack([times, vectors]),
    cfg.resolved
  )
  print(f"Successfully write Bloch trajectory to {path}")
  return EXIT_OK if fidelity >= sec.fidelity_goal else EXIT_GOAL_NOT_REACHED


def main(argv: Optional[List[str]] = None) -> int:
  args = get_args(argv)
  commands: Dict[str, Callable[[JobConfig, str], int]] = {
    "synth": lambda c, o: cmd_synth(c, o, args.cpu),
    "controllability": cmd_controllability,
    "ft-analyze": lambda c, o: cmd_ft_analyze(c, o, args.backend),
    "simulate": cmd_simulate,
    "pulse": lambda c, o: cmd_pulse(c, o, args.cpu),
  }
  try:
    cfg = load_config(args.config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    return commands[args.command](cfg, args.out)
  except ConfigError as e:
    _report(f"config error: {e}")
    return EXIT_INVALID
  except QctlError as e:
    _report(f"{type(e).__name__}: {e}")
    return EXIT_INVALID


def _report(message: Any) -> None:
  print(message, file=sys.stderr)
