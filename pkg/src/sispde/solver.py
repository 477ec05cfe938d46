"""Implicit time integration, trajectories and checkpoints."""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NumericalFailure
from .grid import Field, Grid
from .linalg import TridiagonalLU
from .model import GeneralCoefficients, ModelParams, inv_omega
from .operators import FORMS, TridiagonalOperator, assemble_operator

SCHEMES = ("backward_euler", "crank_nicolson", "bdf2")
CHECKPOINT_FORMAT = "sispde-checkpoint"
CHECKPOINT_VERSION = 1


def _field_kind(form):
    return "z" if form == "z_form" else "density"


class _Stepper:
    """Factored implicit matrix for one (operator, dt, scheme).

    ``bdf2`` solves (I - 2/3 dt A) u1 = (4 u0 - u_prev)/3 + 2/3 dt (rhs + s1)
    and needs the previous state; without one it takes a backward Euler step
    (so its own first step is always backward Euler).
    """

    def __init__(self, op: TridiagonalOperator, dt: float, scheme: str):
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {scheme!r}", ["scheme"])
        if not dt > 0:
            raise ConfigError("dt must be positive", ["dt"])
        self.op, self.dt, self.scheme = op, dt, scheme
        th = {"backward_euler": 1.0, "crank_nicolson": 0.5, "bdf2": 2.0 / 3.0}[scheme]
        self.theta = th
        self.lu = TridiagonalLU(-th * dt * op.sub, 1.0 - th * dt * op.main, -th * dt * op.sup)
        self._be = self if scheme == "backward_euler" else None

    def _backward_euler(self):
        if self._be is None:
            self._be = _Stepper(self.op, self.dt, "backward_euler")
        return self._be

    def advance(self, u, s0=None, s1=None, u_prev=None):
        op, dt = self.op, self.dt
        if self.scheme == "bdf2":
            if u_prev is None:
                return self._backward_euler().advance(u, s0, s1)
            b = (4.0 * u - u_prev) / 3.0
            forcing = np.zeros_like(u)
            if op.rhs is not None:
                forcing += op.rhs
            if s1 is not None:
                forcing += s1
            return self.lu.solve(b + self.theta * dt * forcing)
        b = u.copy()
        if self.theta < 1.0:
            b += 0.5 * dt * op.apply(u)
        if op.rhs is not None:
            b += dt * op.rhs
        if s1 is not None:
            b += dt * (self.theta * s1 + (1.0 - self.theta) * (s0 if s0 is not None else s1))
        return self.lu.solve(b)


def step(state: Field, dt: float, op: TridiagonalOperator, scheme: str = "backward_euler",
         source: Optional[Callable] = None) -> Field:
    """Advance one implicit step.

    Args:
        source: optional callable ``(x, t) -> array`` added to the right side.
    """
    if op.n != state.grid.n_cells:
        raise ValueError("operator and field sizes differ")
    if _field_kind(op.form) != state.kind:
        raise ValueError(f"{op.form} operator cannot advance a {state.kind} field")
    st = _Stepper(op, dt, scheme)
    x = state.grid.centers
    s0 = s1 = None
    if source is not None:
        s0 = np.asarray(source(x, state.time), dtype=float)
        s1 = np.asarray(source(x, state.time + dt), dtype=float)
    return state.copy(values=st.advance(state.values, s0, s1), time=state.time + dt)


@dataclass
class Trajectory:
    """Snapshots plus a per-step ledger of the conserved quantity.

    For density forms the ledger holds the mass sum(u) dx; for the z_form it
    holds the density mass sum(z/omega) dx.
    """

    times: np.ndarray
    snapshots: list
    ledger_steps: np.ndarray
    ledger_times: np.ndarray
    mass_ledger: np.ndarray
    form: str = "p_form"
    model: object = None
    dt: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> Optional[Grid]:
        return self.snapshots[0].grid if self.snapshots else None

    def values(self) -> np.ndarray:
        return np.array([s.values for s in self.snapshots])


def _model_descriptor(model):
    if isinstance(model, ModelParams):
        return {"N": model.N, "R0": model.R0}
    if isinstance(model, GeneralCoefficients):
        return {"general": model.name, "l": model.domain_length,
                "time_dependent": model.time_dependent}
    raise ConfigError("model must be ModelParams or GeneralCoefficients", ["model"])


def config_hash(payload: dict) -> str:
    """SHA-256 of the canonical JSON encoding of ``payload``."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=repr)
    return hashlib.sha256(text.encode()).hexdigest()


def run_hash(model, grid: Grid, form, dt, scheme, dirichlet_value=0.0) -> str:
    return config_hash({"model": _model_descriptor(model), "grid": list(grid.key()),
                        "form": form, "dt": dt, "scheme": scheme,
                        "dirichlet": dirichlet_value})


def atomic_write_text(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path, chash, step_index, time, values, ledger=None):
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "config_hash": chash,
           "step": int(step_index), "time": float(time),
           "values": [float(v) for v in values]}
    if ledger is not None:
        doc["ledger"] = [[int(k), float(t), float(m)] for k, t, m in ledger]
    atomic_write_text(path, json.dumps(doc))


def load_checkpoint(path, expected_hash=None) -> dict:
    """Read a checkpoint; a hash mismatch raises ConfigError."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path}: not a checkpoint file", ["checkpoint"])
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {doc.get('version')}",
                          ["checkpoint"])
    if expected_hash is not None and doc["config_hash"] != expected_hash:
        raise ConfigError(f"{path}: checkpoint config hash does not match this run",
                          ["checkpoint", "resume"])
    return doc


def evolve(initial: Field, model, form: str, t_end: float, dt: float, snapshot_every: int = 1,
           checkpoint=None, *, scheme: str = "backward_euler", resume: bool = False,
           checkpoint_every: Optional[int] = None, source: Optional[Callable] = None,
           dirichlet_value: float = 0.0) -> Trajectory:
    """Integrate from ``initial.time`` to ``t_end``.

    The number of steps is ``ceil((t_end - t0)/dt)``; the last step is
    shortened if needed so that the run ends exactly at ``t_end``.
    Time-dependent general coefficients are re-assembled at the end time of
    every step.

    Args:
        checkpoint: path of a checkpoint document written every
            ``checkpoint_every`` steps (default: the snapshot cadence) and at
            the end.
        resume: continue from ``checkpoint`` when it exists.

    Raises:
        NumericalFailure: non-finite values (``step`` holds the step index).
        ConfigError: inconsistent configuration or checkpoint mismatch.
    """
    if form not in FORMS:
        raise ConfigError(f"unknown form {form!r}", ["form"])
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}", ["scheme"])
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigError("dt must be positive", ["dt"])
    if int(snapshot_every) != snapshot_every or snapshot_every < 1:
        raise ConfigError("snapshot_every must be a positive integer", ["snapshots"])
    if initial.kind != _field_kind(form):
        raise ConfigError(f"{form} needs a {_field_kind(form)} field", ["init"])
    grid = initial.grid
    chash = run_hash(model, grid, form, dt, scheme, dirichlet_value)
    state = initial.copy()
    step0 = 0
    ledger = []
    if checkpoint is not None and resume and os.path.exists(checkpoint):
        doc = load_checkpoint(checkpoint, chash)
        if len(doc["values"]) != grid.n_cells:
            raise ConfigError("checkpoint grid size does not match", ["checkpoint"])
        state = initial.copy(values=np.array(doc["values"], dtype=float), time=doc["time"])
        step0 = doc["step"]
        ledger = [tuple(r) for r in doc.get("ledger", [])]
    if t_end < state.time - 1e-12:
        raise ConfigError("t_end precedes the start time", ["t_end"])
    n_steps = max(0, math.ceil((t_end - state.time) / dt - 1e-9))
    if checkpoint_every is None:
        checkpoint_every = snapshot_every

    if form == "z_form":
        w = np.asarray(inv_omega(grid.centers, model))
        mass = lambda v: float(np.sum(v * w) * grid.dx)
    else:
        mass = lambda v: float(np.sum(v) * grid.dx)

    time_dep = isinstance(model, GeneralCoefficients) and model.time_dependent
    op = None if time_dep else assemble_operator(model, grid, form, 0.0,
                                                  dirichlet_value=dirichlet_value)
    steppers = {}

    def stepper(h, t_next):
        if time_dep:
            return _Stepper(assemble_operator(model, grid, form, t_next), h, scheme)
        if h not in steppers:
            steppers[h] = _Stepper(op, h, scheme)
        return steppers[h]

    times = [state.time]
    snaps = [state.copy()]
    if not ledger:
        ledger = [(step0, state.time, mass(state.values))]
    u = state.values
    u_prev = None
    t = t_start = state.time
    x = grid.centers
    for k in range(1, n_steps + 1):
        h = dt if k < n_steps else (t_end - t)
        if h <= 0:
            break
        st = stepper(h, t + h)
        s0 = s1 = None
        if source is not None:
            s0 = np.asarray(source(x, t), dtype=float)
            s1 = np.asarray(source(x, t + h), dtype=float)
        if scheme == "bdf2" and h != dt:
            st = stepper(h, t + h)
            u_new = st.advance(u, s0, s1)
        else:
            u_new = st.advance(u, s0, s1, u_prev)
        u_prev, u = (u if h == dt else None), u_new
        t = t_start + k * dt if k < n_steps else t_end
        if not np.all(np.isfinite(u)):
            raise NumericalFailure(f"non-finite values at step {step0 + k} (t={t:.6g})",
                                   step=step0 + k)
        ledger.append((step0 + k, t, mass(u)))
        if k % snapshot_every == 0 or k == n_steps:
            times.append(t)
            snaps.append(initial.copy(values=u.copy(), time=t))
        if checkpoint is not None and (k % checkpoint_every == 0 or k == n_steps):
            save_checkpoint(checkpoint, chash, step0 + k, t, u, ledger)
    if checkpoint is not None and n_steps == 0:
        save_checkpoint(checkpoint, chash, step0, t, u, ledger)
    led = np.array(ledger, dtype=float).reshape(-1, 3)
    return Trajectory(
        times=np.array(times), snapshots=snaps,
        ledger_steps=led[:, 0].astype(int), ledger_times=led[:, 1], mass_ledger=led[:, 2],
        form=form, model=model, dt=dt,
        meta={"config_hash": chash, "start_step": step0, "step": step0 + n_steps,
              "scheme": scheme},
    )
