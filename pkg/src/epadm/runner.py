"""Run orchestration shared by the CLI and the tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .diagnostics import DiagnosticsWriter, MaterialLoop, conserved_report
from .dynamics import FluidState, cfl_dt, rk4_step
from .snapshot import write_snapshot


@dataclass
class RunResult:
    state: FluidState
    loops: list
    records: list = field(default_factory=list)
    outputs: list = field(default_factory=list)   # (t, u, J0) at every output time
    steps: int = 0


def output_times(t_end: float, every: Optional[float]) -> list:
    if not every or every <= 0 or every >= t_end:
        return [t_end]
    k = int(np.floor(t_end / every + 1e-9))
    times = [every * i for i in range(1, k + 1)]
    if t_end - times[-1] > 1e-12 * max(1.0, t_end):
        times.append(t_end)
    else:
        times[-1] = t_end
    return times


def integrate(model, state: FluidState, t_end: float, loops: Sequence[MaterialLoop] = (),
              dt: Optional[float] = None, safety: float = 0.4, every: Optional[float] = None,
              quadrature: int = 3, on_output: Optional[Callable] = None,
              keep_outputs: bool = False) -> RunResult:
    """RK4 to ``t_end``, landing exactly on each output time.

    Loops are co-advected with the stage velocities and remarked when a
    marker separation doubles.  ``on_output(state, loops, record)`` runs
    at t = 0 and every output time.
    """
    loops = list(loops)
    rec = conserved_report(model, state, loops, quadrature)
    result = RunResult(state, loops, [rec])
    if keep_outputs:
        result.outputs.append((state.t, model.recover(state).copy(), state.J0.copy()))
    if on_output is not None:
        on_output(state, loops, rec)
    for t_out in output_times(t_end, every):
        while state.t < t_out - 1e-13 * max(1.0, abs(t_out)):
            h = cfl_dt(model, state, safety) if dt is None else dt
            h = min(h, t_out - state.t)
            if t_out - (state.t + h) < 1e-9 * h:
                h = t_out - state.t
            state, marks = rk4_step(model, state, h, [lp.markers for lp in loops])
            loops = [lp.moved(X) for lp, X in zip(loops, marks)]
            loops = [lp.remarked() if lp.needs_remark() else lp for lp in loops]
            result.steps += 1
        state.t = t_out
        rec = conserved_report(model, state, loops, quadrature)
        result.records.append(rec)
        if keep_outputs:
            result.outputs.append((state.t, model.recover(state).copy(), state.J0.copy()))
        if on_output is not None:
            on_output(state, loops, rec)
    result.state, result.loops = state, loops
    return result


class OutputSink:
    """Diagnostics CSV plus field snapshots in ``directory``."""

    def __init__(self, directory, model, loops, fields=("J0", "u"), snapshots: bool = True):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.model = model
        self.fields = tuple(fields)
        self.snapshots = snapshots
        self.writer = DiagnosticsWriter(self.dir / "diagnostics.csv", [lp.name for lp in loops])
        self.index = 0

    def __call__(self, state, loops, rec):
        self.writer.write(rec)
        if self.snapshots:
            values = {"J0": state.J0, "m": state.m}
            for name in self.fields:
                arr = self.model.recover(state) if name == "u" else values[name]
                write_snapshot(self.dir / f"{name}_{self.index:04d}.epadm", self.model.grid, arr,
                               f"{name}@t={state.t:.17g}")
        self.index += 1

    def close(self):
        self.writer.close()
