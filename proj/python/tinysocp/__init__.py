"""Scripting front end for the tinysocp native solver.

All numerics run in the native core. Matrices may be nested sequences or
anything numpy can read as a float array; they are copied once on entry.
Knot-indexed arrays are one row per knot: xref is (N, n), uref and the full
input plan are (N-1, m).
"""

from ._core import CodegenError, LifecycleError, ProblemFileError, ValidationError
from ._core import Handle as _Handle

__all__ = [
    "TinySocp",
    "CodegenError",
    "LifecycleError",
    "ProblemFileError",
    "ValidationError",
]


class TinySocp:
    """One problem, one workspace. Not safe to share across threads."""

    def __init__(self):
        self._handle = _Handle()

    def setup(self, N, A, B, c, Q, R, bounds=None, socs=None, settings=None):
        """bounds: dict with any of x_min, x_max, u_min, u_max.
        socs: dict with "state" and/or "input" lists of (start, len); the last
        coordinate of each slice is the apex.
        settings: dict of solver settings (rho, abs_pri_tol, abs_dua_tol,
        max_iter, check_termination, en_state_bound, en_input_bound,
        en_state_soc, en_input_soc).
        """
        self._handle.setup(N, A, B, c, Q, R, bounds or {}, socs or {}, settings or {})
        return self

    def setup_file(self, path):
        """Same as setup() but reads a problem file as used by the CLI."""
        self._handle.setup_file(str(path))
        return self

    def codegen(self, output_dir, precision="f32", flash_budget=None):
        """Writes the standalone solver tree and returns its manifest text."""
        return self._handle.codegen(str(output_dir), precision, flash_budget)

    def set_x0(self, x0):
        self._handle.set_x0(x0)

    def set_xref(self, xref):
        self._handle.set_xref(xref)

    def set_uref(self, uref):
        self._handle.set_uref(uref)

    def solve(self):
        """Returns status, iterations, pri_res and dua_res."""
        return self._handle.solve()

    def get_u(self, full=False):
        """First input of the plan, or the whole (N-1, m) plan."""
        return self._handle.get_u(full)

    def get_x(self):
        return self._handle.get_x()

    def warm_start_shift(self):
        self._handle.warm_start_shift()

    def reset(self):
        self._handle.reset()

    @property
    def is_setup(self):
        return self._handle.is_setup
