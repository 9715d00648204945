"""The design under test: a buggy pipelined MiniRV core and the case-study controller."""

from .bugs import BUG_DESCRIPTIONS, CASE_STUDY_BUGS, CORE_BUGS, NO_BUGS, BugConfig
from .controller import CONTROLLER_MANIFEST, Controller, controller_run
from .core import DEFAULT_MAX_CYCLES, DUT_MANIFEST, DutState, dut_cycle, dut_reset, dut_run

__all__ = [
    "BUG_DESCRIPTIONS", "CASE_STUDY_BUGS", "CORE_BUGS", "NO_BUGS", "BugConfig",
    "CONTROLLER_MANIFEST", "Controller", "controller_run",
    "DEFAULT_MAX_CYCLES", "DUT_MANIFEST", "DutState", "dut_cycle", "dut_reset", "dut_run",
]
