"""
Augment Service
"""

import math
from typing import Any, Dict

from ..augment import FUSE_MODES, run_invariant_suite
from ..metrics.report import EvalReport
from ..workspace import DynoframeWorkspace

BOTH = "both"
DEVIATION_RANGE = (0.0, math.inf)


class AugmentService:
    """Service for the attention feature augmentation invariant checks."""

    def __init__(self, workspace: DynoframeWorkspace) -> None:
        self.workspace = workspace

    def check(self, check_data: Dict[str, Any]) -> EvalReport:
        """
        Run the invariant suite for one or both fusion modes.

        Args:
            check_data: Request containing (all optional):
                - mode: ``augment``, ``replace`` or ``both`` (default)
                - kb, kv, n, heads, trials, seed, large_k: Suite settings

        Returns:
            EvalReport whose metrics are the worst deviation per check;
            ``details["passed"]`` is False if any check failed
        """
        mode = check_data.get("mode") or BOTH
        if mode != BOTH and mode not in FUSE_MODES:
            raise ValueError(f"mode must be one of {FUSE_MODES + (BOTH,)}")
        settings = {
            key: int(check_data[key])
            for key in ("kb", "kv", "n", "heads", "trials", "seed", "large_k")
            if check_data.get(key) is not None
        }

        suites = [
            run_invariant_suite(mode=m, **settings)
            for m in (FUSE_MODES if mode == BOTH else (mode,))
        ]
        metrics = {}
        for suite in suites:
            prefix = "" if len(suites) == 1 else f"{suite['mode']}."
            for check in suite["checks"]:
                metrics[f"{prefix}{check['name']}"] = check["max_deviation"]
        return EvalReport(
            task="augment",
            scenario=mode,
            metrics=metrics,
            details={"suites": suites, "passed": all(s["passed"] for s in suites)},
            ranges={name: DEVIATION_RANGE for name in metrics},
        )
