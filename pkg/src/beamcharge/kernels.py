"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
implementation takes over. Set ``BEAMCHARGE_PURE_PYTHON=1`` to force the
fallback.
"""
import os

if os.environ.get("BEAMCHARGE_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import (  # noqa: F401
        TABLE, U1, U2, fw_p1, greedy_schedule, policy_gains, utility, utility_grad,
    )
    BACKEND = "python"
else:
    try:
        from ._kernels import (  # noqa: F401
            TABLE, U1, U2, fw_p1, greedy_schedule, policy_gains, utility, utility_grad,
        )
        BACKEND = "compiled"
    except ImportError:
        from ._kernels_py import (  # noqa: F401
            TABLE, U1, U2, fw_p1, greedy_schedule, policy_gains, utility, utility_grad,
        )
        BACKEND = "python"
