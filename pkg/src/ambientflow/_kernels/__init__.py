"""Kernel backend selection.

The compiled Cython core is preferred when it is importable; setting
AMBIENTFLOW_PURE=1 forces the numpy fallback. Both expose the same
functions and constants; ``BACKEND`` names the active one.
"""

import os

from . import py_backend

FIELD_ZERO = py_backend.FIELD_ZERO
FIELD_CONSTANT = py_backend.FIELD_CONSTANT
FIELD_KILLING = py_backend.FIELD_KILLING
FIELD_SADDLE = py_backend.FIELD_SADDLE
FIELD_RADIAL_POWER = py_backend.FIELD_RADIAL_POWER
FIELD_RADIAL_LINEAR = py_backend.FIELD_RADIAL_LINEAR

STOP_STEPS = py_backend.STOP_STEPS
STOP_MAX_TIME = py_backend.STOP_MAX_TIME
STOP_AREA_FLOOR = py_backend.STOP_AREA_FLOOR

if os.environ.get("AMBIENTFLOW_PURE"):
    impl = py_backend
else:
    try:
        from . import _core as impl  # type: ignore[no-redef]
    except ImportError:
        impl = py_backend

BACKEND = "compiled" if getattr(impl, "COMPILED", False) else "python"

curve_metrics = impl.curve_metrics
field_values = impl.field_values
resample_closed = impl.resample_closed
redistribute_closed = impl.redistribute_closed
normal_speed_arrays = impl.normal_speed_arrays
advance = impl.advance
