from __future__ import annotations

from typing import overload

import numpy as np
import numpy.typing as npt


FloatArray = npt.NDArray[np.float64]


@overload
def db_to_linear(value_db: float) -> float: ...
@overload
def db_to_linear(value_db: FloatArray) -> FloatArray: ...
def db_to_linear(value_db: float | FloatArray) -> float | FloatArray:
    """Convert dB (or dBm) to linear (or mW)."""
    out = np.power(10.0, np.asarray(value_db, dtype=np.float64) / 10.0)
    return float(out) if np.ndim(out) == 0 else out


@overload
def linear_to_db(value: float) -> float: ...
@overload
def linear_to_db(value: FloatArray) -> FloatArray: ...
def linear_to_db(value: float | FloatArray) -> float | FloatArray:
    """Convert linear to dB; zero maps to -inf without a warning."""
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(np.asarray(value, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def dbm_to_mw(power_dbm: float) -> float:
    return float(db_to_linear(power_dbm))
