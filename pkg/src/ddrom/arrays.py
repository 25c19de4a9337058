from __future__ import annotations

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationInfo, field_validator


def readonly(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.float64, copy=True)
    array.flags.writeable = False
    return array


class ArrayModel(BaseModel):
    """Frozen pydantic model whose numpy fields are float64 read-only copies."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("*", mode="before")
    @classmethod
    def _coerce_arrays(cls, value: Any, info: ValidationInfo) -> Any:
        field = cls.model_fields.get(info.field_name)
        if field is not None and field.annotation is np.ndarray and not isinstance(value, np.ndarray):
            return np.asarray(value, dtype=np.float64)
        return value

    @field_validator("*", mode="after")
    @classmethod
    def _freeze_arrays(cls, value: Any) -> Any:
        if isinstance(value, np.ndarray):
            return readonly(value)
        if isinstance(value, (list, tuple)) and value and all(
            isinstance(v, np.ndarray) for v in value
        ):
            return tuple(readonly(v) for v in value)
        return value

    def replace(self, **update: Any) -> "ArrayModel":
        """Validated copy with some fields replaced."""
        return type(self)(**{**dict(self), **update})
