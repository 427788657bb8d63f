from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class CellIndex(BaseModel):
    """
    Index einer Gitterzelle auf einer Skala; jede Komponente liegt in {0, …, scale-1}.
    """

    model_config = ConfigDict(frozen=True)

    scale: int = Field(ge=1)
    ijk: Tuple[int, int, int]

    @model_validator(mode="after")
    def check_range(self) -> "CellIndex":
        if any(c < 0 or c >= self.scale for c in self.ijk):
            raise ValueError(f"Zellindex {self.ijk} ausserhalb von [0, {self.scale - 1}].")
        return self

    @property
    def flat(self) -> int:
        """Linearer Index i·s² + j·s + k."""
        i, j, k = self.ijk
        return (i * self.scale + j) * self.scale + k
