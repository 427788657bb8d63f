from pydantic import BaseModel, Field


class LossConfig(BaseModel):
    """Gewichte der Verlustterme (Betrag, Vorzeichen, L1-Regularisierung des Heads)."""

    lambda_mag: float = Field(default=5.0, ge=0.0)
    lambda_sgn: float = Field(default=2.0, ge=0.0)
    lambda_reg: float = Field(default=1e-6, ge=0.0)
