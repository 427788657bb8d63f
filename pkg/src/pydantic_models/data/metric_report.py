from typing import Dict, Optional

from pydantic import BaseModel, Field


class MetricReport(BaseModel):
    """
    Ergebnis eines Mesh-Vergleichs.

    Attribute:
        chamfer_l2_x100 (Optional[float]): Chamfer-L2 (Mittel der quadrierten Abstände beider Richtungen) × 100.
        normal_consistency (Optional[float]): Mittlerer Betrag des Kosinus zwischen zugeordneten Normalen.
        num_samples (int): Abtastpunkte pro Mesh.
        timings (Dict[str, float]): Optionale Laufzeiten pro Stufe in Sekunden.
        failure (Optional[str]): Grund, falls keine Metrik berechnet werden konnte (z.B. leeres Mesh).
    """

    chamfer_l2_x100: Optional[float] = Field(default=None, ge=0.0)
    normal_consistency: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    num_samples: int = 0
    timings: Dict[str, float] = Field(default_factory=dict)
    failure: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure is None
