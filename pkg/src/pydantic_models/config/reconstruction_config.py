from pydantic import BaseModel, Field, model_validator


class ReconstructionConfig(BaseModel):
    """
    Parameter der Oberflächenextraktion.

    Attribute:
        resolution (int): Voxel pro Achse (z.B. 64/128/256).
        box_filter_size (int): Kantenlänge ε des Boxfilters in Voxeln (ungerade, >= 3).
        update_threshold (int): Schwellwert t_update für die Vorzeichenübernahme (< ε³).
        near_surface_radius (int): Chebyshev-Radius r der Dilatation um belegte Voxel.
        fill_magnitude_voxels (float): Betrag τ gefüllter Voxel in Voxelbreiten.
        evaluation_batch_size (int): Anzahl Voxel pro Netzauswertung.
        normalization_margin (float): Randabstand beim Normieren auf den Einheitswürfel.
    """

    resolution: int = Field(default=128, ge=2)
    box_filter_size: int = Field(default=5, ge=3)
    update_threshold: int = Field(default=13, ge=0)
    near_surface_radius: int = Field(default=3, ge=0)
    fill_magnitude_voxels: float = Field(default=2.0, gt=0.0)
    evaluation_batch_size: int = Field(default=16384, ge=1)
    normalization_margin: float = Field(default=0.05, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def check_filter(self) -> "ReconstructionConfig":
        if self.box_filter_size % 2 == 0:
            raise ValueError(f"box_filter_size muss ungerade sein, erhalten: {self.box_filter_size}")
        if self.update_threshold >= self.box_filter_size**3:
            raise ValueError(
                f"update_threshold ({self.update_threshold}) muss kleiner als ε³ ({self.box_filter_size**3}) sein."
            )
        return self

    @property
    def fill_magnitude(self) -> float:
        """τ in normierten Koordinaten (Voxelbreite = 2/R)."""
        return self.fill_magnitude_voxels * 2.0 / self.resolution
