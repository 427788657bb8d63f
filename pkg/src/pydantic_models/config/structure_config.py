from typing import Optional

from pydantic import BaseModel


class StructureConfig(BaseModel):
    """
    Modell für die Verzeichnisstruktur des Projekts.

    Attribute:
        prj_root (str): Wurzelverzeichnis, relativ zum Arbeitsverzeichnis oder absolut.
        output_path (Optional[str]): Ausgabeverzeichnis für Meshes, Reports und Tabellen (Standard: "output").
        checkpoint_path (Optional[str]): Verzeichnis für Checkpoints (Standard: "output/checkpoints").
        tmp_path (Optional[str]): Temporäres Verzeichnis, u.a. für Diagnose-Dumps (Standard: ".tmp").
        log_path (Optional[str]): Log-Verzeichnis relativ zu prj_root (Standard: ".logs").
    """

    prj_root: str = "."
    output_path: Optional[str] = "output"
    checkpoint_path: Optional[str] = "output/checkpoints"
    tmp_path: Optional[str] = ".tmp"
    log_path: Optional[str] = ".logs"
