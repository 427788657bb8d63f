import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Type

import yaml
from dotenv import dotenv_values
from loguru import logger
from pydantic import BaseModel

from pydantic_models.config.config_data import ConfigData
from pydantic_models.config.evaluation_config import EvaluationConfig
from pydantic_models.config.logging_config import LoggingConfig
from pydantic_models.config.loss_config import LossConfig
from pydantic_models.config.model_config import ModelConfig
from pydantic_models.config.reconstruction_config import ReconstructionConfig
from pydantic_models.config.structure_config import StructureConfig
from pydantic_models.config.training_config import TrainingConfig

# Default-Pfad zur Konfigurationsdatei
DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent / ".config" / "surfr_config.yaml"

THREADS_ENV = "SURFR_THREADS"


class Config:
    """
    Singleton für das Laden und Prüfen der Konfiguration.
    Jede Sektion wird mit ihrem statischen Pydantic-Modell geparst; fehlende Sektionen
    übernehmen die Defaults. Ein zweiter Aufruf mit einem anderen Pfad lädt neu.
    """

    _instance: Optional["Config"] = None

    def __new__(cls, config_path: Optional[Path] = None):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self, config_path: Optional[Path] = None):
        path = Path(config_path) if config_path is not None else DEFAULT_CONFIG_PATH
        # Singleton: Nur einmal pro Datei initialisieren
        if getattr(self, "_initialized", False) and self.config_path == path:
            return
        # Fallback-Logger für Fehler beim Laden der Config
        logger.remove()
        logger.add(sys.stderr, level="WARNING")
        self.config_path = path
        try:
            self.raw_config: Dict[str, Any] = self._load_config()
            self.logging = self._parse_section(self.raw_config, "logging", LoggingConfig)
            self.structure = self._parse_section(self.raw_config, "structure", StructureConfig)
            self._setup_logging()
            logger.debug(f"Lade Konfiguration von {self.config_path}")
            self.model = self._parse_section(self.raw_config, "model", ModelConfig)
            self.loss = self._parse_section(self.raw_config, "loss", LossConfig)
            self.training = self._parse_section(self.raw_config, "training", TrainingConfig)
            self.reconstruction = self._parse_section(self.raw_config, "reconstruction", ReconstructionConfig)
            self.evaluation = self._parse_section(self.raw_config, "evaluation", EvaluationConfig)
            # sektionsübergreifende Regeln
            self.get_data()
        except Exception as e:
            logger.error(f"Fehler beim Laden der Konfiguration: {e}")
            self._initialized = False
            raise

        self._env_cache: Optional[Dict[str, Optional[str]]] = None
        self._validate_structure_and_paths()
        logger.debug("Konfiguration erfolgreich geladen und validiert.")
        self._initialized = True

    @classmethod
    def reset(cls) -> None:
        """Verwirft die Instanz (für Tests und mehrere CLI-Aufrufe im selben Prozess)."""
        cls._instance = None

    def _setup_logging(self) -> None:
        """
        Initialisiert loguru mit den Einstellungen aus der Config-Datei.
        """
        logger.remove()
        log_file = self.get_log_file()
        log_level = getattr(self.logging, "log_level", None) or "INFO"
        if log_file is not None:
            logger.add(log_file, level=log_level)
        logger.add(sys.stderr, level=log_level)

    def _load_config(self) -> Dict[str, Any]:
        """
        Lädt die YAML-Konfigurationsdatei. Eine leere oder fehlende Default-Datei ergibt die Defaults.

        Raises:
            FileNotFoundError: Wenn die Datei fehlt.
            ValueError: Wenn die Datei kein YAML-Mapping enthält.
        """
        if not self.config_path.exists() and self.config_path == DEFAULT_CONFIG_PATH:
            logger.warning(f"Keine Konfigurationsdatei unter {self.config_path}, verwende Defaults.")
            return {}
        if not self.config_path.exists():
            raise FileNotFoundError(f"Konfigurationsdatei nicht gefunden: {self.config_path}")
        with open(self.config_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ValueError(f"Konfigurationsdatei {self.config_path} enthält kein Mapping.")
        return data

    def _parse_section(self, config: Dict[str, Any], section: str, model: Type[BaseModel]) -> Any:
        """
        Parst einen Abschnitt der Config mit dem passenden Pydantic-Modell.
        """
        data = config.get(section) or {}
        logger.debug(f"Parsiere Abschnitt '{section}': {data}")
        return model(**data)

    def _validate_structure_and_paths(self) -> None:
        """
        Prüft die Projektwurzel und legt Ausgabe-, Checkpoint- und Tmp-Verzeichnis an.
        """
        prj_root = self.get_prj_root()
        if not prj_root.exists():
            logger.error(f"Projektwurzel existiert nicht: {prj_root}")
            raise FileNotFoundError(f"Projektwurzel nicht gefunden: {prj_root}")
        for directory in (self.get_output_path(), self.get_checkpoint_path(), self.get_tmp_path()):
            directory.mkdir(parents=True, exist_ok=True)

    def _get_env_cache(self) -> Dict[str, Optional[str]]:
        """
        Cached Zugriff auf .env (falls vorhanden).
        """
        if self._env_cache is None:
            env_path = self.get_prj_root() / ".env"
            self._env_cache = dict(dotenv_values(env_path)) if env_path.exists() else {}
        return self._env_cache

    def get(self, key: str, default: Any = None) -> Any:
        """
        Allgemeiner Getter für beliebige Felder (dot-notation für verschachtelte Felder).
        """
        val: Any = self.raw_config
        for part in key.split("."):
            if isinstance(val, dict) and part in val:
                val = val[part]
            else:
                logger.debug(f"Feld '{key}' nicht gefunden, Rückgabe Default: {default}")
                return default
        return val

    def get_thread_count(self) -> int:
        """
        Obergrenze für parallele Worker: SURFR_THREADS aus der Umgebung oder .env,
        sonst die Anzahl CPUs.
        """
        raw = os.getenv(THREADS_ENV) or self._get_env_cache().get(THREADS_ENV)
        if raw:
            try:
                value = int(raw)
            except ValueError:
                logger.warning(f"{THREADS_ENV}={raw!r} ist keine Ganzzahl, verwende CPU-Anzahl.")
            else:
                if value >= 1:
                    return value
                logger.warning(f"{THREADS_ENV}={value} ist kleiner als 1, verwende CPU-Anzahl.")
        return os.cpu_count() or 1

    def model_hash(self) -> str:
        """Hash der Modellsektion (wird im Checkpoint abgelegt)."""
        return self.model.config_hash()

    # -------------------------------------------------------------------------
    # Convenience-Methoden für typisierten Zugriff
    # -------------------------------------------------------------------------

    def get_data(self) -> ConfigData:
        """Alle Sektionen gebündelt."""
        return ConfigData(
            structure=self.structure,
            logging=self.logging,
            model=self.model,
            loss=self.loss,
            training=self.training,
            reconstruction=self.reconstruction,
            evaluation=self.evaluation,
        )

    def get_prj_root(self) -> Path:
        return Path(self.structure.prj_root).expanduser().resolve()

    def get_output_path(self) -> Path:
        """Gibt den Output-Pfad zurück."""
        return self.get_prj_root() / (self.structure.output_path or "output")

    def get_checkpoint_path(self) -> Path:
        return self.get_prj_root() / (self.structure.checkpoint_path or "output/checkpoints")

    def get_tmp_path(self) -> Path:
        """Gibt den temporären Pfad zurück."""
        return self.get_prj_root() / (self.structure.tmp_path or ".tmp")

    def get_log_file(self) -> Optional[Path]:
        """
        Pfad der Log-Datei. Relative Namen liegen unter prj_root/log_path, None schaltet die Datei ab.
        """
        if not self.logging.log_file:
            return None
        path = Path(self.logging.log_file).expanduser()
        if path.is_absolute():
            return path
        return self.get_prj_root() / (self.structure.log_path or ".logs") / path
