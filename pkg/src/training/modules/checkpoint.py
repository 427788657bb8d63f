"""
Checkpoint-Container: Magic, Formatversion, JSON-Manifest (Namen, Formen, Byte-Offsets, Modellkonfiguration,
Konfigurations-Hash, Epoche, Optimiererzustand), gefolgt von little-endian float64-Puffern.
"""

import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from network.modules.surfr_model import SurfRModel
from pydantic_models.config.model_config import ModelConfig

from .optimizer import OptimizerState

MAGIC = b"SURFRCK\x00"
FORMAT_VERSION = 1
# Magic, Version (uint32), Manifestlänge (uint64)
_HEADER = struct.Struct("<8sIQ")


class CheckpointError(ValueError):
    """Checkpoint ist nicht lesbar oder unvollständig."""


class ConfigMismatchError(CheckpointError):
    """Die Modellkonfiguration passt nicht zum Checkpoint."""


class TensorEntry(BaseModel):
    name: str
    kind: str
    shape: List[int]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1


class CheckpointManifest(BaseModel):
    format_version: int = FORMAT_VERSION
    epoch: int = 0
    config_hash: str
    network_config: Dict[str, Any]
    optimizer_step: int = 0
    optimizer_lr: float = 0.0
    tensors: List[TensorEntry] = Field(default_factory=list)
    extra: Dict[str, Any] = Field(default_factory=dict)

    def model_settings(self) -> ModelConfig:
        return ModelConfig.model_validate(self.network_config)


def _collect(model: SurfRModel, optimizer: Optional[OptimizerState]) -> List[Tuple[str, str, np.ndarray]]:
    arrays: List[Tuple[str, str, np.ndarray]] = []
    arrays += [(name, "parameter", p.data) for name, p in model.named_parameters()]
    arrays += [(name, "buffer", b) for name, b in model.named_buffers()]
    if optimizer is not None:
        arrays += [(name, "adam_m", m) for name, m in optimizer.m.items()]
        arrays += [(name, "adam_v", v) for name, v in optimizer.v.items()]
    return arrays


def save_checkpoint(
    path: Path,
    model: SurfRModel,
    epoch: int = 0,
    optimizer: Optional[OptimizerState] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Schreibt Parameter, BatchNorm-Puffer und optional den Adam-Zustand.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = _collect(model, optimizer)
    entries: List[TensorEntry] = []
    offset = 0
    for name, kind, arr in arrays:
        entries.append(TensorEntry(name=name, kind=kind, shape=list(arr.shape), offset=offset))
        offset += arr.size * 8
    manifest = CheckpointManifest(
        epoch=epoch,
        config_hash=model.config.config_hash(),
        network_config=model.config.model_dump(mode="json"),
        optimizer_step=optimizer.step if optimizer is not None else 0,
        optimizer_lr=optimizer.lr if optimizer is not None else 0.0,
        tensors=entries,
        extra=extra or {},
    )
    payload = manifest.model_dump_json().encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(payload)))
        handle.write(payload)
        for _, _, arr in arrays:
            handle.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    logger.info(f"Checkpoint (Epoche {epoch}, {len(entries)} Arrays) nach {path} geschrieben.")
    return path


def _read(path: Path) -> Tuple[CheckpointManifest, bytes]:
    path = Path(path)
    if not path.exists():
        logger.error(f"Checkpoint nicht gefunden: {path}")
        raise FileNotFoundError(f"Checkpoint nicht gefunden: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"{path} ist zu kurz für einen Checkpoint.")
    magic, version, length = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        logger.error(f"{path} ist kein SurfR-Checkpoint.")
        raise CheckpointError(f"{path} ist kein SurfR-Checkpoint (Magic {magic!r}).")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"Checkpoint-Version {version} wird nicht unterstützt (erwartet {FORMAT_VERSION}).")
    start = _HEADER.size
    try:
        manifest = CheckpointManifest.model_validate_json(raw[start : start + length])
    except ValidationError as e:
        logger.error(f"Ungültiges Checkpoint-Manifest in {path}: {e}")
        raise CheckpointError(f"Ungültiges Checkpoint-Manifest in {path}") from e
    return manifest, raw[start + length :]


def read_manifest(path: Path) -> CheckpointManifest:
    manifest, _ = _read(path)
    return manifest


def load_checkpoint(
    path: Path, config: Optional[ModelConfig] = None
) -> Tuple[SurfRModel, CheckpointManifest, OptimizerState]:
    """
    Stellt Modell (Parameter und Puffer) und Adam-Zustand wieder her.

    Args:
        path (Path): Checkpoint-Datei.
        config (ModelConfig, optional): Erwartete Modellkonfiguration; ohne Angabe gilt die gespeicherte.

    Raises:
        ConfigMismatchError: Wenn config nicht zur gespeicherten Konfiguration passt.
        CheckpointError: Bei unvollständigen oder fehlerhaften Daten.
    """
    manifest, data = _read(path)
    if config is not None and config.config_hash() != manifest.config_hash:
        logger.error(f"Modellkonfiguration passt nicht zum Checkpoint {path}.")
        raise ConfigMismatchError(
            f"Modellkonfiguration (Hash {config.config_hash()[:12]}) passt nicht zum Checkpoint "
            f"(Hash {manifest.config_hash[:12]})."
        )
    model = SurfRModel(manifest.model_settings())
    params = dict(model.named_parameters())
    buffers = dict(model.named_buffers())
    optimizer = OptimizerState(step=manifest.optimizer_step, lr=manifest.optimizer_lr)
    seen = set()
    for entry in manifest.tensors:
        end = entry.offset + entry.size * 8
        if end > len(data):
            raise CheckpointError(f"Checkpoint {path} ist abgeschnitten ({entry.name}).")
        arr = np.frombuffer(data, dtype="<f8", count=entry.size, offset=entry.offset).reshape(entry.shape)
        arr = arr.astype(np.float64)
        if entry.kind == "parameter" and entry.name in params:
            target = params[entry.name].data
        elif entry.kind == "buffer" and entry.name in buffers:
            target = buffers[entry.name]
        elif entry.kind == "adam_m":
            optimizer.m[entry.name] = arr
            continue
        elif entry.kind == "adam_v":
            optimizer.v[entry.name] = arr
            continue
        else:
            raise CheckpointError(f"Unbekannter Eintrag im Checkpoint: {entry.kind} {entry.name}")
        if target.shape != arr.shape:
            raise CheckpointError(f"{entry.name}: inkompatible Formen {target.shape} und {arr.shape}")
        target[...] = arr
        seen.add((entry.kind, entry.name))
    missing = [n for n in params if ("parameter", n) not in seen] + [n for n in buffers if ("buffer", n) not in seen]
    if missing:
        raise CheckpointError(f"Checkpoint {path} unvollständig, fehlend: {', '.join(missing[:5])}")
    logger.info(f"Checkpoint {path} geladen (Epoche {manifest.epoch}).")
    return model, manifest, optimizer
