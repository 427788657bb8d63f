import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Generator, List, Optional, Union

from loguru import logger


def ensure_dir(path: Union[str, Path]) -> Path:
    """
    Legt ein Verzeichnis inklusive Elternverzeichnissen an, falls es fehlt.

    Args:
        path (str | Path): Zielverzeichnis.

    Returns:
        Path: Das Verzeichnis als Path.
    """
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


@contextmanager
def log_exceptions(msg: str, continue_on_error: bool = True) -> Generator[None, None, None]:
    """
    Context-Manager für das Logging von Ausnahmen.
    Loggt eine Fehlermeldung und entscheidet, ob die Exception weitergereicht wird.

    Args:
        msg (str): Nachricht für das Logging im Fehlerfall.
        continue_on_error (bool): Bei False wird die Exception erneut ausgelöst, ansonsten nur geloggt.

    Beispiel:
        with log_exceptions("Checkpoint konnte nicht geschrieben werden"):
            save_checkpoint(...)
    """
    try:
        yield
    except Exception as e:
        logger.error(f"{msg}: {e}")
        if not continue_on_error:
            raise


@contextmanager
def stage_timer(timings: Dict[str, float], stage: str) -> Generator[None, None, None]:
    """
    Misst die Wanduhrzeit eines Blocks und addiert sie unter stage in timings (Sekunden).

    Beispiel:
        timings = {}
        with stage_timer(timings, "encode"):
            msf = model.extract(cloud)
    """
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        timings[stage] = timings.get(stage, 0.0) + elapsed
        logger.debug(f"Stufe '{stage}': {elapsed:.3f} s")


def parse_scales(value: Optional[str]) -> Optional[List[int]]:
    """
    Liest eine Skalenliste wie "1,4,16" oder "1 4 16".

    Raises:
        ValueError: Bei nicht-ganzzahligen Einträgen.
    """
    if value is None or not value.strip():
        return None
    tokens = value.replace(",", " ").split()
    try:
        return [int(t) for t in tokens]
    except ValueError:
        logger.error(f"Ungültige Skalenliste: {value}")
        raise ValueError(f"Ungültige Skalenliste: {value!r} (erwartet z.B. '1,4,16')") from None
