from typing import Optional

from pydantic import BaseModel


class LoggingConfig(BaseModel):
    log_file: Optional[str] = "surfr.log"  # relativ zu structure.log_path, None = nur stderr
    log_level: Optional[str] = "INFO"  # Defaultwert
