from .config import Config as Config  # Expliziter Re-Export

__all__ = ["Config"]
