from __future__ import annotations

from pathlib import Path

from pydantic import model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).resolve().parents[2]


def _resolve_path(value: str, fallback: str) -> str:
    raw = (value or "").strip() or fallback
    path = Path(raw)
    if not path.is_absolute():
        path = (PROJECT_ROOT / path).resolve()
    return str(path)


class LabSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="VORTEXLAB_",
        env_file=PROJECT_ROOT / ".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_DIR: str = "logs"
    LOG_FILE_PATH: str = ""
    LOG_MAX_BYTES: int = 10 * 1024 * 1024
    LOG_BACKUP_COUNT: int = 5

    # Execution
    THREADS: int = 1
    OUTPUT_ROOT: str = "runs"

    # Exact enumeration
    ENUMERATION_MAX_STATES: int = 2**26
    ENUMERATION_CHUNK_SIZE: int = 2**16

    # Sampling schedule defaults
    DEFAULT_BURN_IN: int = 1000
    DEFAULT_THINNING: int = 10
    MIN_BATCHES: int = 16
    TV_MIN_SAMPLES: int = 1000
    BOOTSTRAP_RESAMPLES: int = 200

    # Support analysis
    SEPARATION_MAX_GROWTH: int = 3
    VORTEX_ENUMERATION_MAX_PAIRS: int = 8

    # Random currents
    CURRENT_TAIL_TOLERANCE: float = 1e-14

    @model_validator(mode="after")
    def normalize_and_validate(self) -> "LabSettings":
        self.LOG_LEVEL = (self.LOG_LEVEL or "INFO").upper()
        self.LOG_DIR = _resolve_path(self.LOG_DIR, "logs")
        self.LOG_FILE_PATH = _resolve_path(self.LOG_FILE_PATH, str(Path(self.LOG_DIR) / "vortexlab.log"))
        self.OUTPUT_ROOT = _resolve_path(self.OUTPUT_ROOT, "runs")

        if self.THREADS < 1:
            raise RuntimeError("THREADS must be a positive integer.")
        if self.ENUMERATION_MAX_STATES < 1 or self.ENUMERATION_CHUNK_SIZE < 1:
            raise RuntimeError("ENUMERATION_MAX_STATES and ENUMERATION_CHUNK_SIZE must be positive.")
        if self.MIN_BATCHES < 16:
            raise RuntimeError("MIN_BATCHES must be at least 16.")
        if not 0.0 < self.CURRENT_TAIL_TOLERANCE < 1.0:
            raise RuntimeError("CURRENT_TAIL_TOLERANCE must lie in (0, 1).")
        return self


settings = LabSettings()
