"""
Application configuration using Pydantic Settings.
Process-level knobs are loaded and validated here; experiment parameters
live in app.schemas.run_config.RunConfig.
"""

import logging
from functools import lru_cache
from typing import Literal, Optional

from pydantic import model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Settings(BaseSettings):
    """Process settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Environment
    ENVIRONMENT: Literal["dev", "prod"] = "dev"

    # Logging (empty = derived from ENVIRONMENT)
    LOG_LEVEL: Optional[str] = None

    # Thread count for candidate scoring and sensor rendering.
    # Results are merged in index order, so outputs never depend on it.
    NBV_WORKERS: int = 1

    # NaN/Inf guard after every network op (slow, debug only)
    NBV_DEBUG_FINITE_CHECKS: bool = False

    # Default output directory for CLI commands
    NBV_OUTPUT_DIR: str = "runs"

    # Seed used when neither the config file nor --seed provides one
    NBV_DEFAULT_SEED: int = 7

    @model_validator(mode="after")
    def normalize_log_level(self) -> "Settings":
        raw = (self.LOG_LEVEL or "").strip().upper()
        if not raw:
            raw = "INFO" if self.ENVIRONMENT == "dev" else "WARNING"
        if raw not in VALID_LOG_LEVELS:
            logger.warning("Unknown LOG_LEVEL %r, falling back to INFO", self.LOG_LEVEL)
            raw = "INFO"
        self.LOG_LEVEL = raw
        return self

    @model_validator(mode="after")
    def clamp_workers(self) -> "Settings":
        if self.NBV_WORKERS < 1:
            self.NBV_WORKERS = 1
        return self


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


settings = get_settings()
