"""
Process-wide settings read from the environment (prefix DANO_) and an optional .env file
"""
from functools import lru_cache
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Environment-driven defaults; CLI flags take precedence over these."""

    model_config = SettingsConfigDict(env_prefix="DANO_", env_file=".env", extra="ignore")

    max_qubits: int = 24
    oracle_max_qubits: int = 10
    log_level: str = "INFO"
    json_logs: bool = False
    log_file: Optional[str] = None
    output_root: str = "runs"
    default_threads: int = 1
    # Off makes metrics CSVs byte-identical between repeated runs
    record_wall_time: bool = True


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
