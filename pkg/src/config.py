from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    MODE: Literal["DEV", "TEST", "PROD"] = "DEV"
    LOG_LEVEL: str = "INFO"

    STIV_THREADS: int = Field(1, ge=1)
    STIV_DTYPE: Literal["float32", "float64"] = "float32"
    STIV_CHECK_FINITE: bool = True

    @property
    def PROGRESS_BARS(self) -> bool:
        return self.MODE != "TEST"

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")


settings: Settings = Settings()
