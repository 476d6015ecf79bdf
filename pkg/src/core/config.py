from pydantic_settings import BaseSettings

APP_NAME = "ordstat-compare"
APP_VERSION = "0.1.0"


class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"
    DEFAULT_WORKERS: int = 1
    CHUNK_SIZE: int = 16384
    CONDITION_TOLERANCE: float = 1e-12
    LARGE_U_GATE: float = 2.0
    ANTITHETIC: bool = True
    GRID_EXPONENT: int = 10
    CIRCULANT_TOLERANCE: float = 1e-8

    class Config:
        env_file = ".env"
        env_prefix = "ORDSTAT_"


app_settings = Settings()
