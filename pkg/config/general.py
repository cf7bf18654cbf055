from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    log_level: str = "INFO"
    workers: int = 1
    output_dir: str = "runs"
    progress: bool = False

    class Config:
        env_file = ".env"
        extra = "allow"


settings = Settings()
