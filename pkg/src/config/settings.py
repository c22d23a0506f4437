from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=['.env'],
        env_file_encoding='utf-8',
        extra='ignore'
    )

    # Simulator limits
    max_qubits: int = Field(14, validation_alias='QSIM_MAX_QUBITS')
    default_depth: int = Field(12, validation_alias='QSIM_DEFAULT_DEPTH')

    # Campaign runner
    default_workers: int = Field(1, validation_alias='CVPV_WORKERS')
    output_dir: str = Field("runs", validation_alias='CVPV_OUTPUT_DIR')

    # Logging
    log_config_path: str = Field("config/logging-config.json", validation_alias='CVPV_LOG_CONFIG')
    log_level: str = Field("INFO", validation_alias='LOG_LEVEL')

    # Bumped whenever report.json / trials.jsonl change shape
    report_schema_version: int = 1


settings = Settings()
