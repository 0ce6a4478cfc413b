from dotenv import load_dotenv
from pydantic_settings import BaseSettings

load_dotenv()


class Settings(BaseSettings):
    app_name: str = "Functional CLT Lab"
    app_version: str = "0.1.0"
    debug: bool = False
    log_level: str = "INFO"
    # SQLite by default; other SQLAlchemy URLs need their driver installed (psycopg2 for PostgreSQL)
    database_url: str = "sqlite:///./functional_clt.db"
    # Where experiments triggered through the API write samples/report/manifest
    output_dir: str = "./runs"
    # 0 = one worker per CPU
    functional_clt_threads: int = 0
    default_tol: float = 1e-12

    @property
    def sqlalchemy_database_uri(self) -> str:
        """Used by Alembic; same as database_url."""
        return self.database_url


settings = Settings()
