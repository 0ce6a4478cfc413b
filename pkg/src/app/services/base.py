from typing import TypeVar

from sqlalchemy.orm import Session

from app.db.schema import Base

RowT = TypeVar("RowT", bound=Base)


class BaseService:
    """Services that read or write the run store share one session."""

    def __init__(self, session: Session) -> None:
        self.session = session

    def save(self, row: RowT) -> RowT:
        self.session.add(row)
        self.session.commit()
        self.session.refresh(row)
        return row
