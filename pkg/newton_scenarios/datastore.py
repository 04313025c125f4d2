# -*- coding: utf-8 -*-

"""
Run ledger models: artifacts written by the app and the runs that made them
"""
from datetime import datetime
import os
from contextlib import contextmanager

from sqlalchemy import (
    Column,
    DateTime,
    Float,
    ForeignKey,
    Integer,
    String,
    create_engine,
)
from sqlalchemy.ext.declarative import declarative_base
from sqlalchemy.orm import relationship, sessionmaker


Base = declarative_base()


class DataAccessLayer:
    def __init__(self):
        """
        Provides connection to the datastore.
        """
        self.conn = None
        self.engine = None
        self.Session = None

    def connect(self):
        conn = self.conn or f"sqlite:///{os.getenv('newton_store')}"
        if self.engine is None or str(self.engine.url) != conn:
            self.engine = create_engine(conn)
            Base.metadata.create_all(self.engine)
            self.Session = sessionmaker(bind=self.engine)


dal = DataAccessLayer()


@contextmanager
def session_scope():
    dal.connect()
    session = dal.Session()
    try:
        yield session
        session.commit()
    except:  # noqa: E722
        session.rollback()
        raise
    finally:
        session.close()


class Artifact(Base):
    __tablename__ = "artifact"
    wid = Column(Integer, primary_key=True)
    timestamp = Column(DateTime, nullable=False, default=datetime.now)
    path = Column(String, nullable=False)
    kind = Column(String(8), nullable=False)
    digest = Column(String(64), nullable=False, unique=True)
    size = Column(Integer, nullable=False)

    runs = relationship("Run", back_populates="artifact")

    def __repr__(self):
        return (
            f"<Artifact(wid='{self.wid}', timestamp='{self.timestamp}', "
            f"path='{self.path}', kind='{self.kind}', "
            f"digest='{self.digest}', size='{self.size}')>"
        )


class Run(Base):
    __tablename__ = "run"
    wid = Column(Integer, primary_key=True)
    timestamp = Column(DateTime, nullable=False, default=datetime.now)
    command = Column(String(16), nullable=False)
    arguments = Column(String)
    outcome = Column(Float)
    input_digest = Column(String(64))
    artifact_wid = Column(Integer, ForeignKey("artifact.wid"))

    artifact = relationship("Artifact", back_populates="runs")

    def __repr__(self):
        return (
            f"<Run(wid='{self.wid}', timestamp='{self.timestamp}', "
            f"command='{self.command}', arguments='{self.arguments}', "
            f"outcome='{self.outcome}', input_digest='{self.input_digest}', "
            f"artifact_wid='{self.artifact_wid}')>"
        )
