# -*- coding: utf-8 -*-

"""
This module provides methods to add and retrieve records of the run ledger
"""
import logging
import os
from typing import List, Optional

from newton_scenarios.datastore import Artifact, Run
from newton_scenarios.worker_store import file_digest


mlogger = logging.getLogger("newton-scenarios")


def insert_or_ignore(session, model, **kwargs):
    """
    Adds record to a table (model) or ignores if already exsits based
    on 'wid' or, for artifacts, on their digest

    Args:
        session:                db session
        model:                  datastore module table
        kwargs:                 record arguments
    """
    if "wid" in kwargs:
        instance = session.query(model).filter_by(wid=kwargs["wid"]).first()
    elif "digest" in kwargs:
        instance = session.query(model).filter_by(digest=kwargs["digest"]).first()
    else:
        instance = session.query(model).filter_by(**kwargs).first()

    if not instance:
        instance = model(**kwargs)
        session.add(instance)
    return instance


def record_artifact(session, path: str, kind: str) -> Artifact:
    """
    Registers a written file in the ledger

    Args:
        session:                db session
        path:                   artifact file
        kind:                   bank, params, queries, report, loss, svg or csv

    Returns:
        Artifact
    """
    artifact = insert_or_ignore(
        session,
        Artifact,
        path=os.path.abspath(path),
        kind=kind,
        digest=file_digest(path),
        size=os.path.getsize(path),
    )
    session.flush()
    return artifact


def record_run(
    session,
    command: str,
    arguments: str,
    outcome: Optional[float] = None,
    input_path: Optional[str] = None,
    artifact: Optional[Artifact] = None,
) -> Run:
    run = Run(
        command=command,
        arguments=arguments,
        outcome=outcome,
        input_digest=file_digest(input_path) if input_path else None,
        artifact_wid=artifact.wid if artifact is not None else None,
    )
    session.add(run)
    session.flush()
    mlogger.debug(f"Recorded run {run}.")
    return run


def runs_for_digest(session, digest: str) -> List[Run]:
    """
    Runs that produced or consumed the artifact with the given digest
    """
    produced = (
        session.query(Run)
        .join(Artifact, Run.artifact_wid == Artifact.wid)
        .filter(Artifact.digest == digest)
    )
    consumed = session.query(Run).filter(Run.input_digest == digest)
    runs = {run.wid: run for run in produced}
    runs.update((run.wid, run) for run in consumed)
    return [runs[wid] for wid in sorted(runs)]
