# -*- coding: utf-8 -*-

"""
Application exceptions
"""


class NewtonError(Exception):
    """
    Base class for exceptions in this package
    """

    exit_code = 1


class ParameterError(NewtonError):
    exit_code = 2


class CatalogError(NewtonError):
    exit_code = 3


class BankError(NewtonError):
    exit_code = 3


class LabelError(NewtonError):
    exit_code = 3


class StorageError(NewtonError):
    exit_code = 3


class IngestionError(NewtonError):
    exit_code = 3


class ProjectionError(NewtonError):
    exit_code = 4


class FlowUndefinedError(NewtonError):
    """
    Raised when flow is requested for a state without motion; callers
    treat the state as static
    """

    exit_code = 4


class MetricError(NewtonError):
    exit_code = 4


class TrainingError(NewtonError):
    exit_code = 4
