"""Failure types raised by the fine-tuning driver."""


class CorpusSchemaError(Exception):
    """A corpus file or its manifest does not match the expected layout."""


class ModelLoadError(Exception):
    """A base model id or adapter checkpoint cannot be loaded."""


class NonFiniteLoss(Exception):
    """Training produced a NaN or infinite loss and was aborted."""
