"""Exception hierarchy shared by every raisf module."""

from __future__ import annotations


class RaIsfError(Exception):
    """Base class for all library errors."""


class EmptyQuestion(RaIsfError, ValueError):
    pass


class ConfigError(RaIsfError, ValueError):
    pass


class InvalidParams(RaIsfError, ValueError):
    pass


# -- backends ---------------------------------------------------------------


class BackendError(RaIsfError):
    """A model call could not produce usable text."""


class BackendUnavailable(BackendError):
    """Transport failure, exhausted retries, or a terminal HTTP status."""


class BackendRefusal(BackendError):
    """The model returned an empty completion."""


class MissingTemplateInput(RaIsfError, ValueError):
    pass


# -- parsers ----------------------------------------------------------------


class ParseError(RaIsfError, ValueError):
    """Raised by the sub-model output parsers. Never fatal inside the engine."""


class UnparsableVerdict(ParseError):
    pass


class UnparsableRelevance(ParseError):
    pass


class EmptyDecomposition(ParseError):
    pass


# -- retrieval --------------------------------------------------------------


class RetrievalError(RaIsfError, ValueError):
    pass


class EmptyDocument(RetrievalError):
    pass


class EmptyCorpus(RetrievalError):
    pass


class EmptyQuery(RetrievalError):
    pass
