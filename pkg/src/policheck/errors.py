"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class PolicheckError(Exception):
    """Base class for all errors raised by this package."""


# --- model card ---------------------------------------------------------


class MalformedDocument(PolicheckError):
    """Input text does not follow the canonical card syntax."""


class UnknownSection(PolicheckError):
    """Section name is not one of the 23 defined sections."""


class MissingSection(PolicheckError):
    """A required section is absent from the card."""


# --- policy ingestion ----------------------------------------------------


class EmptyDocument(PolicheckError):
    """Source document contains no extractable text."""


class ExtractionFailed(PolicheckError):
    """Provider output stayed unparseable after all retries."""


class CorruptPackage(PolicheckError):
    """Stored package fails its integrity check."""


class SchemaVersionMismatch(PolicheckError):
    """Package was written by an incompatible schema version."""


# --- provider gateway ----------------------------------------------------


class ProviderError(PolicheckError):
    """Base class for provider-side failures."""


class Timeout(ProviderError):
    """Provider did not answer in time (retryable)."""


class RateLimited(ProviderError):
    """Provider asked us to slow down (retryable)."""


class MalformedResponse(ProviderError):
    """Provider answered, but the payload does not match the expected format."""


# --- metrics -------------------------------------------------------------


class DegenerateInput(PolicheckError):
    """Statistic is undefined for this input (e.g. constant vector)."""


class LengthMismatch(PolicheckError):
    """Paired vectors have different lengths."""


class EmptyItem(PolicheckError):
    """An item has no ratings at all."""


# --- reporting / service -------------------------------------------------


class UnknownPolicy(PolicheckError):
    """Referenced policy id is not part of the run."""
