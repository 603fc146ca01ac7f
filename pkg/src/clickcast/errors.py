"""Exception types shared across the package.

The CLI maps these onto exit codes: bad input data or configuration is a
different failure class than an unreadable file, and both differ from a
usage mistake on the command line.
"""

from __future__ import annotations


class DataError(ValueError):
    """Invalid data content: bad records, bad values, bad fixtures."""


class ParseError(DataError):
    """A line or file did not match its declared format."""


class ConfigError(DataError):
    """A pipeline configuration is malformed or references the impossible."""
