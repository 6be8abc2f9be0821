"""Statechart toolkit: parsing, well-formedness checking, flattening,
interpretation, and conformance checking for a UML/P-style dialect."""

from __future__ import annotations

__version__ = "0.1.0"
