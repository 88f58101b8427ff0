"""Multiparty session types with fair termination: coherence, fair subtyping, typing, simulation."""

from __future__ import annotations

__version__ = "0.1.0"
