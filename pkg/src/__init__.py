"""Application package root."""

