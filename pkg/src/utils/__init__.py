"""Utility helpers for config, logging, etc."""

