"""Ports (protocols) for core services."""
