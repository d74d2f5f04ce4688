"""Shared models, file helpers, configuration and logging."""
