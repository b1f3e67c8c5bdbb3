"""System configuration and channel statistics."""
