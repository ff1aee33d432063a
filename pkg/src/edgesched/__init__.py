# ABOUTME: edgesched package for single-base-station MEC task scheduling
# ABOUTME: Exports version info

__version__ = "0.1.0"
__all__ = ["__version__"]
