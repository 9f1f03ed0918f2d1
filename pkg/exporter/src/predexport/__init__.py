"""Adapter from saved prediction arrays to calibdis dump files."""

from predexport.export import ExportError, ExportManifest, export

__version__ = "0.1.0"

__all__ = ["ExportError", "ExportManifest", "export", "__version__"]
