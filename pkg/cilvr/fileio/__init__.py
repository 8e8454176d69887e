"""
Serialization of results, tables, run manifests and term-structure input.
"""

from .base import FileFormatError, FileFormatWarning, Header, atomic_write, file_sha256, save_json
from .manifest import (MANIFEST_NAME, InputFile, RunManifest, Software, current_software, dependency_versions,
                       load_manifest, save_manifest)
from .tables import Column, Table, load_table, load_term_structure, save_table

__all__ = [s for s in dir() if not s.startswith("_")]
