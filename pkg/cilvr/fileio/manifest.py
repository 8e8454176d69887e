"""
Run manifests written beside every set of outputs.

A manifest records what was run (command, arguments, seed), with which software and
on which input files, so that a run can be repeated. It carries no timestamps: two
identical invocations produce identical manifests.
"""

import pathlib
import platform
import sys

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, TextIO, Union

import numpy as np
import scipy
import yaml

from .. import __version__
from .base import FileFormatError, Header, _possibly_open_file, file_sha256

MANIFEST_DESIGNATE = f"# cilvr run manifest | cilvr {__version__}"
MANIFEST_NAME = "manifest.yaml"


@dataclass
class Software(Header):
    """
    Software used to produce the outputs.
    """

    name: str
    version: str
    platform: Optional[str] = field(default=None, metadata={"description": "Operating system"})

    yaml_representer = Header.yaml_representer_compact


@dataclass
class InputFile(Header):
    """
    An input file with its content hash.
    """

    file: str
    sha256: Optional[str] = None

    def __post_init__(self):
        Header.__post_init__(self)
        if self.sha256 is None and pathlib.Path(self.file).is_file():
            self.sha256 = file_sha256(self.file)


@dataclass
class RunManifest(Header):
    """
    Everything needed to repeat a command line run.
    """

    command: str
    software: Software
    arguments: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    dependencies: Optional[Dict[str, str]] = None
    inputs: Optional[List[InputFile]] = None
    outputs: Optional[List[str]] = None
    flags: Optional[List[str]] = field(
        default=None, metadata={"description": "Notes on the run, e.g. parameters outside the reference ranges"}
    )

    __repr__ = Header._staggered_repr


def current_software() -> Software:
    return Software(name="cilvr", version=__version__, platform=sys.platform)


def dependency_versions() -> Dict[str, str]:
    return {
        "numpy": np.__version__,
        "python": platform.python_version(),
        "pyyaml": yaml.__version__,
        "scipy": scipy.__version__,
    }


def save_manifest(manifest: RunManifest, fname: Union[TextIO, str, pathlib.Path]):
    """Write the manifest as yaml document behind a one line designation comment."""
    with _possibly_open_file(fname, "w") as f:
        f.write(MANIFEST_DESIGNATE + "\n")
        f.write(manifest.to_yaml())


def load_manifest(fname: Union[TextIO, str, pathlib.Path]) -> RunManifest:
    """
    :raises: FileFormatError if the file is not a cilvr manifest.
    """
    with _possibly_open_file(fname, "r") as f:
        text = f.read()
    if not text.startswith("# cilvr run manifest"):
        raise FileFormatError("file does not start with the cilvr manifest designation")
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise FileFormatError("manifest body has to be a mapping")
    return RunManifest.from_dict(data)
