"""
Tests for fileio.manifest module
"""

import hashlib
import tempfile
import unittest

from pathlib import Path

import pytest
import yaml

from cilvr import __version__
from cilvr.fileio import manifest
from cilvr.fileio.base import CilvrDumper, FileFormatError
from cilvr.fileio.manifest import InputFile, RunManifest, Software


class TestManifest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name)
        self.input = self.path / "iv.csv"
        self.input.write_text("tenor_days,iv\n1,0.9\n7,0.8\n")

    def tearDown(self):
        self.tmp.cleanup()

    def build(self):
        return RunManifest(
            command="calibrate",
            software=manifest.current_software(),
            arguments={"K": 100.0, "q": 40.0, "r": 0.05},
            seed=3,
            dependencies=manifest.dependency_versions(),
            inputs=[InputFile(str(self.input))],
            outputs=["calibration.json", manifest.MANIFEST_NAME],
            flags=["OutOfRangeWarning: q outside the reference grid"],
        )

    def test_software(self):
        software = manifest.current_software()
        assert software.name == "cilvr"
        assert software.version == __version__
        text = yaml.dump({"software": software}, Dumper=CilvrDumper, sort_keys=False)
        assert "{" in text
        assert set(manifest.dependency_versions()) == {"numpy", "python", "pyyaml", "scipy"}

    def test_input_hash(self):
        item = InputFile(str(self.input))
        assert item.sha256 == hashlib.sha256(self.input.read_bytes()).hexdigest()
        assert InputFile("missing.csv").sha256 is None
        assert InputFile("missing.csv", sha256="abc").sha256 == "abc"

    def test_save_load(self):
        fname = self.path / manifest.MANIFEST_NAME
        original = self.build()
        manifest.save_manifest(original, fname)
        text = fname.read_text()
        assert text.startswith(manifest.MANIFEST_DESIGNATE + "\n")
        loaded = manifest.load_manifest(fname)
        assert isinstance(loaded.software, Software)
        assert isinstance(loaded.inputs[0], InputFile)
        assert loaded.to_dict() == original.to_dict()
        assert loaded.arguments["q"] == 40.0

    def test_reproducible(self):
        first, second = self.path / "first.yaml", self.path / "second.yaml"
        manifest.save_manifest(self.build(), first)
        manifest.save_manifest(self.build(), second)
        assert first.read_bytes() == second.read_bytes()

    def test_optionals_dropped(self):
        minimal = RunManifest(command="price", software=Software("cilvr", __version__))
        data = yaml.safe_load(minimal.to_yaml())
        assert data == {"command": "price", "software": {"name": "cilvr", "version": __version__}, "arguments": {}}
        assert "seed" not in repr(minimal)

    def test_designation(self):
        fname = self.path / "other.yaml"
        fname.write_text("command: price\n")
        with pytest.raises(FileFormatError):
            manifest.load_manifest(fname)
        fname.write_text("# cilvr run manifest\n- a\n- b\n")
        with pytest.raises(FileFormatError):
            manifest.load_manifest(fname)
