"""
Tests for fileio.base module
"""

import hashlib
import json
import math
import os
import tempfile
import unittest

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pytest
import yaml

from cilvr.fileio import base
from cilvr.pricing.ci_option import CIPutSpec, MarketParams, solve_ci_put


@dataclass
class Item(base.Header):
    name: str
    size: Optional[float] = None


@dataclass
class Holder(base.Header):
    label: str
    item: Item
    items: List[Item] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)
    note: Optional[str] = None


class TestHeaderClass(unittest.TestCase):
    def test_resolve_any(self):
        @dataclass
        class TestAny(base.Header):
            test: Any

        test_object = [1, 2, "test"]
        res = TestAny(test=test_object)
        assert res.test is test_object

    def test_resolve_nested(self):
        holder = Holder(label="a", item={"name": "first", "size": 2}, items=[{"name": "second"}])
        assert isinstance(holder.item, Item)
        assert holder.item.size == 2.0
        assert isinstance(holder.items[0], Item)
        assert holder.items[0].size is None

    def test_resolve_casts(self):
        item = Item(name="x", size="1.5")
        assert item.size == 1.5
        with self.assertWarns(base.FileFormatWarning):
            item = Item(name="x", size="no-number")
        assert item.size == "no-number"

    def test_optionals(self):
        assert Item._optionals == ["size"]
        assert "note" in Holder._optionals

    def test_to_dict(self):
        holder = Holder(label="a", item=Item("first"), extra={"value": np.float64(2.5)})
        out = holder.to_dict()
        assert out == {"label": "a", "item": {"name": "first"}, "items": [], "extra": {"value": 2.5}}
        assert type(out["extra"]["value"]) is float

    def test_from_dict(self):
        holder = Holder.from_dict({"label": "b", "item": {"name": "c"}, "unknown": 3})
        assert holder.item == Item("c")
        assert holder.unknown == 3

    def test_yaml(self):
        holder = Holder(label="a", item=Item("first", 1.0), items=[Item("second")], extra={"grid": np.arange(3)})
        data = yaml.safe_load(holder.to_yaml())
        assert data == {
            "label": "a",
            "item": {"name": "first", "size": 1.0},
            "items": [{"name": "second"}],
            "extra": {"grid": [0, 1, 2]},
        }
        assert "&id" not in holder.to_yaml()

    def test_repr(self):
        # dataclass generated repr shows every field, the Header one drops empty optionals
        assert base.Header.__repr__(Item("x")) == "Item(name='x')"
        text = Holder._staggered_repr(Holder(label="a", item=Item("x")))
        assert text.startswith("Holder(\n")
        assert "note" not in text


class TestSerialization(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_save_json(self):
        sol = solve_ci_put(MarketParams(r=0.05, sigma=0.5), CIPutSpec(100.0, 40.0))
        fname = self.path / "solution.json"
        base.save_json({"solution": sol, "flag": True, "none": math.inf}, fname)
        data = json.loads(fname.read_text())
        assert data["solution"]["S_lower"] == sol.S_lower
        assert data["solution"]["params"] == {"r": 0.05, "sigma": 0.5}
        assert data["flag"] is True
        assert data["none"] is None
        text = fname.read_text()
        assert text.endswith("}\n")
        assert text.index('"flag"') < text.index('"none"') < text.index('"solution"')

    def test_atomic_write(self):
        fname = self.path / "out.txt"
        with base.atomic_write(fname) as f:
            f.write("first\n")
        with pytest.raises(RuntimeError):
            with base.atomic_write(fname) as f:
                f.write("second\n")
                raise RuntimeError("interrupted")
        assert fname.read_text() == "first\n"
        assert os.listdir(self.path) == ["out.txt"]

    def test_line_endings(self):
        fname = self.path / "lines.txt"
        with base.atomic_write(fname) as f:
            f.write("a\nb\n")
        assert fname.read_bytes() == b"a\nb\n"

    def test_sha256(self):
        fname = self.path / "data.bin"
        fname.write_bytes(b"cilvr")
        assert base.file_sha256(fname) == hashlib.sha256(b"cilvr").hexdigest()
