"""
Comma separated tables of curves, sweeps, ledgers and implied volatility input.
"""

import json
import pathlib

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, TextIO, Union

import numpy as np

from ..pricing.calibration import IVTermStructure
from .base import FileFormatError, Header, _possibly_open_file

TERM_STRUCTURE_COLUMNS = ("tenor_days", "iv")


@dataclass
class Column(Header):
    """
    Information about a table column.
    """

    name: str
    fmt: Optional[str] = field(default=None, metadata={"description": "printf style format, full precision if empty"})

    yaml_representer = Header.yaml_representer_compact


@dataclass
class Table:
    """
    Named columns and their data, one row per line in the written file.
    """

    columns: List[Column]
    data: np.ndarray

    def __post_init__(self):
        self.columns = [c if isinstance(c, Column) else Column(str(c)) for c in self.columns]
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim == 1 and self.data.size == 0:
            self.data = self.data.reshape(0, len(self.columns))
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise ValueError(f"table data of shape {self.data.shape} does not match {len(self.columns)} columns")

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.names.index(name)]


def save_table(table: Table, fname: Union[TextIO, str, pathlib.Path]):
    """
    Write the table as csv with a single header row of column names.

    Floats are written with 17 significant digits, so a reload reproduces them exactly.
    """
    fmt = [c.fmt or "%.17g" for c in table.columns]
    with _possibly_open_file(fname, "w") as f:
        np.savetxt(f, table.data, delimiter=",", header=",".join(table.names), comments="", fmt=fmt, newline="\n")


def load_table(fname: Union[TextIO, str, pathlib.Path]) -> Table:
    with _possibly_open_file(fname, "r") as f:
        header = f.readline().strip()
        if not header:
            raise FileFormatError("table has no header row")
        names = [n.strip() for n in header.split(",")]
        rows = [line for line in f if line.strip()]
    if not rows:
        return Table([Column(n) for n in names], np.empty((0, len(names))))
    try:
        data = np.loadtxt(rows, delimiter=",", ndmin=2)
    except ValueError as e:
        raise FileFormatError(f"could not read table values: {e}") from e
    return Table([Column(n) for n in names], data)


def _pillars_from_json(data) -> List[Sequence[float]]:
    if isinstance(data, dict):
        if "pillars" not in data:
            raise FileFormatError("term structure json needs a 'pillars' entry")
        data = data["pillars"]
    pillars = []
    for item in data:
        if isinstance(item, dict):
            try:
                pillars.append((item["tenor_days"], item["iv"]))
            except KeyError as e:
                raise FileFormatError(f"pillar {item!r} misses the key {e}") from None
        else:
            pillars.append(tuple(item))
    return pillars


def load_term_structure(fname: Union[str, pathlib.Path]) -> IVTermStructure:
    """
    Read at-the-money implied volatility pillars.

    Accepted are csv files with the header `tenor_days,iv` and json files holding either
    ``{"pillars": [{"tenor_days": 7, "iv": 0.6}, ...]}`` or a list of
    ``[tenor_days, iv]`` pairs. Tenors are converted to years with 365 days per year.

    :raises: FileFormatError for files that do not follow these layouts.
    """
    path = pathlib.Path(fname)
    if path.suffix.lower() == ".json":
        with _possibly_open_file(path, "r") as f:
            try:
                pillars = _pillars_from_json(json.load(f))
            except json.JSONDecodeError as e:
                raise FileFormatError(f"{path} is not valid json: {e}") from e
        try:
            days, ivs = np.asarray(pillars, dtype=float).T
        except ValueError as e:
            raise FileFormatError(f"pillars have to be pairs of numbers: {e}") from e
    else:
        table = load_table(path)
        missing = [name for name in TERM_STRUCTURE_COLUMNS if name not in table.names]
        if missing:
            raise FileFormatError(f"{path} misses the column(s) {', '.join(missing)}")
        days, ivs = table.column("tenor_days"), table.column("iv")
    return IVTermStructure.from_days(days, ivs)
