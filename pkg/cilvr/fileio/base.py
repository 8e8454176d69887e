"""
Base classes and helpers for the documents written by cilvr.
"""

import hashlib
import json
import math
import os
import pathlib
import tempfile
import warnings

from contextlib import contextmanager
from dataclasses import fields, is_dataclass
from enum import Enum
from inspect import isclass
from typing import Any, Generator, List, TextIO, Union, get_args, get_origin

import numpy as np
import yaml


class FileFormatError(ValueError):
    pass


class FileFormatWarning(RuntimeWarning):
    pass


class Header:
    """
    The super class for all documented items (manifests, software records, columns).

    Subclasses are dataclasses. Attributes annotated as Optional are left out of the
    serialized output while they are None.
    """

    _optionals: List[str] = []

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls._optionals = [
            fname for fname, ftype in cls.__annotations__.items() if type(None) in get_args(ftype)
        ]

    @classmethod
    def from_dict(cls, data_dict: dict):
        """
        Create the item from a dictionary as returned by the yaml or json reader.

        Keys that are not attributes of the class are attached to the instance after
        construction, so documents written by newer versions still load.
        """
        names = [fi.name for fi in fields(cls)]
        output = cls(**{key: value for key, value in data_dict.items() if key in names})
        for key, value in data_dict.items():
            if key not in names:
                setattr(output, key, value)
        return output

    def __post_init__(self):
        """Convert nested dictionaries and lists to the annotated Header types."""
        for fld in fields(self):
            attr = getattr(self, fld.name, None)
            if attr is None:
                continue
            try:
                resolved = self._resolve_type(fld.type, attr)
            except Exception as e:
                raise FileFormatError(
                    f"Could not resolve value '{attr}' of {self.__class__.__name__}.{fld.name}: "
                    f"{e.__class__.__name__}: {e}"
                ) from e
            if resolved is None:
                warnings.warn(
                    f"No suitable conversion found for {fld.name} ({fld.type}) with value {attr!r}, "
                    "keeping the raw value",
                    FileFormatWarning,
                )
            else:
                setattr(self, fld.name, resolved)

    @staticmethod
    def _resolve_type(hint: Any, item: Any) -> Any:
        """
        Convert `item` to the type hint, recursing into List, Dict and Optional.

        :return: The converted object or None if no conversion applies.
        """
        if hint is Any:
            return item
        origin = get_origin(hint)
        if origin is None and isclass(hint):
            if isinstance(item, hint):
                return item
            if issubclass(hint, Header) and isinstance(item, dict):
                return hint.from_dict(item)
            try:
                return hint(item)
            except (ValueError, TypeError):
                return None
        if origin in (list, tuple):
            item_hint = get_args(hint)[0]
            if not isinstance(item, (list, tuple)):
                return None
            return origin(Header._resolve_type(item_hint, i) for i in item)
        if origin is dict:
            key_hint, value_hint = get_args(hint)
            if not isinstance(item, dict):
                return None
            return {Header._resolve_type(key_hint, k): Header._resolve_type(value_hint, v) for k, v in item.items()}
        if origin is Union:
            subtypes = get_args(hint)
            if type(item) in subtypes:
                return item
            for subtype in subtypes:
                if subtype is type(None):
                    continue
                resolved = Header._resolve_type(subtype, item)
                if resolved is not None:
                    return resolved
        return None

    def to_dict(self) -> dict:
        """
        Produces a clean dictionary of the item, removing optional attributes
        with the value :code:`None`.
        """
        out_dict = {}
        for key, value in self.__dict__.items():
            if key.startswith("_") or (value is None and key in self._optionals):
                continue
            if hasattr(value, "to_dict"):
                out_dict[key] = value.to_dict()
            elif isinstance(value, (list, tuple)):
                out_dict[key] = [v.to_dict() if hasattr(v, "to_dict") else _todict(v) for v in value]
            else:
                out_dict[key] = _todict(value)
        return out_dict

    def to_yaml(self) -> str:
        return yaml.dump(self, Dumper=CilvrDumper, sort_keys=False)

    def _to_object_dict(self):
        return {
            key: value
            for key, value in self.__dict__.items()
            if not key.startswith("_") and not (value is None and key in self._optionals)
        }

    def yaml_representer(self, dumper: yaml.Dumper):
        return dumper.represent_mapping(dumper.DEFAULT_MAPPING_TAG, self._to_object_dict(), flow_style=False)

    def yaml_representer_compact(self, dumper: yaml.Dumper):
        return dumper.represent_mapping(dumper.DEFAULT_MAPPING_TAG, self._to_object_dict(), flow_style=True)

    def __repr__(self):
        """
        Representation that does not show empty arguments.
        """
        items = [
            f"{fi.name}={getattr(self, fi.name)!r}"
            for fi in fields(self)
            if not (fi.name in self._optionals and getattr(self, fi.name) is None)
        ]
        return f"{self.__class__.__name__}({', '.join(items)})"

    def _staggered_repr(self):
        """
        Representation distributed over multiple lines, assign to __repr__ in a subclass to use it.
        """
        slen = len(self.__class__.__name__)
        out = f"{self.__class__.__name__}(\n"
        for fi in fields(self):
            if fi.name in self._optionals and getattr(self, fi.name) is None:
                continue
            ftxt = repr(getattr(self, fi.name)).replace("\n", "\n" + " " * (slen + len(fi.name) + 2))
            out += " " * (slen + 1) + f"{fi.name}={ftxt},\n"
        out += " " * (slen + 1) + ")"
        return out


class CilvrDumper(yaml.SafeDumper):
    def ignore_aliases(self, data):
        # repeated objects are written out in full, no anchors
        return True

    def represent_data(self, data):
        if hasattr(data, "yaml_representer"):
            return data.yaml_representer(self)
        elif isinstance(data, np.ndarray):
            return super().represent_data(data.tolist())
        elif isinstance(data, tuple):
            return super().represent_data(list(data))
        elif np.isscalar(data) and hasattr(data, "item"):
            # numpy scalar
            return super().represent_data(data.item())
        else:
            return super().represent_data(data)


@contextmanager
def atomic_write(fname: Union[str, pathlib.Path], mode: str = "w") -> Generator[TextIO, None, None]:
    """
    Write to a temporary file beside `fname` and rename it into place on success.

    Text mode writes utf-8 with LF line endings. On failure the temporary file is
    removed and an existing `fname` stays untouched.
    """
    path = pathlib.Path(fname)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        if "b" in mode:
            handle = os.fdopen(fd, mode)
        else:
            handle = os.fdopen(fd, mode, encoding="utf-8", newline="\n")
        with handle:
            yield handle
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@contextmanager
def _possibly_open_file(f: Union[TextIO, str, pathlib.Path], mode: str = "w") -> Generator[TextIO, None, None]:
    """
    Context manager for files.

    :param f: If `f` is a file, then yield the file. If `f` is a path it is opened,
        atomically for writing, and closed again on leaving the context.
    :param mode: Mode in which a path is opened.
    """
    if hasattr(f, "read") or hasattr(f, "write"):
        yield f
    elif "w" in mode:
        with atomic_write(f, mode) as g:
            yield g
    else:
        with open(f, mode, encoding=None if "b" in mode else "utf-8") as g:
            yield g


def file_sha256(fname: Union[str, pathlib.Path]) -> str:
    digest = hashlib.sha256()
    with open(fname, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _todict(obj: Any) -> Any:
    """
    Recursively converts results to plain python values for json and yaml output.

    Dataclasses and other objects become dictionaries of their public attributes,
    numpy arrays become lists and non-finite floats become None.
    """
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    elif isinstance(obj, dict):
        return {str(k): _todict(v) for k, v in obj.items()}
    elif isinstance(obj, Enum):
        return obj.value
    elif isinstance(obj, np.ndarray):
        return _todict(obj.tolist())
    elif isinstance(obj, np.generic):
        return _todict(obj.item())
    elif isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    elif isinstance(obj, (str, bytes, int, bool)) or obj is None:
        return obj
    elif isinstance(obj, (list, tuple)):
        return [_todict(v) for v in obj]
    elif is_dataclass(obj):
        return {fi.name: _todict(getattr(obj, fi.name)) for fi in fields(obj) if fi.repr}
    elif hasattr(obj, "__dict__"):
        return {key: _todict(value) for key, value in obj.__dict__.items() if not key.startswith("_")}
    return obj


def save_json(obj: Any, fname: Union[TextIO, str, pathlib.Path]):
    """Write `obj` as json with sorted keys and two-space indentation."""
    with _possibly_open_file(fname, "w") as f:
        f.write(json.dumps(_todict(obj), indent=2, sort_keys=True) + "\n")
