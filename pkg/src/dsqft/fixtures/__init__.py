"""Frozen test-function configurations shipped with the package."""

import json
from importlib import resources

from ..errors import MissingEntry


def load_all() -> dict:
    text = resources.files(__name__).joinpath("out_npoint.json").read_text()
    return json.loads(text)


def load(name: str) -> dict:
    data = load_all()
    if name not in data:
        raise MissingEntry(f"no fixture named {name!r}; available: {sorted(data)}")
    return data[name]


def functions(name: str) -> list:
    from ..testfn import TestFunction

    return [TestFunction.from_dict(f) for f in load(name)["functions"]]
