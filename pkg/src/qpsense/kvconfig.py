"""Flat key-value configuration files.

One `key = value` pair per line, `#` comments, blank lines ignored.  Dotted
keys act as sections (`stack.layer.0.eps_real`).  Values stay strings at this
layer; typed access happens where the keys are consumed.
"""

from __future__ import annotations

from .errors import ParseError


def parse_kv(text: str, path: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", path, lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ParseError("empty key", path, lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", path, lineno)
        out[key] = value.strip()
    return out


def load_kv(path: str) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv(fh.read(), path)


def format_kv(pairs: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs.items())


def write_kv(path: str, pairs: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_kv(pairs))
