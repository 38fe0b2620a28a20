"""Knowledge pack file format: line-oriented declarative blocks.

A pack file is a sequence of blocks.  A block starts with an unindented
directive line ("concept ENGINE", "script FETCH", "word engine ...") and
continues with indented body lines.  '#' starts a comment.  The parser
is purely syntactic; semantic assembly and validation live in the
ontology and language modules.  Every parsed line keeps its file/line
origin so validation errors can point at the source.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union


@dataclass(frozen=True)
class PackLine:
    file: str
    lineno: int
    text: str

    @property
    def words(self) -> list[str]:
        return self.text.split()

    def where(self) -> str:
        return f"{self.file}:{self.lineno}"


@dataclass
class Block:
    kind: str            # "concept", "script", "meta", "word", "rule", ...
    name: str            # first argument of the directive line
    head: PackLine
    args: list[str] = field(default_factory=list)   # directive args after the name
    body: list[PackLine] = field(default_factory=list)

    def where(self) -> str:
        return self.head.where()


def parse_pack_text(text: str, filename: str = "<string>") -> list[Block]:
    blocks: list[Block] = []
    current: Block | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw)
        if not stripped.strip():
            continue
        line = PackLine(filename, lineno, stripped.strip())
        if raw[0] not in " \t":
            words = line.words
            if len(words) < 2:
                raise PackSyntaxError(f"{line.where()}: directive needs a name: {line.text!r}")
            current = Block(kind=words[0], name=words[1], head=line, args=words[2:])
            blocks.append(current)
        else:
            if current is None:
                raise PackSyntaxError(f"{line.where()}: indented line outside any block")
            current.body.append(line)
    return blocks


def parse_pack_files(paths: Iterable[Union[str, Path]]) -> list[Block]:
    blocks: list[Block] = []
    for path in paths:
        p = Path(path)
        blocks.extend(parse_pack_text(p.read_text(), filename=p.name))
    return blocks


class PackSyntaxError(Exception):
    pass


def _strip_comment(line: str) -> str:
    # '#' begins a comment unless it introduces a frame id ("#ENGINE.1")
    # or appears inside a double-quoted string.
    out = []
    in_quote = False
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == '"':
            in_quote = not in_quote
        if ch == "#" and not in_quote:
            nxt = line[i + 1] if i + 1 < len(line) else ""
            if not nxt.isupper():
                break
        out.append(ch)
        i += 1
    return "".join(out)


def tokenize(text: str) -> list[str]:
    """Split on spaces, keeping double-quoted spans (quotes removed) intact."""
    tokens: list[str] = []
    buf: list[str] = []
    in_quote = False
    for ch in text:
        if ch == '"':
            in_quote = not in_quote
            continue
        if ch == " " and not in_quote:
            if buf:
                tokens.append("".join(buf))
                buf.clear()
            continue
        buf.append(ch)
    if buf:
        tokens.append("".join(buf))
    return tokens


def parse_kv(words: list[str]) -> dict[str, str]:
    """Parse key=value tokens; quoted values may contain spaces."""
    out: dict[str, str] = {}
    for token in tokenize(" ".join(words)):
        if "=" not in token:
            raise PackSyntaxError(f"expected key=value, got {token!r}")
        k, v = token.split("=", 1)
        out[k] = v
    return out
