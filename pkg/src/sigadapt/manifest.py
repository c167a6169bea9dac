"""
JSON-lines artifacts.

Every manifest written by sigadapt is a UTF-8 text file with one JSON object per line.
The first line is a header carrying ``kind`` and ``version`` plus kind-specific metadata;
every following line is one record.
Objects are written with sorted keys and no insignificant whitespace, so identical content
always produces identical bytes.
"""
import contextlib
import hashlib
import json
import os
import pathlib
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

from sigadapt.errors import ArtifactError

FORMAT_VERSION = 1

PathLike = Union[str, "os.PathLike[str]"]
Record = Dict[str, Any]


def dumps_record(record: Mapping[str, Any]) -> str:
    """
    Canonical single-line JSON for *record*.

    .. code-block:: python3

        >>> dumps_record({"label": 3, "id": "a"})
        '{"id":"a","label":3}'
    """
    return json.dumps(
        record, sort_keys=True, separators=(",", ":"), allow_nan=False, ensure_ascii=True
    )


def write_bytes(path: PathLike, data: bytes) -> None:
    """Write *data* to *path* through a temporary sibling, creating parent directories"""
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, target)


def write_jsonl(
    path: PathLike,
    kind: str,
    header: Mapping[str, Any],
    records: Iterable[Mapping[str, Any]],
) -> None:
    head = {**header, "kind": kind, "version": FORMAT_VERSION}
    lines = [dumps_record(head)]
    lines.extend(dumps_record(r) for r in records)
    write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_jsonl(
    path: PathLike, kind: Optional[str] = None
) -> Tuple[Record, List[Record]]:
    """
    Read a manifest written by :func:`write_jsonl`.

    Returns the header and the list of records.
    Raises :class:`~sigadapt.errors.ArtifactError` naming the first malformed line,
    or when the header ``kind`` differs from *kind*.
    """
    p = pathlib.Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ArtifactError(f"{p}: cannot read manifest: {exc}") from None
    objects: List[Record] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"{p}: line {lineno} is malformed: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ArtifactError(f"{p}: line {lineno} is not a JSON object")
        objects.append(obj)
    if not objects:
        raise ArtifactError(f"{p}: manifest is empty")
    header = objects[0]
    if "kind" not in header:
        raise ArtifactError(f"{p}: line 1 is not a manifest header")
    if header.get("version") != FORMAT_VERSION:
        raise ArtifactError(
            f"{p}: unsupported manifest version {header.get('version')!r}"
        )
    if kind is not None and header["kind"] != kind:
        raise ArtifactError(
            f"{p}: expected a {kind!r} manifest, found {header['kind']!r}"
        )
    return header, objects[1:]


def require_fields(
    record: Mapping[str, Any], fields: Iterable[str], where: str
) -> None:
    missing = [f for f in fields if f not in record]
    if missing:
        raise ArtifactError(f"{where}: missing field(s) {', '.join(missing)}")


@contextlib.contextmanager
def record_fields(where: str) -> Iterator[None]:
    """
    Report a record field of the wrong type or value as an :class:`~sigadapt.errors.ArtifactError` at *where*.

    .. code-block:: python3

        >>> with record_fields("manifest.jsonl: line 2"):
        ...     int("bad")
        Traceback (most recent call last):
        ...
        sigadapt.errors.ArtifactError: manifest.jsonl: line 2: malformed field: invalid literal for int() with base 10: 'bad'
    """
    try:
        yield
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"{where}: malformed field: {exc}") from None


def sha256_hex(*chunks: bytes) -> str:
    """SHA-256 over length-prefixed *chunks*, so chunk boundaries matter"""
    h = hashlib.sha256()
    for chunk in chunks:
        h.update(len(chunk).to_bytes(8, "little"))
        h.update(chunk)
    return h.hexdigest()


def tree_digest(root: PathLike) -> str:
    """
    Content hash of every file below *root*.

    Relative paths and file contents both feed the hash, so two trees have the same digest
    exactly when they hold the same files with the same bytes.
    """
    base = pathlib.Path(root)
    if not base.is_dir():
        raise ArtifactError(f"{base}: not a directory")
    chunks: List[bytes] = []
    for p in sorted(q for q in base.rglob("*") if q.is_file()):
        chunks.append(p.relative_to(base).as_posix().encode("utf-8"))
        chunks.append(p.read_bytes())
    return sha256_hex(*chunks)


def config_digest(canonical: str) -> str:
    """
    First 16 hex digits of the SHA-256 of a canonical configuration text.

    .. code-block:: python3

        >>> len(config_digest("height=224\\nwidth=224\\n"))
        16
    """
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
