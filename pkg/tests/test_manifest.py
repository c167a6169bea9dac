import pathlib

import pytest

from sigadapt.errors import ArtifactError
from sigadapt.manifest import (
    config_digest,
    dumps_record,
    read_jsonl,
    record_fields,
    require_fields,
    sha256_hex,
    tree_digest,
    write_jsonl,
)


def test_dumps_record_is_canonical() -> None:
    assert dumps_record({"b": [1, 2], "a": "x"}) == '{"a":"x","b":[1,2]}'
    assert dumps_record({"a": 1, "b": 2}) == dumps_record({"b": 2, "a": 1})
    with pytest.raises(ValueError):
        dumps_record({"a": float("nan")})


def test_write_read(tmp_path: pathlib.Path) -> None:
    path = tmp_path / "sub" / "m.jsonl"
    write_jsonl(path, "thing", {"name": "n"}, [{"id": "a"}, {"id": "b"}])
    header, records = read_jsonl(path, "thing")
    assert header == {"kind": "thing", "version": 1, "name": "n"}
    assert records == [{"id": "a"}, {"id": "b"}]
    assert path.read_text().splitlines()[1] == '{"id":"a"}'
    assert not (tmp_path / "sub" / "m.jsonl.tmp").exists()
    with pytest.raises(ArtifactError):
        read_jsonl(path, "other")


def test_read_errors(tmp_path: pathlib.Path) -> None:
    with pytest.raises(ArtifactError):
        read_jsonl(tmp_path / "missing.jsonl")
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(ArtifactError):
        read_jsonl(empty)
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"kind":"x","version":1}\n{not json\n')
    with pytest.raises(ArtifactError, match="line 2"):
        read_jsonl(bad)
    no_header = tmp_path / "noheader.jsonl"
    no_header.write_text('{"id":"a"}\n')
    with pytest.raises(ArtifactError):
        read_jsonl(no_header)
    future = tmp_path / "future.jsonl"
    future.write_text('{"kind":"x","version":99}\n')
    with pytest.raises(ArtifactError, match="version"):
        read_jsonl(future)
    array = tmp_path / "array.jsonl"
    array.write_text('{"kind":"x","version":1}\n[1, 2]\n')
    with pytest.raises(ArtifactError):
        read_jsonl(array)


def test_require_fields() -> None:
    require_fields({"a": 1, "b": 2}, ("a", "b"), "here")
    with pytest.raises(ArtifactError, match="here: missing field"):
        require_fields({"a": 1}, ("a", "b", "c"), "here")


def test_record_fields() -> None:
    with record_fields("here"):
        assert int("3") == 3
    with pytest.raises(ArtifactError, match="here: malformed field"):
        with record_fields("here"):
            float([1.0])  # type: ignore[arg-type]
    with pytest.raises(ArtifactError, match="here: malformed field"):
        with record_fields("here"):
            {"a": 1}["b"]
    with pytest.raises(ZeroDivisionError):
        with record_fields("here"):
            1 / 0


def test_hashes(tmp_path: pathlib.Path) -> None:
    assert sha256_hex(b"ab", b"c") != sha256_hex(b"a", b"bc")
    assert len(sha256_hex(b"")) == 64
    assert config_digest("a=1\n") == config_digest("a=1\n")
    assert config_digest("a=1\n") != config_digest("a=2\n")
    (tmp_path / "a").mkdir()
    (tmp_path / "a" / "f").write_bytes(b"1")
    first = tree_digest(tmp_path)
    assert tree_digest(tmp_path) == first
    (tmp_path / "a" / "f").write_bytes(b"2")
    assert tree_digest(tmp_path) != first
    with pytest.raises(ArtifactError):
        tree_digest(tmp_path / "nope")
