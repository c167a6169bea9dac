import logging
from fractions import Fraction

import numpy as np
import pytest

from sigadapt.errors import (
    AdapterMismatchError,
    ArtifactError,
    FormatError,
    OverflowRejectedError,
    ValidationError,
)
from sigadapt.signal import SignalMatrix
from sigadapt.text import (
    Aggregator,
    Downsampling,
    OverflowStatus,
    TextAdapterConfig,
    amplify_and_round,
    check_overflow,
    convert_to_text,
    parse_token_text,
    render_tokens,
    text_from_record,
    window_downsample,
)


def _row(values: np.ndarray, label: int = 0) -> SignalMatrix:
    return SignalMatrix("r", np.asarray(values, dtype=np.float64).reshape(1, -1), label)


def test_amplify_and_round() -> None:
    assert amplify_and_round([0.5, -0.5, 0.25], alpha=5.0).tolist() == [3, -3, 1]
    assert amplify_and_round([1.2345], alpha=10.0).tolist() == [12]
    assert amplify_and_round([2.5, -2.5], integer_input=True).tolist() == [3, -3]
    assert amplify_and_round([[1.0, 2.0]], alpha=2.0).tolist() == [[2, 4]]
    with pytest.raises(ValidationError):
        amplify_and_round([1e300])
    with pytest.raises(ValidationError):
        amplify_and_round([np.nan])


def test_check_overflow() -> None:
    assert check_overflow(1, 1) is OverflowStatus.FITS
    assert check_overflow(1024, 1024) is OverflowStatus.FITS
    assert check_overflow(1025, 1024) is OverflowStatus.DOWNSAMPLED
    assert check_overflow(3072, 1024) is OverflowStatus.DOWNSAMPLED
    assert check_overflow(3073, 1024) is OverflowStatus.REJECTED
    assert check_overflow(10**6, 1024, force=True) is OverflowStatus.DOWNSAMPLED
    with pytest.raises(ValidationError):
        check_overflow(0, 10)
    with pytest.raises(ValidationError):
        check_overflow(10, 0)


def test_window_downsample() -> None:
    values = np.arange(3000)
    out = window_downsample(values, 1024)
    assert out.tolist() == [3 * k + 1 for k in range(1000)]
    assert window_downsample([7, 8, 9], 5).tolist() == [7, 8, 9]
    # windows of 2 over 5 values, the last window holds one value
    assert window_downsample([1, 2, 3, 4, 5], 3).tolist() == [2, 4, 5]
    assert window_downsample([-1, -2, 5, 1], 2).tolist() == [-2, 3]
    assert window_downsample([3, -3, 1, 1], 2, Aggregator.MAX_ABS).tolist() == [3, 1]
    assert window_downsample([1, 2, 3, 4], 1, "first").tolist() == [1]
    with pytest.raises(ValidationError):
        window_downsample([], 3)
    with pytest.raises(ValidationError):
        window_downsample([[1, 2]], 3)


def test_downsampled_length_bound() -> None:
    for length in (1025, 1500, 2048, 2049, 3071, 3072):
        out = window_downsample(np.ones(length, dtype=np.int64), 1024)
        assert 1 <= len(out) <= 1024


def test_render_and_parse() -> None:
    assert render_tokens([1, -2, 30]) == "1 -2 30"
    assert render_tokens([1, -2], ",") == "1,-2"
    assert parse_token_text("1,-2\n", ",").tolist() == [1, -2]
    with pytest.raises(FormatError):
        parse_token_text("1 x 3", source="texts/train.txt")


def test_config() -> None:
    assert TextAdapterConfig.from_preset("gpt2").max_len == 1024
    assert TextAdapterConfig.from_preset("bert", alpha=10.0).max_len == 512
    with pytest.raises(ValidationError):
        TextAdapterConfig.from_preset("t5")
    with pytest.raises(ValidationError):
        TextAdapterConfig(alpha=0.0)
    with pytest.raises(ValidationError):
        TextAdapterConfig(alpha=float("inf"))
    with pytest.raises(ValidationError):
        TextAdapterConfig(max_len=0)
    with pytest.raises(ValidationError):
        TextAdapterConfig(separator="-")
    with pytest.raises(ValidationError):
        TextAdapterConfig(separator="")
    with pytest.raises(ValueError):
        TextAdapterConfig(aggregator="median")  # type: ignore[arg-type]
    assert TextAdapterConfig(aggregator="first").aggregator is Aggregator.FIRST  # type: ignore[arg-type]
    assert TextAdapterConfig(integer_input=True).scale == 1.0
    assert TextAdapterConfig(alpha=50.0).scale == 50.0


def test_config_hash() -> None:
    base = TextAdapterConfig()
    assert base.config_hash == TextAdapterConfig().config_hash
    assert len(base.config_hash) == 16
    assert base.config_hash != TextAdapterConfig(alpha=100.0).config_hash
    assert base.config_hash != TextAdapterConfig(separator=",").config_hash
    assert "text.separator=\\t" in TextAdapterConfig(separator="\t").canonical()


def test_convert_short_instance() -> None:
    t = convert_to_text(_row(np.array([0.001, -0.002, 0.0304]), 2), TextAdapterConfig())
    assert t.text == "1 -2 30"
    assert t.token_count == 3
    assert t.window_size == 1
    assert t.overflow_status is OverflowStatus.FITS
    assert t.label == 2
    assert t.instance_id == "r"
    assert t.config_hash == TextAdapterConfig().config_hash
    assert t.tokens().tolist() == [1, -2, 30]
    assert t.features().tolist() == [0.001, -0.002, 0.03]


def test_convert_downsamples_with_warning(caplog: pytest.LogCaptureFixture) -> None:
    config = TextAdapterConfig(alpha=1.0, max_len=1024)
    with caplog.at_level(logging.WARNING, logger="sigadapt"):
        t = convert_to_text(_row(np.arange(3000.0)), config)
    assert t.overflow_status is OverflowStatus.DOWNSAMPLED
    assert t.window_size == 3
    assert t.token_count == 1000
    assert t.tokens()[:3].tolist() == [1, 4, 7]
    assert any(r.message == "downsampling text" for r in caplog.records)


def test_convert_truncates() -> None:
    config = TextAdapterConfig(alpha=1.0, max_len=4, downsampling=Downsampling.TRUNCATE)
    t = convert_to_text(_row(np.arange(10.0)), config)
    assert t.text == "0 1 2 3"
    assert t.window_size == 1
    assert t.overflow_status is OverflowStatus.DOWNSAMPLED


def test_convert_rejects_overflow() -> None:
    with pytest.raises(OverflowRejectedError):
        convert_to_text(_row(np.zeros(31)), TextAdapterConfig(max_len=10))
    t = convert_to_text(_row(np.zeros(31)), TextAdapterConfig(max_len=10, force=True))
    assert t.token_count == 8
    assert t.window_size == 4


def test_convert_rejects_multichannel() -> None:
    m = SignalMatrix("m", [[1.0, 2.0], [3.0, 4.0]], 0)
    with pytest.raises(AdapterMismatchError):
        convert_to_text(m, TextAdapterConfig())
    t = convert_to_text(m, TextAdapterConfig(alpha=1.0, legacy_flatten=True))
    assert t.text == "1 2 3 4"


def test_convert_integer_input() -> None:
    t = convert_to_text(_row(np.array([12.0, -7.4, 0.5])), TextAdapterConfig(integer_input=True))
    assert t.text == "12 -7 1"


def test_text_from_record() -> None:
    config = TextAdapterConfig(separator=",")
    t = convert_to_text(_row(np.array([0.5, -0.5]), 1), config)
    record = t.to_record(0)
    assert record["line"] == 0
    assert record["overflow_status"] == "fits"
    back = text_from_record(record, t.text, ",", config.scale, "manifest.jsonl, line 1")
    assert back == t
    del record["window_size"]
    with pytest.raises(ArtifactError):
        text_from_record(record, t.text, ",", config.scale, "manifest.jsonl, line 1")


def test_window_mean_is_exact_for_large_tokens() -> None:
    big = 2**60
    assert window_downsample(np.array([big + 1, big + 2]), 1).tolist() == [big + 2]
    assert window_downsample(np.array([-big - 1, -big - 2]), 1).tolist() == [-big - 2]
    # sums beyond int64 still give the exact mean
    top = 2**63 - 1
    assert window_downsample(np.array([top, top - 1, top]), 1).tolist() == [top]
    assert window_downsample(np.array([top, -top, 4, 5]), 2).tolist() == [0, 5]


def test_window_mean_matches_fraction_rounding() -> None:
    rng = np.random.default_rng(11)

    def away(q: Fraction) -> int:
        n = abs(q)
        whole = int(n)
        if n - whole >= Fraction(1, 2):
            whole += 1
        return whole if q >= 0 else -whole

    for bound in (100, 2**40, 2**62):
        for _ in range(50):
            length = int(rng.integers(2, 60))
            budget = int(rng.integers(1, length))
            values = [int(v) for v in rng.integers(-bound, bound, size=length)]
            size = -(-length // budget)
            expected = [
                away(Fraction(sum(values[i : i + size]), len(values[i : i + size])))
                for i in range(0, length, size)
            ]
            assert window_downsample(np.array(values, dtype=np.int64), budget).tolist() == expected


def test_overflow_classification_holds_for_random_lengths() -> None:
    rng = np.random.default_rng(5)
    for _ in range(500):
        max_len = int(rng.integers(1, 2000))
        length = int(rng.integers(1, 8 * max_len + 2))
        status = check_overflow(length, max_len)
        if length <= max_len:
            assert status is OverflowStatus.FITS
        elif length <= 3 * max_len:
            assert status is OverflowStatus.DOWNSAMPLED
        else:
            assert status is OverflowStatus.REJECTED
        forced = check_overflow(length, max_len, force=True)
        assert forced is (OverflowStatus.FITS if length <= max_len else OverflowStatus.DOWNSAMPLED)
        if status is not OverflowStatus.REJECTED and length <= 4000:
            assert 1 <= len(window_downsample(np.zeros(length, dtype=np.int64), max_len)) <= max_len


def test_random_texts_survive_render_parse_and_reload() -> None:
    rng = np.random.default_rng(17)
    separators = (" ", ",", "\t", ";")
    for i in range(1000):
        max_len = int(rng.integers(1, 64))
        length = int(rng.integers(1, 3 * max_len + 1))
        config = TextAdapterConfig(
            alpha=float(rng.choice([1.0, 10.0, 1000.0])),
            max_len=max_len,
            separator=separators[i % len(separators)],
            aggregator=list(Aggregator)[i % 3],
        )
        values = rng.normal(scale=float(rng.choice([0.01, 1.0, 100.0])), size=length)
        t = convert_to_text(_row(values, i % 5), config)
        assert 1 <= t.token_count <= max_len
        tokens = t.tokens()
        assert tokens.size == t.token_count
        rendered = render_tokens(tokens, config.separator)
        assert parse_token_text(rendered, config.separator).tolist() == tokens.tolist()
        where = f"manifest.jsonl: line {i + 2}"
        assert text_from_record(t.to_record(i), t.text, config.separator, config.scale, where) == t
