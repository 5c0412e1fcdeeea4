"""Config parsing (strict schema, canonical hash), deterministic
serialization, and the binary sample stream."""

import json
import math

import numpy as np
import pytest

from pathgibbs.config import ConfigError, RunConfig
from pathgibbs.output import dumps, fmt_float, write_csv, write_json, write_meta
from pathgibbs.samplefile import (
    SampleStreamError,
    append_frame,
    frames_to_paths,
    read_stream,
    write_stream,
)

GOOD = """
[spectral]
d = 3
omega = power:1
rho2 = indicator
r_min = 1.0
r_max = 2.0
amp = 0.5

[lattice]
eps = 0.25
n = 16
kappa = 0.01

[sampler]
seed = 7
n_chains = 2

[estimators]
gamma = 1, 0, 0
"""


def test_round_trip_and_accessors():
    rc = RunConfig.from_string(GOOD)
    assert rc.get_int("spectral", "d") == 3
    assert rc.get_float("lattice", "eps") == 0.25
    assert rc.get_str("spectral", "omega") == "power:1"
    assert rc.get_floats("estimators", "gamma") == (1.0, 0.0, 0.0)
    assert rc.has("sampler", "seed")
    assert not rc.has("sampler", "n_sweeps")
    assert rc.get_int("sampler", "missing", 42) == 42


def test_unknown_section_and_key_are_errors():
    with pytest.raises(ConfigError, match="unknown section"):
        RunConfig.from_string("[banana]\nx = 1\n")
    with pytest.raises(ConfigError, match="spectral.banana"):
        RunConfig.from_string("[spectral]\nbanana = 1\n")


def test_require_names_the_missing_key():
    rc = RunConfig.from_string(GOOD)
    with pytest.raises(ConfigError, match="lattice.d"):
        rc.require("lattice", "d")


def test_canonical_hash_invariant_to_layout():
    messy = "\n; a comment\n[lattice]\nkappa = 0.01\nn = 16\neps = 0.25\n" + GOOD.replace(
        "[lattice]\neps = 0.25\nn = 16\nkappa = 0.01\n", ""
    )
    a, b = RunConfig.from_string(GOOD), RunConfig.from_string(messy)
    assert a.canonical() == b.canonical()
    assert a.hash() == b.hash()
    assert len(a.hash()) == 16
    c = RunConfig.from_string(GOOD.replace("seed = 7", "seed = 8"))
    assert c.hash() != a.hash()


def test_int_parsing_accepts_bases():
    rc = RunConfig.from_string("[sampler]\nseed = 0x10\n")
    assert rc.get_int("sampler", "seed") == 16


def test_load_reads_files(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(GOOD)
    rc = RunConfig.load(p)
    assert rc.get_int("spectral", "d") == 3
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.ini")


def test_fmt_float_round_trips():
    for x in (0.1, 1.0 / 3.0, -0.0, 1e-308, 1.7976931348623157e308, 2.5):
        assert float(fmt_float(x)) == x
    assert fmt_float(float("nan")) == "nan"
    assert fmt_float(float("inf")) == "inf"
    assert fmt_float(float("-inf")) == "-inf"


def test_dumps_canonical_floats():
    text = dumps({"a": 0.1, "b": [1, True, None], "c": "s"})
    assert text.endswith("\n")
    assert "0.10000000000000001" in text
    parsed = json.loads(text)
    assert parsed["a"] == 0.1 and parsed["b"] == [1, True, None]
    with pytest.raises(TypeError):
        dumps({"bad": object()})


def test_dumps_handles_numpy_scalars_and_arrays():
    text = dumps({"v": np.float64(0.5), "n": np.int32(3), "arr": np.arange(3.0),
                  "flag": np.bool_(True)})
    parsed = json.loads(text)
    assert parsed == {"v": 0.5, "n": 3, "arr": [0.0, 1.0, 2.0], "flag": True}


def test_write_csv_layout(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(p, ["a", "b"], [np.array([1.0, 2.0]), np.array([0.1, 0.2])])
    lines = p.read_text().splitlines()
    assert lines[0] == "a,b"
    assert lines[1].split(",")[0] == "1"
    assert float(lines[1].split(",")[1]) == 0.1
    with pytest.raises(ValueError):
        write_csv(p, ["a", "b"], [np.zeros(2), np.zeros(3)])


def test_write_json_and_meta(tmp_path):
    write_json(tmp_path / "x.json", {"k": 1})
    assert json.loads((tmp_path / "x.json").read_text()) == {"k": 1}
    write_meta(tmp_path, ["prog", "cmd"], "deadbeef")
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["argv"] == ["prog", "cmd"]
    assert meta["config_hash"] == "deadbeef"
    assert "timestamp" in meta


def test_sample_stream_round_trip(tmp_path):
    p = tmp_path / "s.bin"
    rng = np.random.default_rng(0)
    frames = rng.normal(size=(5, 8, 2))  # N=4 -> 2N=8 free sites
    n = write_stream(p, eps=0.25, N=4, d=2, frames=frames)
    assert n == 5
    eps, N, d, back = read_stream(p)
    assert (eps, N, d) == (0.25, 4, 2)
    assert np.array_equal(back, frames)
    full = np.insert(frames[0], 4, 0.0, axis=0)  # reinsert the pinned row
    with open(p, "ab") as fh:
        append_frame(fh, full, N=4, d=2)
    *_, back2 = read_stream(p)
    assert back2.shape == (6, 8, 2)
    assert np.array_equal(back2[5], frames[0])


def test_frames_to_paths_reinserts_pin(tmp_path):
    rng = np.random.default_rng(1)
    frames = rng.normal(size=(3, 4, 1))
    paths = frames_to_paths(frames, N=2, d=1)
    assert paths.shape == (3, 5, 1)
    assert np.all(paths[:, 2] == 0.0)
    assert np.array_equal(paths[:, [0, 1, 3, 4]], frames)


def test_sample_stream_corruption_errors(tmp_path):
    p = tmp_path / "s.bin"
    write_stream(p, 0.5, 2, 1, np.zeros((2, 4, 1)))
    raw = p.read_bytes()
    trunc = tmp_path / "trunc.bin"
    trunc.write_bytes(raw[:-5])  # partial final frame
    with pytest.raises(SampleStreamError, match="frame"):
        read_stream(trunc)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(SampleStreamError, match="magic"):
        read_stream(bad)
    stub = tmp_path / "stub.bin"
    stub.write_bytes(raw[:7])
    with pytest.raises(SampleStreamError, match="header"):
        read_stream(stub)


def test_write_stream_validates_frame_shape(tmp_path):
    with pytest.raises(ValueError):
        write_stream(tmp_path / "x.bin", 0.5, 2, 1, np.zeros((2, 5, 1)))
