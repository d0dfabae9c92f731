"""File formats for persisted runs.

I/Q series as CSV (metadata comment line, column header, index,i,q rows)
and as a length-prefixed little-endian binary framing; spectra and spur
reports as CSV/JSON; scenario configs as flat INI sections; manifest as
canonical JSON. All writers are deterministic: equal inputs produce
byte-identical files.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import struct
from typing import Iterable

import numpy as np

from .analyzer import DemodMode, IqTimeSeries
from .fxp import ConfigError
from .metrics import PsdMethod, Spectrum, SpectrumUnits, SpectrumWindow, SpurReport

_BIN_MAGIC = b"CTIQ"


def _fmt_float(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# I/Q series


def series_to_csv(series: IqTimeSeries) -> str:
    """Header line with tone metadata, column line, then index,i,q rows."""
    meta = (
        f"# band_index={series.band_index} tone_index={series.tone_index} "
        f"freq_word={series.freq_word} fs_hz={_fmt_float(series.rate_hz)} "
        f"l_avg={series.l_avg} demod_mode={series.demod_mode.value} "
        f"n_discarded={series.n_discarded}"
    )
    out = [meta, "index,i,q"]
    is_int = np.issubdtype(np.asarray(series.i).dtype, np.integer)
    for n, (i, q) in enumerate(zip(series.i, series.q)):
        if is_int:
            out.append(f"{n},{int(i)},{int(q)}")
        else:
            out.append(f"{n},{_fmt_float(i)},{_fmt_float(q)}")
    return "\n".join(out) + "\n"


def series_from_csv(text: str) -> IqTimeSeries:
    meta: dict[str, str] = {}
    i_vals: list = []
    q_vals: list = []
    is_float = False
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for part in line[1:].split():
                if "=" in part:
                    k, v = part.split("=", 1)
                    meta[k] = v
            continue
        if line.startswith("index"):
            continue
        _, si, sq = line.split(",")
        if "." in si or "e" in si or "." in sq or "e" in sq:
            is_float = True
        i_vals.append(si)
        q_vals.append(sq)
    conv = float if is_float else int
    dtype = np.float64 if is_float else np.int64
    return IqTimeSeries(
        band_index=int(meta.get("band_index", 0)),
        tone_index=int(meta.get("tone_index", 0)),
        freq_word=int(meta.get("freq_word", 0)),
        i=np.array([conv(v) for v in i_vals], dtype=dtype),
        q=np.array([conv(v) for v in q_vals], dtype=dtype),
        rate_hz=float(meta.get("fs_hz", 0.0)),
        l_avg=int(meta.get("l_avg", 1)),
        demod_mode=DemodMode(meta.get("demod_mode", "sine")),
        n_discarded=int(meta.get("n_discarded", 0)),
    )


def series_to_binary(series: IqTimeSeries) -> bytes:
    """Length-prefixed little-endian framing.

    Layout: magic "CTIQ", u32 header length, UTF-8 JSON header, u64 sample
    count, then sample count int64 (or float64) I values followed by as
    many Q values, all little-endian. The header's dtype field says which.
    """
    is_int = np.issubdtype(np.asarray(series.i).dtype, np.integer)
    dtype = "<i8" if is_int else "<f8"
    header = json.dumps(
        {
            "band_index": series.band_index,
            "tone_index": series.tone_index,
            "freq_word": series.freq_word,
            "fs_hz": series.rate_hz,
            "l_avg": series.l_avg,
            "demod_mode": series.demod_mode.value,
            "n_discarded": series.n_discarded,
            "dtype": dtype,
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    buf = io.BytesIO()
    buf.write(_BIN_MAGIC)
    buf.write(struct.pack("<I", len(header)))
    buf.write(header)
    buf.write(struct.pack("<Q", len(series.i)))
    buf.write(np.asarray(series.i).astype(dtype).tobytes())
    buf.write(np.asarray(series.q).astype(dtype).tobytes())
    return buf.getvalue()


def series_from_binary(data: bytes) -> IqTimeSeries:
    if data[:4] != _BIN_MAGIC:
        raise ConfigError("not an I/Q binary file (bad magic)")
    (hlen,) = struct.unpack_from("<I", data, 4)
    header = json.loads(data[8 : 8 + hlen].decode("utf-8"))
    (count,) = struct.unpack_from("<Q", data, 8 + hlen)
    dtype = np.dtype(header["dtype"])
    off = 8 + hlen + 8
    i = np.frombuffer(data, dtype=dtype, count=count, offset=off).copy()
    q = np.frombuffer(
        data, dtype=dtype, count=count, offset=off + count * dtype.itemsize
    ).copy()
    return IqTimeSeries(
        band_index=header["band_index"],
        tone_index=header["tone_index"],
        freq_word=header["freq_word"],
        i=i,
        q=q,
        rate_hz=header["fs_hz"],
        l_avg=header["l_avg"],
        demod_mode=DemodMode(header["demod_mode"]),
        n_discarded=header["n_discarded"],
    )


# ---------------------------------------------------------------------------
# spectra and spur reports


def spectrum_to_csv(spec: Spectrum, config_hash: str = "") -> str:
    meta = (
        f"# method={spec.method.value} window={spec.window.value} "
        f"units={spec.units.value} n_points={spec.n_points} "
        f"bin_hz={_fmt_float(spec.bin_hz)}"
    )
    if spec.segment_len is not None:
        meta += f" segment_len={spec.segment_len} overlap_frac={_fmt_float(spec.overlap_frac)}"
    if config_hash:
        meta += f" config_hash={config_hash}"
    rows = [meta, "freq_hz,value"]
    freqs = spec.freqs_hz
    for f, v in zip(freqs, spec.values):
        rows.append(f"{_fmt_float(f)},{_fmt_float(v)}")
    return "\n".join(rows) + "\n"


def spectrum_from_csv(text: str) -> Spectrum:
    meta: dict[str, str] = {}
    vals = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for part in line[1:].split():
                if "=" in part:
                    k, v = part.split("=", 1)
                    meta[k] = v
            continue
        if line.startswith("freq_hz"):
            continue
        vals.append(float(line.split(",")[1]))
    seg = meta.get("segment_len")
    ov = meta.get("overlap_frac")
    return Spectrum(
        n_points=int(meta["n_points"]),
        bin_hz=float(meta["bin_hz"]),
        values=np.array(vals),
        units=SpectrumUnits(meta["units"]),
        window=SpectrumWindow(meta["window"]),
        method=PsdMethod(meta["method"]),
        segment_len=int(seg) if seg is not None else None,
        overlap_frac=float(ov) if ov is not None else None,
    )


def spur_report_to_json(report: SpurReport) -> str:
    return json.dumps(
        {
            "floor": report.floor,
            "lines": [
                {"freq_hz": l.freq_hz, "level_db": l.level_db, "bin": l.bin}
                for l in report.lines
            ],
            "predicted": [[f, tag] for f, tag in report.predicted],
        },
        sort_keys=True,
        separators=(",", ":"),
    )


# ---------------------------------------------------------------------------
# scenario config INI


def config_dict_to_ini(d: dict) -> str:
    """Flat key=value sections mirroring the config dictionary."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["scenario"] = {
        "name": d["scenario_name"],
        "seed": str(d["seed"]),
        "acquisition_len": str(d["acquisition_len"]),
        "warmup_windows": str(d["warmup_windows"]),
    }
    g = d["generator"]
    gen = {
        "n_bands": str(g["n_bands"]),
        "tones_per_band": str(g["tones_per_band"]),
        "l_acc": str(g["L_acc"]),
        "band_rate_hz": _fmt_float(g["band_rate_hz"]),
        "upsample_factor": str(g["upsample_factor"]),
        "shifter_lut_len": str(g["shifter_lut_len"]),
    }
    if g["sum_width_bits"] is not None:
        gen["sum_width_bits"] = str(g["sum_width_bits"])
    cp["generator"] = gen
    c = g["cordic"]
    cor = {
        "data_bits": str(c["data_bits"]),
        "iterations": str(c["iterations"]),
        "guard_bits": str(c["guard_bits"]),
    }
    if c["angle_bits"] is not None:
        cor["angle_bits"] = str(c["angle_bits"])
    cp["generator.cordic"] = cor
    if g["interp_filter"] is not None:
        cp["generator.interp_filter"] = _filter_to_section(g["interp_filter"])
    a = d["analyzer"]
    ana = {
        "decim_to_band": str(a["decim_to_band"]),
        "l_avg": str(a["L_avg"]),
        "demod_mode": a["demod_mode"],
        "n_bands": str(a["n_bands"]),
        "band_rate_hz": _fmt_float(a["band_rate_hz"]),
        "wide_width_bits": str(a["wide_width_bits"]),
        "reference_bits": str(a["reference_bits"]),
        "shifter_lut_len": str(a["shifter_lut_len"]),
    }
    if a["accumulator_width_bits"] is not None:
        ana["accumulator_width_bits"] = str(a["accumulator_width_bits"])
    cp["analyzer"] = ana
    if a["channelizer_filter"] is not None:
        cp["analyzer.channelizer_filter"] = _filter_to_section(a["channelizer_filter"])
    cp["tones"] = {
        f"tone_{n}": (
            f"{t['band_index']},{t['tone_index']},{t['freq_word']},{t['amplitude_raw']}"
        )
        for n, t in enumerate(d["tones"])
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _filter_to_section(f: dict) -> dict[str, str]:
    return {
        "taps": ",".join(str(t) for t in f["taps"]),
        "total_bits": str(f["total_bits"]),
        "frac_bits": str(f["frac_bits"]),
        "description": f["description"],
    }


def _filter_from_section(sec) -> dict:
    return {
        "taps": [int(t) for t in sec["taps"].split(",")],
        "total_bits": int(sec["total_bits"]),
        "frac_bits": int(sec["frac_bits"]),
        "description": sec.get("description", ""),
    }


def config_dict_from_ini(text: str) -> dict:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config file: {e}") from e
    try:
        s = cp["scenario"]
        g = cp["generator"]
        c = cp["generator.cordic"]
        a = cp["analyzer"]
        tones = []
        for key in sorted(cp["tones"], key=lambda k: int(k.rsplit("_", 1)[1])):
            b, t, w, amp = cp["tones"][key].split(",")
            tones.append(
                {
                    "band_index": int(b),
                    "tone_index": int(t),
                    "freq_word": int(w),
                    "amplitude_raw": int(amp),
                }
            )
        return {
            "scenario_name": s["name"],
            "seed": int(s["seed"]),
            "acquisition_len": int(s["acquisition_len"]),
            "warmup_windows": int(s.get("warmup_windows", "1")),
            "generator": {
                "n_bands": int(g["n_bands"]),
                "tones_per_band": int(g["tones_per_band"]),
                "L_acc": int(g["l_acc"]),
                "band_rate_hz": float(g["band_rate_hz"]),
                "upsample_factor": int(g["upsample_factor"]),
                "shifter_lut_len": int(g["shifter_lut_len"]),
                "sum_width_bits": (
                    int(g["sum_width_bits"]) if "sum_width_bits" in g else None
                ),
                "cordic": {
                    "data_bits": int(c["data_bits"]),
                    "iterations": int(c["iterations"]),
                    "angle_bits": int(c["angle_bits"]) if "angle_bits" in c else None,
                    "guard_bits": int(c.get("guard_bits", "0")),
                },
                "interp_filter": (
                    _filter_from_section(cp["generator.interp_filter"])
                    if cp.has_section("generator.interp_filter")
                    else None
                ),
            },
            "analyzer": {
                "decim_to_band": int(a["decim_to_band"]),
                "L_avg": int(a["l_avg"]),
                "demod_mode": a["demod_mode"],
                "n_bands": int(a["n_bands"]),
                "band_rate_hz": float(a["band_rate_hz"]),
                "wide_width_bits": int(a["wide_width_bits"]),
                "reference_bits": int(a["reference_bits"]),
                "shifter_lut_len": int(a["shifter_lut_len"]),
                "channelizer_filter": (
                    _filter_from_section(cp["analyzer.channelizer_filter"])
                    if cp.has_section("analyzer.channelizer_filter")
                    else None
                ),
                "accumulator_width_bits": (
                    int(a["accumulator_width_bits"])
                    if "accumulator_width_bits" in a
                    else None
                ),
            },
            "tones": tones,
        }
    except (KeyError, ValueError) as e:
        raise ConfigError(f"config file missing or malformed key: {e}") from e


# ---------------------------------------------------------------------------
# plain sample files (CLI psd/deglitch inputs)


def read_samples(path: str) -> np.ndarray:
    """Read one real-valued series from an I/Q CSV/binary file (the I
    column) or a bare one-column CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _BIN_MAGIC:
        with open(path, "rb") as fh:
            series = series_from_binary(fh.read())
        return np.asarray(series.i, dtype=np.float64)
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    rows = [
        ln.strip()
        for ln in text.splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if rows and rows[0].startswith(("index", "freq_hz", "value")):
        rows = rows[1:]
    vals = []
    for ln in rows:
        parts = ln.split(",")
        vals.append(float(parts[1]) if len(parts) > 1 else float(parts[0]))
    if not vals:
        raise ConfigError(f"no samples found in {path}")
    return np.array(vals, dtype=np.float64)


def write_samples_csv(x: Iterable[float]) -> str:
    rows = ["index,value"]
    for n, v in enumerate(x):
        rows.append(f"{n},{_fmt_float(v)}")
    return "\n".join(rows) + "\n"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
