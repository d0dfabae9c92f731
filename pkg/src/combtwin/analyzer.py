"""Loopback analysis path.

Channelizes the wideband stream back into band-rate subbands (mix, FIR,
decimate, re-shift), demodulates each tone against its regenerated
reference (full-precision sine DDC or sign-only square wave), and
boxcar-accumulates L_avg products per output sample. Accumulator outputs
are undivided integer sums; normalization happens in the metrics layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .fxp import ConfigError, Rounding, saturate, shift_right
from .generator import FilterSpec, cmul_lut, design_windowed_sinc, make_lut


class DemodMode(Enum):
    SINE_DDC = "sine"
    SQUARE_WAVE = "square"


@dataclass(frozen=True)
class AnalyzerConfig:
    """Sizing of the analysis path.

    decim_to_band must equal the exciter's upsample factor; wide_width_bits
    must match the wideband stream format it produces. The default
    channelizer is a 127-tap windowed sinc passing one band width.
    """

    decim_to_band: int = 8
    L_avg: int = 65536
    demod_mode: DemodMode = DemodMode.SINE_DDC
    n_bands: int = 10
    band_rate_hz: float = 250e6
    wide_width_bits: int = 20
    reference_bits: int = 10
    shifter_lut_len: int = 40
    channelizer_filter: FilterSpec | None = None
    accumulator_width_bits: int | None = None

    def __post_init__(self) -> None:
        if self.decim_to_band < 1:
            raise ConfigError("decim_to_band must be >= 1")
        if self.L_avg < 1:
            raise ConfigError("L_avg must be >= 1")
        if self.n_bands < 1:
            raise ConfigError("n_bands must be >= 1")
        if self.band_rate_hz <= 0:
            raise ConfigError("band_rate_hz must be > 0")
        if not (2 <= self.wide_width_bits <= 32):
            raise ConfigError("wide_width_bits must be in 2..32")
        if self.shifter_lut_len % (5 * self.decim_to_band) != 0:
            raise ConfigError(
                "shifter_lut_len must be a multiple of 5*decim_to_band so every "
                "band center is an integer number of LUT cycles"
            )
        acc = self.resolved_accumulator_width
        need = self.ddc_product_bits + max(1, math.ceil(math.log2(self.L_avg)))
        if acc < need:
            raise ConfigError(
                f"accumulator_width_bits {acc} < {need} required for "
                f"overflow-free accumulation over L_avg={self.L_avg}"
            )
        if acc > 63:
            raise ConfigError("accumulator_width_bits must be <= 63 (int64 exactness)")

    @property
    def ddc_product_bits(self) -> int:
        # subband * reference product plus one carry bit for the two-term sum
        return self.wide_width_bits + self.reference_bits + 1

    @property
    def resolved_accumulator_width(self) -> int:
        if self.accumulator_width_bits is not None:
            return self.accumulator_width_bits
        return self.ddc_product_bits + max(1, math.ceil(math.log2(self.L_avg)))

    @property
    def fs_hz(self) -> float:
        return self.band_rate_hz / self.L_avg

    def resolved_channelizer_filter(self) -> FilterSpec:
        if self.channelizer_filter is not None:
            return self.channelizer_filter
        # passband edge = one band half-width (band_rate/5) at the full rate
        return design_windowed_sinc(
            num_taps=127,
            cutoff_cycles=1.0 / (5 * self.decim_to_band),
            gain=1.0,
            coeff_bits=18,
        )


@dataclass(frozen=True)
class IqTimeSeries:
    """Accumulated (undivided) I/Q sums for one tone at the output rate fs."""

    band_index: int
    tone_index: int
    freq_word: int
    i: np.ndarray
    q: np.ndarray
    rate_hz: float
    l_avg: int
    demod_mode: DemodMode
    n_discarded: int = 0

    def __post_init__(self) -> None:
        if len(self.i) != len(self.q):
            raise ConfigError("i and q must have equal length")

    def __len__(self) -> int:
        return len(self.i)

    def complex_values(self) -> np.ndarray:
        return self.i.astype(np.float64) + 1j * self.q.astype(np.float64)


# ---------------------------------------------------------------------------
# channelizer


def _fir_decimate_direct(
    i: np.ndarray, q: np.ndarray, spec: FilterSpec, decim: int, stream_bits: int
) -> tuple[np.ndarray, np.ndarray]:
    h = spec.taps_array()
    yi = np.convolve(i, h)[: len(i)]
    yq = np.convolve(q, h)[: len(q)]
    yi = shift_right(yi, spec.shift, Rounding.TRUNCATE_TOWARD_NEG_INF)
    yq = shift_right(yq, spec.shift, Rounding.TRUNCATE_TOWARD_NEG_INF)
    return saturate(yi, stream_bits)[::decim], saturate(yq, stream_bits)[::decim]


def _polyphase_branch_input(x: np.ndarray, r: int, decim: int, n_out: int) -> np.ndarray:
    if r == 0:
        return x[::decim][:n_out]
    out = np.zeros(n_out, dtype=np.int64)
    src = x[decim - r :: decim]
    out[1:] = src[: n_out - 1]
    return out


def _fir_decimate_polyphase(
    i: np.ndarray, q: np.ndarray, spec: FilterSpec, decim: int, stream_bits: int
) -> tuple[np.ndarray, np.ndarray]:
    """Compute only the retained outputs: y[m*D] = sum_r (h_r * x_r)[m].

    Branch sums are exact integers, so the final shift-and-saturate sees
    the same value as the direct path and the result is bit-identical.
    """
    h = spec.taps_array()
    n_out = (len(i) + decim - 1) // decim
    acc_i = np.zeros(n_out, dtype=np.int64)
    acc_q = np.zeros(n_out, dtype=np.int64)
    for r in range(decim):
        hr = h[r::decim]
        if hr.size == 0:
            continue
        xi = _polyphase_branch_input(i, r, decim, n_out)
        xq = _polyphase_branch_input(q, r, decim, n_out)
        acc_i += np.convolve(xi, hr)[:n_out]
        acc_q += np.convolve(xq, hr)[:n_out]
    acc_i = shift_right(acc_i, spec.shift, Rounding.TRUNCATE_TOWARD_NEG_INF)
    acc_q = shift_right(acc_q, spec.shift, Rounding.TRUNCATE_TOWARD_NEG_INF)
    return saturate(acc_i, stream_bits), saturate(acc_q, stream_bits)


def channelize(
    wideband: tuple[np.ndarray, np.ndarray],
    band_index: int,
    cfg: AnalyzerConfig,
    method: str = "polyphase",
) -> tuple[np.ndarray, np.ndarray]:
    """Extract one band back onto the exciter's tone grid at band rate.

    Mix by the conjugate band-center exponential, lowpass, decimate by D,
    then shift up by band_rate/5 to undo the exciter's down-shift. The
    polyphase method is the default and is bit-identical to "direct".
    """
    if not (0 <= band_index < cfg.n_bands):
        raise ConfigError(f"band_index {band_index} out of range 0..{cfg.n_bands - 1}")
    if method not in ("polyphase", "direct"):
        raise ConfigError("method must be 'polyphase' or 'direct'")
    wi, wq = wideband
    w = cfg.wide_width_bits
    lut_len = cfg.shifter_lut_len
    cycles = lut_len * (2 * band_index + 1) // (5 * cfg.decim_to_band)
    li, lq = make_lut(lut_len, cycles, w, sign=-1)
    idx = np.arange(len(wi)) % lut_len
    mi, mq = cmul_lut(wi, wq, li[idx], lq[idx], w, w)
    spec = cfg.resolved_channelizer_filter()
    if method == "direct":
        bi, bq = _fir_decimate_direct(mi, mq, spec, cfg.decim_to_band, w)
    else:
        bi, bq = _fir_decimate_polyphase(mi, mq, spec, cfg.decim_to_band, w)
    ri, rq = make_lut(5, 1, w, sign=+1)
    ridx = np.arange(len(bi)) % 5
    return cmul_lut(bi, bq, ri[ridx], rq[ridx], w, w)


# ---------------------------------------------------------------------------
# demodulation


def _boxcar_sums(
    yi: np.ndarray, yq: np.ndarray, l_avg: int
) -> tuple[np.ndarray, np.ndarray, int]:
    n_win = len(yi) // l_avg
    n_disc = len(yi) - n_win * l_avg
    ii = yi[: n_win * l_avg].reshape(n_win, l_avg).sum(axis=1)
    qq = yq[: n_win * l_avg].reshape(n_win, l_avg).sum(axis=1)
    return ii, qq, n_disc


def ddc_sine(
    subband: tuple[np.ndarray, np.ndarray],
    reference: tuple[np.ndarray, np.ndarray],
    l_avg: int,
    *,
    band_index: int = 0,
    tone_index: int = 0,
    freq_word: int = 0,
    band_rate_hz: float = 250e6,
) -> IqTimeSeries:
    """Multiply by the conjugate reference, then boxcar-accumulate.

    Two real multiplies per output component, products kept exact (no
    rounding before accumulation); one output per l_avg inputs, trailing
    partial window discarded and counted.
    """
    fi, fq = subband
    ci, cq = reference
    if len(fi) != len(ci) or len(fq) != len(cq):
        raise ConfigError("subband and reference must have equal length")
    yi = fi * ci + fq * cq
    yq = fq * ci - fi * cq
    ii, qq, n_disc = _boxcar_sums(yi, yq, l_avg)
    return IqTimeSeries(
        band_index=band_index,
        tone_index=tone_index,
        freq_word=freq_word,
        i=ii,
        q=qq,
        rate_hz=band_rate_hz / l_avg,
        l_avg=l_avg,
        demod_mode=DemodMode.SINE_DDC,
        n_discarded=n_disc,
    )


def ddc_square(
    subband: tuple[np.ndarray, np.ndarray],
    reference: tuple[np.ndarray, np.ndarray],
    l_avg: int,
    *,
    band_index: int = 0,
    tone_index: int = 0,
    freq_word: int = 0,
    band_rate_hz: float = 250e6,
) -> IqTimeSeries:
    """Sign-only demodulation: multiply by the MSB square waves of the
    reference (sign(0) = +1), conjugate convention as ddc_sine, add and
    subtract only, then boxcar-accumulate."""
    fi, fq = subband
    ci, cq = reference
    if len(fi) != len(ci) or len(fq) != len(cq):
        raise ConfigError("subband and reference must have equal length")
    sc = np.where(ci >= 0, np.int64(1), np.int64(-1))
    ss = np.where(cq >= 0, np.int64(1), np.int64(-1))
    yi = sc * fi + ss * fq
    yq = sc * fq - ss * fi
    ii, qq, n_disc = _boxcar_sums(yi, yq, l_avg)
    return IqTimeSeries(
        band_index=band_index,
        tone_index=tone_index,
        freq_word=freq_word,
        i=ii,
        q=qq,
        rate_hz=band_rate_hz / l_avg,
        l_avg=l_avg,
        demod_mode=DemodMode.SQUARE_WAVE,
        n_discarded=n_disc,
    )


def boxcar_response(L: int, f_norm: float) -> float:
    """|sum_{n<L} e^(j 2 pi f n)| / L, the averaging filter's magnitude.

    Closed form sin(pi L f) / (L sin(pi f)); exact 1 at f = 0 and exact 0
    at nonzero multiples of 1/L.
    """
    if L < 1:
        raise ConfigError("L must be >= 1")
    if not (0.0 <= f_norm < 1.0):
        raise ConfigError("f_norm must be in [0, 1)")
    if f_norm == 0.0:
        return 1.0
    ratio = L * f_norm
    # exact zero at the boxcar nulls despite floating-point sin
    if abs(ratio - round(ratio)) < 1e-9 and round(ratio) % L != 0:
        return 0.0
    return abs(math.sin(math.pi * ratio) / (L * math.sin(math.pi * f_norm)))
