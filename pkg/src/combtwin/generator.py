"""Frequency-comb excitation path.

Per-tone phase accumulator and CORDIC, per-band tone summation, -f_b/5
down-shift, xU zero-stuff interpolation, band shift via a sine/cosine
lookup table, and band addition into one wideband I/Q stream. All stages
run on raw integer codes (int64 arrays); stream formats are Q1.(w-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .fxp import (
    ConfigError,
    FxpFormat,
    FxpValue,
    IqSample,
    Overflow,
    Rounding,
    saturate,
    shift_right,
)


# ---------------------------------------------------------------------------
# configuration types


@dataclass(frozen=True)
class ToneConfig:
    """One excitation tone: placement and per-tone amplitude.

    freq_word k puts the tone at k * band_rate / L_acc Hz within its band.
    amplitude_code is a Q2.15 scale in [0, 1]; 1.0 (raw 32768) passes the
    CORDIC output through unchanged.
    """

    band_index: int
    tone_index: int
    freq_word: int
    amplitude_code: FxpValue = field(
        default_factory=lambda: FxpValue(32768, AMPLITUDE_FORMAT)
    )

    def __post_init__(self) -> None:
        if self.band_index < 0:
            raise ConfigError("band_index must be >= 0")
        if self.tone_index < 0:
            raise ConfigError("tone_index must be >= 0")
        if self.freq_word < 0:
            raise ConfigError("freq_word must be >= 0")
        if self.amplitude_code.raw < 0:
            raise ConfigError("amplitude_code must be >= 0")
        if self.amplitude_code.to_float() > 1.0:
            raise ConfigError("amplitude_code must be <= 1.0")


AMPLITUDE_FORMAT = FxpFormat(total_bits=17, frac_bits=15)


@dataclass(frozen=True)
class PhaseAccumulatorState:
    """Integer counter mod modulus; increment selects the tone frequency."""

    modulus: int
    increment: int
    phase: int = 0

    def __post_init__(self) -> None:
        if self.modulus < 1:
            raise ConfigError("modulus must be >= 1")
        if not (0 <= self.increment < self.modulus):
            raise ConfigError("increment must satisfy 0 <= increment < modulus")
        if not (0 <= self.phase < self.modulus):
            raise ConfigError("phase must satisfy 0 <= phase < modulus")


def phase_acc_step(state: PhaseAccumulatorState) -> tuple[PhaseAccumulatorState, int]:
    """Advance one sample; returns (new state, pre-step phase).

    The wrap is an explicit conditional subtraction, which is how a
    non-power-of-two modulus (e.g. 65520) is realized in hardware; for a
    power of two it degenerates to the same result as masking.
    """
    out = state.phase
    nxt = state.phase + state.increment
    if nxt >= state.modulus:
        nxt -= state.modulus
    return replace(state, phase=nxt), out


def phase_words(modulus: int, increment: int, n: int, start: int = 0) -> np.ndarray:
    """Vectorized phase sequence; bit-identical to stepping n times."""
    return (start + increment * np.arange(n, dtype=np.int64)) % modulus


@dataclass(frozen=True)
class CordicConfig:
    """Rotation-mode CORDIC sizing.

    angle_bits defaults to data_bits - 1, which puts the angle resolution
    at the level where the output quantization dominates; this is what
    produces the iteration-count SFDR plateau. Arctan table entries are
    clamped to >= 1 angle LSB so every iteration rotates by a nonzero
    amount for any iteration count.
    """

    data_bits: int
    iterations: int
    angle_bits: int | None = None
    guard_bits: int = 0

    def __post_init__(self) -> None:
        if not (4 <= self.data_bits <= 24):
            raise ConfigError("data_bits must be in 4..24")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.angle_bits is not None and self.angle_bits < 4:
            raise ConfigError("angle_bits must be >= 4")
        if not (0 <= self.guard_bits <= 8):
            raise ConfigError("guard_bits must be in 0..8")

    @property
    def resolved_angle_bits(self) -> int:
        return self.data_bits - 1 if self.angle_bits is None else self.angle_bits


def cordic_gain(iterations: int) -> float:
    """K(n) = prod cos(arctan 2^-i); lies in (0.607, 1.0] for n >= 1."""
    return float(np.prod(np.cos(np.arctan(2.0 ** -np.arange(iterations)))))


def _arctan_table(iterations: int, angle_bits: int) -> list[int]:
    # angle unit: full circle = 2^angle_bits; entries clamped to >= 1
    scale = (1 << angle_bits) / (2.0 * math.pi)
    return [
        max(1, int(math.floor(math.atan(2.0 ** -i) * scale + 0.5)))
        for i in range(iterations)
    ]


def cordic_sincos_array(
    phases: np.ndarray, L_acc: int, cfg: CordicConfig
) -> tuple[np.ndarray, np.ndarray]:
    """(cos, sin) of 2*pi*phase/L_acc for an int64 phase array.

    Quadrant-folds the phase word with output sign fix-up, runs n
    rotation-mode iterations at angle_bits resolution, saturates to
    data_bits. A folded remainder of exactly 0 forces sin to 0 before
    reconstruction (the true value at a quadrant boundary).
    """
    if L_acc % 4 != 0:
        raise ConfigError("L_acc must be a multiple of 4 for quadrant folding")
    phases = np.asarray(phases, dtype=np.int64)
    if phases.size and (phases.min() < 0 or phases.max() >= L_acc):
        raise ValueError("phase out of range [0, L_acc)")
    b = cfg.data_bits
    n = cfg.iterations
    A = cfg.resolved_angle_bits
    g = cfg.guard_bits
    tab = _arctan_table(n, A)
    quarter = L_acc // 4
    quad = phases // quarter
    rem = phases - quad * quarter
    # z0: round-half-up of rem * 2^A / L_acc, in exact integers
    z = (rem * (np.int64(1) << np.int64(A + 1)) + L_acc) // (2 * L_acc)
    x0 = int(math.floor((1 << (b - 1 + g)) * cordic_gain(n) + 0.5))
    x = np.full_like(z, x0)
    y = np.zeros_like(z)
    for i in range(n):
        d = np.where(z >= 0, np.int64(1), np.int64(-1))
        x, y = x - d * (y >> np.int64(i)), y + d * (x >> np.int64(i))
        z = z - d * tab[i]
    y = np.where(rem == 0, np.int64(0), y)
    if g > 0:
        half = np.int64(1) << np.int64(g - 1)
        x = (x + half) >> np.int64(g)
        y = (y + half) >> np.int64(g)
    x = saturate(x, b)
    y = saturate(y, b)
    i_out = np.select([quad == 0, quad == 1, quad == 2], [x, -y, -x], default=y)
    q_out = np.select([quad == 0, quad == 1, quad == 2], [y, x, -y], default=-x)
    return i_out, q_out


def cordic_sincos(phase: int, L_acc: int, cfg: CordicConfig) -> IqSample:
    """Scalar wrapper around cordic_sincos_array."""
    if not (0 <= phase < L_acc):
        raise ValueError(f"phase {phase} out of range [0, {L_acc})")
    i_arr, q_arr = cordic_sincos_array(np.array([phase], dtype=np.int64), L_acc, cfg)
    fmt = FxpFormat(total_bits=cfg.data_bits, frac_bits=cfg.data_bits - 1)
    return IqSample(FxpValue(int(i_arr[0]), fmt), FxpValue(int(q_arr[0]), fmt))


# ---------------------------------------------------------------------------
# filters and lookup tables


@dataclass(frozen=True)
class FilterSpec:
    """Quantized linear-phase FIR: raw integer taps plus their format."""

    taps: tuple[int, ...]
    coeff_format: FxpFormat
    description: str

    def __post_init__(self) -> None:
        if len(self.taps) % 2 != 1:
            raise ConfigError("filter must have odd length")
        if list(self.taps) != list(reversed(self.taps)):
            raise ConfigError("filter must be symmetric (linear phase)")

    @property
    def shift(self) -> int:
        return self.coeff_format.frac_bits

    def taps_array(self) -> np.ndarray:
        return np.asarray(self.taps, dtype=np.int64)


def windowed_sinc_taps(num_taps: int, cutoff_cycles: float, gain: float = 1.0) -> np.ndarray:
    """Unquantized Hamming windowed-sinc lowpass taps."""
    m = np.arange(num_taps) - (num_taps - 1) / 2
    h = 2.0 * cutoff_cycles * np.sinc(2.0 * cutoff_cycles * m) * np.hamming(num_taps)
    return h * gain


def design_windowed_sinc(
    num_taps: int, cutoff_cycles: float, gain: float = 1.0, coeff_bits: int = 18
) -> FilterSpec:
    """Hamming windowed-sinc lowpass, coefficients quantized to Q2.(coeff_bits-2).

    cutoff_cycles is the -6 dB edge in cycles per sample at the filter's
    running rate. gain scales the passband (an interpolator uses gain = U
    to compensate zero-stuffing).
    """
    h = windowed_sinc_taps(num_taps, cutoff_cycles, gain)
    frac = coeff_bits - 2
    raw = np.floor(h * (1 << frac) + 0.5).astype(np.int64)
    fmt = FxpFormat(total_bits=coeff_bits, frac_bits=frac)
    return FilterSpec(
        taps=tuple(int(v) for v in raw),
        coeff_format=fmt,
        description=(
            f"{num_taps}-tap Hamming windowed sinc, cutoff {cutoff_cycles} "
            f"cycles/sample, gain {gain}, {coeff_bits}-bit coefficients"
        ),
    )


def fir_apply(
    i: np.ndarray, q: np.ndarray, spec: FilterSpec, stream_bits: int
) -> tuple[np.ndarray, np.ndarray]:
    """Causal length-preserving FIR in exact integers, then shift and saturate."""
    h = spec.taps_array()
    yi = np.convolve(i, h)[: len(i)]
    yq = np.convolve(q, h)[: len(q)]
    yi = shift_right(yi, spec.shift, Rounding.TRUNCATE_TOWARD_NEG_INF)
    yq = shift_right(yq, spec.shift, Rounding.TRUNCATE_TOWARD_NEG_INF)
    return saturate(yi, stream_bits), saturate(yq, stream_bits)


def make_lut(
    length: int, cycles: int, width: int, sign: int
) -> tuple[np.ndarray, np.ndarray]:
    """Complex exponential LUT: entry n = quantized e^(sign*j*2pi*cycles*n/length).

    Quantized to (2^(width-1)-1) * cos/sin with round-half-up.
    """
    if sign not in (+1, -1):
        raise ConfigError("sign must be +1 or -1")
    n = np.arange(length)
    ang = sign * 2.0 * np.pi * cycles * n / length
    sc = (1 << (width - 1)) - 1
    li = np.floor(sc * np.cos(ang) + 0.5).astype(np.int64)
    lq = np.floor(sc * np.sin(ang) + 0.5).astype(np.int64)
    return li, lq


def cmul_lut(
    xi: np.ndarray,
    xq: np.ndarray,
    li: np.ndarray,
    lq: np.ndarray,
    lut_width: int,
    out_bits: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample-wise complex multiply by LUT values.

    Four exact integer products, right shift by lut_width-1 (truncate
    toward -inf, the stream rounding default), saturate to out_bits.
    """
    pi = xi * li - xq * lq
    pq = xi * lq + xq * li
    sh = np.int64(lut_width - 1)
    pi = pi >> sh
    pq = pq >> sh
    return saturate(pi, out_bits), saturate(pq, out_bits)


# ---------------------------------------------------------------------------
# generator configuration


@dataclass(frozen=True)
class GeneratorConfig:
    """Sizing of the excitation path.

    The frequency plan puts band centers at odd multiples of
    band_rate/5 * 1/2 ... concretely center(b) = (2b+1) * full_rate /
    (5*U*2) * 2 = (2b+1)/(5*U) of the full rate, so each band spans
    2/5 of the band rate and the shifter LUT of length 5*U covers every
    center with an integer number of cycles.
    """

    n_bands: int = 10
    tones_per_band: int = 40
    L_acc: int = 65536
    band_rate_hz: float = 250e6
    upsample_factor: int = 8
    shifter_lut_len: int = 40
    cordic: CordicConfig = field(default_factory=lambda: CordicConfig(10, 10))
    interp_filter: FilterSpec | None = None
    sum_width_bits: int | None = None

    def __post_init__(self) -> None:
        if self.n_bands < 1:
            raise ConfigError("n_bands must be >= 1")
        if self.tones_per_band < 1:
            raise ConfigError("tones_per_band must be >= 1")
        if self.L_acc < 8 or self.L_acc % 4 != 0:
            raise ConfigError("L_acc must be >= 8 and a multiple of 4")
        if self.upsample_factor < 1:
            raise ConfigError("upsample_factor must be >= 1")
        if self.band_rate_hz <= 0:
            raise ConfigError("band_rate_hz must be > 0")
        for band in range(self.n_bands):
            cyc = self.shifter_lut_len * (2 * band + 1)
            if cyc % (5 * self.upsample_factor) != 0:
                raise ConfigError(
                    f"shifter LUT length {self.shifter_lut_len} does not hold an "
                    f"integer number of cycles for band {band}"
                )

    @property
    def full_rate_hz(self) -> float:
        return self.band_rate_hz * self.upsample_factor

    @property
    def resolved_sum_width(self) -> int:
        if self.sum_width_bits is not None:
            return self.sum_width_bits
        return self.cordic.data_bits + max(1, math.ceil(math.log2(self.tones_per_band)))

    @property
    def wide_width(self) -> int:
        return self.resolved_sum_width + max(1, math.ceil(math.log2(self.n_bands)))

    def band_center_fraction(self, band_index: int) -> Fraction:
        """Band center as an exact fraction of the full rate."""
        if not (0 <= band_index < self.n_bands):
            raise ConfigError(f"band_index {band_index} out of range")
        return Fraction(2 * band_index + 1, 5 * self.upsample_factor)

    def band_center_hz(self, band_index: int) -> float:
        return float(self.band_center_fraction(band_index) * Fraction(self.full_rate_hz))

    def resolved_interp_filter(self) -> FilterSpec:
        if self.interp_filter is not None:
            return self.interp_filter
        # cutoff band_rate/2 at full rate; gain U compensates zero-stuffing
        return design_windowed_sinc(
            num_taps=63,
            cutoff_cycles=1.0 / (2 * self.upsample_factor),
            gain=float(self.upsample_factor),
            coeff_bits=18,
        )


# ---------------------------------------------------------------------------
# pipeline stages


def tone_generate(
    tone: ToneConfig, cfg: GeneratorConfig, n_samples: int
) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude-scaled CORDIC output at band rate.

    Exactly periodic with period L_acc / gcd(L_acc, freq_word).
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    if tone.freq_word >= cfg.L_acc:
        raise ConfigError("freq_word must be < L_acc")
    ph = phase_words(cfg.L_acc, tone.freq_word, n_samples)
    ci, cq = cordic_sincos_array(ph, cfg.L_acc, cfg.cordic)
    amp = np.int64(tone.amplitude_code.raw)
    sh = np.int64(tone.amplitude_code.fmt.frac_bits)
    return (ci * amp) >> sh, (cq * amp) >> sh


def band_sum(
    tone_streams: Sequence[tuple[np.ndarray, np.ndarray]], sum_width_bits: int
) -> tuple[np.ndarray, np.ndarray]:
    """Exact integer sum of tone streams in the widened band format."""
    if not tone_streams:
        raise ConfigError("band_sum needs at least one stream")
    lengths = {len(s[0]) for s in tone_streams} | {len(s[1]) for s in tone_streams}
    if len(lengths) != 1:
        raise ConfigError("all streams must have equal length")
    bi = np.zeros(lengths.pop(), dtype=np.int64)
    bq = np.zeros_like(bi)
    for si, sq in tone_streams:
        bi = bi + si
        bq = bq + sq
    hi = (1 << (sum_width_bits - 1)) - 1
    if bi.size and (max(bi.max(), bq.max()) > hi or min(bi.min(), bq.min()) < -hi - 1):
        raise ConfigError("band_sum overflowed the configured sum width")
    return bi, bq


def down_shift(
    band: tuple[np.ndarray, np.ndarray], cfg: GeneratorConfig, start: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Multiply by e^(-j*2pi*n/5): shift the band down by band_rate/5."""
    bi, bq = band
    w = cfg.resolved_sum_width
    li, lq = make_lut(5, 1, w, sign=-1)
    idx = (start + np.arange(len(bi))) % 5
    return cmul_lut(bi, bq, li[idx], lq[idx], w, w)


def upsample_interp(
    band: tuple[np.ndarray, np.ndarray], cfg: GeneratorConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Zero-stuff by U and interpolate with the configured FIR.

    Output length is input length * U; for periodic input the steady
    state (past the first taps-1 samples) is periodic with U times the
    input period.
    """
    bi, bq = band
    u = cfg.upsample_factor
    w = cfg.resolved_sum_width
    ui = np.zeros(len(bi) * u, dtype=np.int64)
    uq = np.zeros(len(bq) * u, dtype=np.int64)
    ui[::u] = bi
    uq[::u] = bq
    return fir_apply(ui, uq, cfg.resolved_interp_filter(), w)


def band_shift(
    band: tuple[np.ndarray, np.ndarray],
    band_index: int,
    cfg: GeneratorConfig,
    start: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Multiply by the band-center exponential from the shifter LUT."""
    frac = cfg.band_center_fraction(band_index)  # validates band_index
    cycles = int(frac * cfg.shifter_lut_len)
    bi, bq = band
    w = cfg.resolved_sum_width
    li, lq = make_lut(cfg.shifter_lut_len, cycles, w, sign=+1)
    idx = (start + np.arange(len(bi))) % cfg.shifter_lut_len
    return cmul_lut(bi, bq, li[idx], lq[idx], w, w)


def band_add(
    shifted_bands: Sequence[tuple[np.ndarray, np.ndarray]],
) -> tuple[np.ndarray, np.ndarray]:
    """Exact widened sum of shifted bands: the wideband comb output."""
    if not shifted_bands:
        raise ConfigError("band_add needs at least one stream")
    lengths = {len(s[0]) for s in shifted_bands}
    if len(lengths) != 1:
        raise ConfigError("all streams must have equal length")
    wi = np.zeros(lengths.pop(), dtype=np.int64)
    wq = np.zeros_like(wi)
    for si, sq in shifted_bands:
        wi = wi + si
        wq = wq + sq
    return wi, wq


def waveform_period(L_acc: int, U: int, lut_len: int) -> int:
    """Analytic steady-state period of the wideband comb: lcm(L_acc*U, lut_len)."""
    if L_acc < 1 or U < 1 or lut_len < 1:
        raise ConfigError("all arguments must be >= 1")
    return math.lcm(L_acc * U, lut_len)


def generate_comb(
    cfg: GeneratorConfig,
    tones: Sequence[ToneConfig],
    n_band_samples: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the full excitation pipeline; returns the wideband I/Q stream.

    Bands with no configured tones contribute silence.
    """
    by_band: dict[int, list[ToneConfig]] = {}
    for t in tones:
        if t.band_index >= cfg.n_bands:
            raise ConfigError(
                f"tone band_index {t.band_index} >= n_bands {cfg.n_bands}"
            )
        by_band.setdefault(t.band_index, []).append(t)
    shifted = []
    for band_index in sorted(by_band):
        streams = [
            tone_generate(t, cfg, n_band_samples) for t in by_band[band_index]
        ]
        band = band_sum(streams, cfg.resolved_sum_width)
        band = down_shift(band, cfg)
        band = upsample_interp(band, cfg)
        shifted.append(band_shift(band, band_index, cfg))
    if not shifted:
        z = np.zeros(n_band_samples * cfg.upsample_factor, dtype=np.int64)
        return z, z.copy()
    return band_add(shifted)


def default_freq_words(L_acc: int, tones_per_band: int) -> list[int]:
    """Placement rule: odd words coprime to L_acc, evenly spread over the
    band's usable span (the lower 2/5 of the band rate)."""
    words = []
    for t in range(tones_per_band):
        k = int(0.4 * L_acc * (t + 0.5) / tones_per_band) | 1
        while math.gcd(k, L_acc) != 1:
            k += 2
        words.append(k)
    return words
