"""Synthetic photon-counting camera frames and their on-disk format.

A frame stack simulates single-photon-sensitive acquisition of the
biphoton field: per frame, a Poisson number of photon pairs is drawn from
a joint position sampler, each photon survives detection with probability
qe, positions map to pixels through the magnification and pixel pitch,
and an independent Poisson background is added per pixel. Counts are
stored as 16-bit integers; overflowing that depth is an error rather than
a silent clamp.

Generation is deterministic for a given seed independent of any
parallelism: frame k always consumes the dedicated substream derived from
(seed, k), with a fixed draw order inside the frame (pair count, sampler
draws, detection mask, background).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import FormatError, ParameterDomainError, SaturationError
from .optics import ExperimentParams, beam_widths
from .turbulence import TurbulenceParams

__all__ = [
    "FrameGeometry",
    "FrameStack",
    "CleanPairSampler",
    "TurbulentPairSampler",
    "clean_pair_sampler",
    "turbulent_pair_sampler",
    "generate_frames",
    "write_stack",
    "read_stack",
]

MAGIC = b"SPDCFRM1"
_HEADER = struct.Struct("<8sIIIIdddQ")
MAX_COUNT = np.iinfo(np.uint16).max


@dataclass
class FrameGeometry:
    """Sensor geometry. ``origin`` is the (column, row) pixel coordinate,
    possibly fractional, where the optical axis crosses the sensor; it
    defaults to the sensor center."""

    width: int = 512
    height: int = 512
    pixel_pitch: float = 16e-6
    magnification: float = 1.0
    origin: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ParameterDomainError("sensor dimensions must be positive")
        if self.pixel_pitch <= 0 or self.magnification <= 0:
            raise ParameterDomainError("pixel pitch and magnification must be positive")
        if self.origin is None:
            self.origin = (self.width / 2.0, self.height / 2.0)


@dataclass
class FrameStack:
    """A stack of photon-count frames plus the metadata needed to
    regenerate it. ``counts`` has shape (frame_count, height, width)."""

    geometry: FrameGeometry
    frame_count: int
    counts: np.ndarray
    metadata: dict = field(default_factory=dict)


@dataclass
class CleanPairSampler:
    """Draws photon-pair positions at plane z from the propagated double
    Gaussian: sum and difference coordinates are independent isotropic
    Gaussians of widths w(z) and sigma(z)."""

    w_z: float
    sigma_z: float
    z: float

    def draw(self, rng: np.random.Generator, n: int):
        S = self.w_z * rng.standard_normal((n, 2))
        D = self.sigma_z * rng.standard_normal((n, 2))
        return 0.5 * (S + D), 0.5 * (S - D)


@dataclass
class TurbulentPairSampler:
    """Clean pair positions displaced by one shared pair of random tilt
    kicks per draw call (one screen realization per frame).

    The kicks are drawn first, before the positions, so the substream
    layout is fixed; a plane at or before the screen (z <= d) leaves the
    positions clean since the photons are detected before crossing it.
    """

    w_z: float
    sigma_z: float
    z: float
    d: float
    r: float
    k_s: float

    def draw(self, rng: np.random.Generator, n: int):
        kicks = rng.standard_normal((2, 2)) / self.r
        S = self.w_z * rng.standard_normal((n, 2))
        D = self.sigma_z * rng.standard_normal((n, 2))
        rho_s = 0.5 * (S + D)
        rho_i = 0.5 * (S - D)
        lever = max(self.z - self.d, 0.0) / self.k_s
        if lever > 0.0:
            rho_s = rho_s + lever * kicks[0]
            rho_i = rho_i + lever * kicks[1]
        return rho_s, rho_i


def clean_pair_sampler(params: ExperimentParams, z: float) -> CleanPairSampler:
    bw = beam_widths(params, z)
    return CleanPairSampler(w_z=bw.w_z, sigma_z=bw.sigma_z, z=z)


def turbulent_pair_sampler(
    params: ExperimentParams, turb: TurbulenceParams, z: float
) -> TurbulentPairSampler:
    bw = beam_widths(params, z)
    return TurbulentPairSampler(
        w_z=bw.w_z, sigma_z=bw.sigma_z, z=z, d=turb.d, r=turb.r, k_s=turb.k_s
    )


def _pixelize(geometry: FrameGeometry, pts: np.ndarray):
    """Map physical (x, y) positions to integer pixel indices, dropping
    photons that land outside the sensor. Returns (ix, iy)."""
    scale = geometry.magnification / geometry.pixel_pitch
    ix = np.floor(pts[:, 0] * scale + geometry.origin[0]).astype(np.int64)
    iy = np.floor(pts[:, 1] * scale + geometry.origin[1]).astype(np.int64)
    keep = (ix >= 0) & (ix < geometry.width) & (iy >= 0) & (iy < geometry.height)
    return ix[keep], iy[keep]


def generate_frames(
    model,
    geometry: FrameGeometry,
    n_frames: int,
    pair_rate: float,
    background_rate: float,
    qe: float,
    seed: int,
) -> FrameStack:
    """Simulate a frame stack from a joint position sampler.

    Parameters
    ----------
    model : object
        Pair sampler with attribute ``z`` and method ``draw(rng, n)``
        returning (rho_s, rho_i) position arrays of shape (n, 2) in metres.
    pair_rate : float
        Mean photon pairs per frame (Poisson).
    background_rate : float
        Mean background counts per pixel per frame (Poisson).
    qe : float
        Per-photon detection probability, in (0, 1].

    Raises
    ------
    SaturationError
        If any pixel in any frame exceeds the 16-bit count depth.
    """
    if n_frames < 1:
        raise ParameterDomainError(f"n_frames must be >= 1, got {n_frames!r}")
    if pair_rate < 0 or background_rate < 0:
        raise ParameterDomainError("rates must be nonnegative")
    if not (0.0 < qe <= 1.0):
        raise ParameterDomainError(f"qe must be in (0, 1], got {qe!r}")

    H, W = geometry.height, geometry.width
    counts = np.zeros((n_frames, H, W), dtype=np.uint16)

    for k in range(n_frames):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), k)))
        n_pairs = int(rng.poisson(pair_rate))
        rho_s, rho_i = model.draw(rng, n_pairs)
        detect = rng.random(2 * n_pairs) < qe
        pts = np.concatenate([rho_s[detect[:n_pairs]], rho_i[detect[n_pairs:]]])
        ix, iy = _pixelize(geometry, pts)
        frame = np.bincount(iy * W + ix, minlength=H * W).reshape(H, W)
        if background_rate > 0:
            frame = frame + rng.poisson(background_rate, size=(H, W))
        peak = int(frame.max()) if frame.size else 0
        if peak > MAX_COUNT:
            raise SaturationError(
                f"frame {k} reaches {peak} counts in one pixel, above the "
                f"16-bit maximum {MAX_COUNT}"
            )
        counts[k] = frame

    metadata = {
        "z": float(getattr(model, "z", math.nan)),
        "seed": int(seed),
        "pair_rate": float(pair_rate),
        "background_rate": float(background_rate),
        "qe": float(qe),
    }
    return FrameStack(
        geometry=geometry, frame_count=n_frames, counts=counts, metadata=metadata
    )


def write_stack(stack: FrameStack, path) -> None:
    """Serialize a stack in the v1 format (see module docstring for the
    header layout); counts are little-endian u16, row-major, frame-major."""
    g = stack.geometry
    if stack.counts.shape != (stack.frame_count, g.height, g.width):
        raise FormatError(
            f"counts shape {stack.counts.shape} does not match geometry "
            f"({stack.frame_count}, {g.height}, {g.width})"
        )
    if stack.counts.max(initial=0) > MAX_COUNT or stack.counts.min(initial=0) < 0:
        raise FormatError("counts do not fit the unsigned 16-bit payload")
    header = _HEADER.pack(
        MAGIC,
        g.width,
        g.height,
        stack.frame_count,
        0,
        g.pixel_pitch,
        g.magnification,
        float(stack.metadata.get("z", 0.0)),
        int(stack.metadata.get("seed", 0)),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(stack.counts, dtype="<u2").tobytes())


def read_stack(path) -> FrameStack:
    """Read a v1 stack. Raises FormatError with the byte offset of the
    first problem found."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(
            f"file too short for the header: {len(blob)} bytes (offset {len(blob)})"
        )
    magic, width, height, n_frames, reserved, pitch, mag, z, seed = _HEADER.unpack_from(
        blob, 0
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0")
    if reserved != 0:
        raise FormatError("nonzero reserved field at offset 20")
    if width == 0 or height == 0 or n_frames == 0:
        raise FormatError("zero dimension in header at offset 8")
    expected = width * height * n_frames * 2
    actual = len(blob) - _HEADER.size
    if actual != expected:
        raise FormatError(
            f"payload holds {actual} bytes, expected {expected} "
            f"(truncation at offset {len(blob)})"
        )
    counts = (
        np.frombuffer(blob, dtype="<u2", offset=_HEADER.size)
        .reshape(n_frames, height, width)
        .copy()
    )
    geometry = FrameGeometry(
        width=int(width), height=int(height), pixel_pitch=pitch, magnification=mag
    )
    return FrameStack(
        geometry=geometry,
        frame_count=int(n_frames),
        counts=counts,
        metadata={"z": z, "seed": int(seed)},
    )
