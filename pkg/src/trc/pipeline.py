"""The dynamic compression loop and the container file format.

One file becomes B contiguous lanes coded side by side into a single
arithmetic stream by one shared model. Each lane's first c*g bytes are
coded uniformly (the model needs that much history before it can speak);
after that, every global step codes one byte per active lane with the
model's pre-update prediction, then the mean loss across lanes gates one
optimizer step. Decompression replays the identical loop, so the model
trajectories match bit for bit and no weights are ever stored.

Container layout (little-endian, fixed width, payload immediately after):
magic "TRCE", version u8, hidden u16, ffn u16, group u16, context u16,
ffn_repeats u16, heads u16, lanes u16, lr f32, controller u8, cache u16,
seed u64, original_length u64, payload crc32 u32.
"""

from __future__ import annotations

import math
import struct
import time
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .coder import Decoder, Encoder, QuantizedDistribution, UNIFORM, quantize
from .controller import DecisionStats, LossCache, should_backprop
from .controller import skip_fraction as _skip_fraction
from .model import ModelConfig, TraceModel, forward_probs, nll_loss
from .nn import adam_step, backward

MAGIC = b"TRCE"
VERSION = 1
_HEADER = struct.Struct("<4sB7HfBHQQI")
HEADER_SIZE = _HEADER.size


class ContainerError(ValueError):
    """Base for every malformed-container complaint."""


class BadMagicError(ContainerError):
    pass


class UnsupportedVersionError(ContainerError):
    pass


class ChecksumMismatchError(ContainerError):
    pass


class TruncatedPayloadError(ContainerError):
    pass


@dataclass(frozen=True)
class ContainerHeader:
    config: ModelConfig
    lanes: int
    lr: float
    controller_enabled: bool
    cache_capacity: int
    seed: int
    original_length: int
    checksum: int

    def pack(self) -> bytes:
        c = self.config
        return _HEADER.pack(
            MAGIC, VERSION, c.hidden_dim, c.ffn_dim, c.group_size,
            c.context_len, c.shared_ffn_repeats, c.num_heads, self.lanes,
            self.lr, int(self.controller_enabled), self.cache_capacity,
            self.seed, self.original_length, self.checksum)

    @classmethod
    def unpack(cls, blob: bytes) -> tuple["ContainerHeader", bytes]:
        """Split a container into (header, payload), checking frame fields.

        Magic and version are rejected before anything else is trusted;
        payload integrity (checksum) is the caller's second gate."""
        if len(blob) >= 4 and blob[:4] != MAGIC:
            raise BadMagicError(f"not a container: magic {blob[:4]!r}")
        if len(blob) < HEADER_SIZE:
            raise TruncatedPayloadError(
                f"container is {len(blob)} bytes, header alone needs {HEADER_SIZE}")
        (magic, version, h, ffn, g, c, n, heads, lanes, lr, ctrl, cache,
         seed, length, crc) = _HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise BadMagicError(f"not a container: magic {magic!r}")
        if version != VERSION:
            raise UnsupportedVersionError(f"container version {version}, expected {VERSION}")
        config = ModelConfig(hidden_dim=h, ffn_dim=ffn, group_size=g,
                             context_len=c, shared_ffn_repeats=n, num_heads=heads)
        header = cls(config=config, lanes=lanes, lr=lr,
                     controller_enabled=bool(ctrl), cache_capacity=cache,
                     seed=seed, original_length=length, checksum=crc)
        return header, blob[HEADER_SIZE:]


def segment_lanes(length: int, lanes: int) -> list[tuple[int, int]]:
    """Contiguous balanced partition of [0, length): the first length % lanes
    lanes are one byte longer. Lanes beyond the input are empty and inactive."""
    if lanes < 1:
        raise ValueError(f"need at least one lane, got {lanes}")
    base, extra = divmod(length, lanes)
    out = []
    off = 0
    for i in range(lanes):
        size = base + (1 if i < extra else 0)
        out.append((off, size))
        off += size
    return out


@dataclass
class ChunkMetrics:
    steps: int
    bytes_in: int
    bits_out: int
    mean_loss: float
    skip_count: int
    wall_s: float


@dataclass
class StreamMetrics:
    """Per-chunk trace of a job; chunks cover main-loop steps only, warm-up
    totals are carried separately so bits always reconcile."""

    chunk_steps: int
    warmup_bytes: int = 0
    warmup_bits: int = 0
    chunks: list = field(default_factory=list)

    @property
    def total_bytes_in(self) -> int:
        return self.warmup_bytes + sum(c.bytes_in for c in self.chunks)

    @property
    def total_bits_out(self) -> int:
        return self.warmup_bits + sum(c.bits_out for c in self.chunks)


class DistributionProbe:
    """Order-sensitive digest of every (distribution, symbol) pair the coder
    handles, plus the ideal cost of that pairing in bits.

    Lets a test prove the decoder saw the exact frequency sequence the
    encoder used without holding a million arrays in memory."""

    __slots__ = ("digest", "count", "cost_bits")

    def __init__(self):
        self.digest = 0
        self.count = 0
        self.cost_bits = 0.0

    def observe(self, q: QuantizedDistribution, sym: int) -> None:
        self.digest = zlib.crc32(q.freq.astype("<u4").tobytes() + bytes([sym]),
                                 self.digest)
        self.count += 1
        self.cost_bits += 16.0 - math.log2(int(q.freq[sym]))


@dataclass
class CompressResult:
    container: bytes
    metrics: StreamMetrics
    stats: DecisionStats

    @property
    def skip_fraction(self) -> float:
        return _skip_fraction(self.stats) if self.stats.decisions else 0.0


@dataclass
class DecompressResult:
    data: bytes
    stats: DecisionStats


def _check_job_args(lanes, lr, cache_capacity, seed):
    if not 1 <= lanes <= 0xFFFF:
        raise ValueError(f"lanes must be in [1, 65535], got {lanes}")
    if not lr > 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not 1 <= cache_capacity <= 0xFFFF:
        raise ValueError(f"cache capacity must be in [1, 65535], got {cache_capacity}")
    if not 0 <= seed < 1 << 64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")


class _Job:
    """Shared loop state: lane geometry, model, controller, metrics clock."""

    def __init__(self, header: ContainerHeader, chunk_steps: int):
        if chunk_steps < 1:
            raise ValueError(f"chunk_steps must be positive, got {chunk_steps}")
        self.header = header
        self.model = TraceModel(header.config, header.seed)
        self.params = self.model.parameters()
        self.cache = LossCache(header.cache_capacity)
        self.stats = DecisionStats()
        self.metrics = StreamMetrics(chunk_steps=chunk_steps)
        window = header.config.window
        segs = segment_lanes(header.original_length, header.lanes)
        self.offsets = np.array([o for o, _ in segs], dtype=np.int64)
        self.lengths = np.array([n for _, n in segs], dtype=np.int64)
        self.warm = np.minimum(self.lengths, window)
        self.main_lens = self.lengths - self.warm
        self.max_steps = int(self.main_lens.max()) if len(segs) else 0
        self.window = window

    def step_lanes(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """Active lane indices and the absolute position each codes at step s."""
        idx = np.nonzero(self.main_lens > s)[0]
        pos = self.offsets[idx] + self.warm[idx] + s
        return idx, pos

    def histories(self, buf: np.ndarray, pos: np.ndarray) -> np.ndarray:
        cols = np.arange(-self.window, 0, dtype=np.int64)
        return buf[pos[:, None] + cols[None, :]].astype(np.int64)

    def update(self, probs_tensor, targets: np.ndarray) -> tuple[float, bool]:
        """Mean-loss gate plus the (possibly skipped) optimizer step."""
        loss = nll_loss(probs_tensor, targets)
        e = float(loss.data)
        if self.header.controller_enabled:
            do = should_backprop(self.cache, e)
        else:
            do = True
        self.stats.record(do)
        if do:
            backward(loss)
            adam_step(self.params, self.header.lr)
        return e, do


def compress(data: bytes, config: ModelConfig = ModelConfig(), *,
             seed: int, lanes: int = 64, lr: float = 1e-3,
             controller: bool = False, cache_capacity: int = 16,
             chunk_steps: int = 256,
             probe: DistributionProbe | None = None) -> CompressResult:
    """Code `data` into a self-describing container.

    The stored learning rate is the float32 the header can carry, and the
    encoder optimizes with that exact value, so the decoder's replay is
    bit-identical."""
    _check_job_args(lanes, lr, cache_capacity, seed)
    lr32 = float(np.float32(lr))
    if not lr32 > 0.0:
        raise ValueError(f"learning rate {lr} rounds to zero in float32")
    header = ContainerHeader(config=config, lanes=lanes, lr=lr32,
                             controller_enabled=controller,
                             cache_capacity=cache_capacity, seed=seed,
                             original_length=len(data), checksum=0)
    job = _Job(header, chunk_steps)
    buf = np.frombuffer(data, dtype=np.uint8)
    enc = Encoder()

    for lane in range(lanes):
        off = int(job.offsets[lane])
        for j in range(int(job.warm[lane])):
            sym = int(buf[off + j])
            if probe is not None:
                probe.observe(UNIFORM, sym)
            enc.encode_symbol(sym, UNIFORM)
    job.metrics.warmup_bytes = int(job.warm.sum())
    job.metrics.warmup_bits = enc.bits_written

    chunk_start = time.perf_counter()
    steps = coded = skip = 0
    loss_sum = 0.0
    bits_mark = enc.bits_written

    def close_chunk():
        nonlocal steps, coded, skip, loss_sum, bits_mark, chunk_start
        now = time.perf_counter()
        job.metrics.chunks.append(ChunkMetrics(
            steps=steps, bytes_in=coded, bits_out=enc.bits_written - bits_mark,
            mean_loss=loss_sum / steps, skip_count=skip,
            wall_s=now - chunk_start))
        steps = coded = skip = 0
        loss_sum = 0.0
        bits_mark = enc.bits_written
        chunk_start = now

    for s in range(job.max_steps):
        idx, pos = job.step_lanes(s)
        probs_tensor = forward_probs(job.model, job.histories(buf, pos))
        probs = probs_tensor.data
        targets = buf[pos].astype(np.int64)
        for j in range(len(idx)):
            q = quantize(probs[j])
            sym = int(targets[j])
            if probe is not None:
                probe.observe(q, sym)
            enc.encode_symbol(sym, q)
        e, did = job.update(probs_tensor, targets)
        steps += 1
        coded += len(idx)
        loss_sum += e
        skip += 0 if did else 1
        if steps == chunk_steps:
            close_chunk()

    if steps:
        close_chunk()

    payload = enc.finish() if len(data) else b""
    if len(data) and job.metrics.chunks:
        # trailer and padding bits belong to the last coded chunk
        job.metrics.chunks[-1].bits_out += enc.bits_written - bits_mark
    elif len(data):
        job.metrics.warmup_bits = enc.bits_written
    header = replace(header, checksum=zlib.crc32(payload))
    return CompressResult(container=header.pack() + payload,
                          metrics=job.metrics, stats=job.stats)


def decompress(container: bytes,
               probe: DistributionProbe | None = None) -> DecompressResult:
    """Invert compress: parse, verify, re-seed, replay, reassemble."""
    header, payload = ContainerHeader.unpack(container)
    if zlib.crc32(payload) != header.checksum:
        raise ChecksumMismatchError(
            f"payload crc {zlib.crc32(payload):08x} != header {header.checksum:08x}")
    out = np.zeros(header.original_length, dtype=np.uint8)
    if header.original_length == 0:
        return DecompressResult(data=b"", stats=DecisionStats())
    job = _Job(header, chunk_steps=1 << 30)
    dec = Decoder(payload)

    for lane in range(header.lanes):
        off = int(job.offsets[lane])
        for j in range(int(job.warm[lane])):
            sym = dec.decode_symbol(UNIFORM)
            if probe is not None:
                probe.observe(UNIFORM, sym)
            out[off + j] = sym

    for s in range(job.max_steps):
        idx, pos = job.step_lanes(s)
        probs_tensor = forward_probs(job.model, job.histories(out, pos))
        probs = probs_tensor.data
        targets = np.empty(len(idx), dtype=np.int64)
        for j in range(len(idx)):
            q = quantize(probs[j])
            sym = dec.decode_symbol(q)
            if probe is not None:
                probe.observe(q, sym)
            targets[j] = sym
            out[pos[j]] = sym
        job.update(probs_tensor, targets)

    return DecompressResult(data=out.tobytes(), stats=job.stats)
