"""Latency, energy-per-query and peak-power measurement.

A run starts a power sampler, pushes every clip of a dataset through the
front-end and model one at a time, then stops the sampler. Energy and
peak power are reported above the idle baseline; latency comes from a
monotonic clock and never from trace timestamps.
"""
import csv
import io
import math
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from . import frontend as fe
from .errors import DatasetError, SamplerError, TraceError

DEFAULT_IDLE_WATTS = 1.9


@dataclass(frozen=True)
class PowerSample:
    t: float
    watts: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.watts)) or self.watts < 0:
            raise TraceError(f"invalid sample t={self.t} watts={self.watts}")


@dataclass(frozen=True)
class PowerTrace:
    samples: tuple
    idle_watts: float = DEFAULT_IDLE_WATTS

    def __post_init__(self):
        samples = tuple(s if isinstance(s, PowerSample) else PowerSample(*s) for s in self.samples)
        object.__setattr__(self, "samples", samples)
        if self.idle_watts < 0:
            raise TraceError(f"idle_watts must be >= 0, got {self.idle_watts}")
        for prev, cur in zip(samples, samples[1:]):
            if cur.t <= prev.t:
                raise TraceError(f"timestamps not strictly increasing at t={cur.t}")

    def __len__(self):
        return len(self.samples)

    def split(self, index):
        """Two traces sharing sample ``index``."""
        return (PowerTrace(self.samples[: index + 1], self.idle_watts),
                PowerTrace(self.samples[index:], self.idle_watts))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t_s", "watts"])
        for s in self.samples:
            writer.writerow([repr(s.t), repr(s.watts)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, idle_watts=DEFAULT_IDLE_WATTS):
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t_s", "watts"]:
            raise TraceError(f"trace CSV header must be 't_s,watts', got {header}")
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, watts = (float(v) for v in row)
            except ValueError:
                raise TraceError(f"line {lineno}: bad trace row {row}") from None
            samples.append(PowerSample(t, watts))
        return cls(tuple(samples), idle_watts)

    @classmethod
    def read(cls, path, idle_watts=DEFAULT_IDLE_WATTS):
        return cls.from_csv(Path(path).read_text(), idle_watts)


@dataclass(frozen=True)
class BenchResult:
    model_name: str
    n_queries: int
    latency_ms_per_query: float
    energy_mj_per_query: float
    peak_power_w: float

    FIELDS = ("model", "n_queries", "latency_ms_per_query", "energy_mj_per_query", "peak_power_w")

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.FIELDS)
        writer.writerow([self.model_name, self.n_queries, f"{self.latency_ms_per_query:.6f}",
                         f"{self.energy_mj_per_query:.6f}", f"{self.peak_power_w:.6f}"])
        return buf.getvalue()


def excess_energy_j(trace: PowerTrace):
    """Trapezoidal integral of max(watts - idle, 0), in joules."""
    if len(trace) < 2:
        raise TraceError(f"need at least 2 samples to integrate, got {len(trace)}")
    excess = [max(s.watts - trace.idle_watts, 0.0) for s in trace.samples]
    ts = [s.t for s in trace.samples]
    return math.fsum(0.5 * (excess[i] + excess[i + 1]) * (ts[i + 1] - ts[i])
                     for i in range(len(ts) - 1))


def energy_per_query(trace: PowerTrace, n_queries):
    if n_queries < 1:
        raise ValueError("n_queries must be >= 1")
    return excess_energy_j(trace) * 1000.0 / n_queries


def peak_power(trace: PowerTrace):
    if not len(trace):
        raise TraceError("empty trace")
    return max(0.0, max(s.watts for s in trace.samples) - trace.idle_watts)


def measure_latency(model, inputs, clock=time.perf_counter, frontend=None,
                    include_features=False, warmup=True):
    """Mean milliseconds per query over sequential passes.

    ``inputs`` are feature matrices, or PCM buffers when ``frontend`` is
    given. Feature extraction is timed only with ``include_features``;
    ``model=None`` times the front-end alone. With ``warmup`` one extra
    untimed pass runs first.
    """
    inputs = list(inputs)
    if not inputs:
        raise ValueError("measure_latency needs at least one input")
    if model is None and not (frontend and include_features):
        raise ValueError("feature-only timing needs a frontend and include_features")

    def run(item):
        x = frontend(item) if frontend is not None else item
        return model(x) if model is not None else x

    if warmup:
        run(inputs[0])
    total = 0.0
    for item in inputs:
        if frontend is not None and not include_features:
            x = frontend(item)
            start = clock()
            model(x)
            total += clock() - start
        else:
            start = clock()
            run(item)
            total += clock() - start
    return total * 1000.0 / len(inputs)


# -- samplers ----------------------------------------------------------------

class PowerSampler:
    """Appends PowerSample objects to a harness-owned list between start and stop."""

    def start(self, sink):
        raise NotImplementedError

    def stop(self):
        raise NotImplementedError


class ThreadedSampler(PowerSampler):
    """Polls ``read_watts`` on a background thread at ``rate_hz``.

    A sample is also taken at start and at stop so that even runs shorter
    than one period yield an integrable trace.
    """

    def __init__(self, rate_hz=1.0, clock=time.monotonic):
        if rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        self.period = 1.0 / rate_hz
        self.clock = clock
        self._sink = None
        self._thread = None
        self._stop = threading.Event()
        self._error = None

    def read_watts(self, elapsed):
        raise NotImplementedError

    def _take(self):
        elapsed = self.clock() - self._t0
        if self._sink and elapsed <= self._sink[-1].t:
            return
        self._sink.append(PowerSample(elapsed, float(self.read_watts(elapsed))))

    def _loop(self):
        try:
            while not self._stop.wait(self.period):
                self._take()
        except Exception as exc:
            self._error = exc

    def start(self, sink):
        self._sink = sink
        self._stop.clear()
        self._error = None
        self._t0 = self.clock()
        try:
            self._take()
        except Exception as exc:
            raise SamplerError(f"sampler failed at start: {exc}", sink) from exc
        self._thread = threading.Thread(target=self._loop, name="power-sampler", daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        self._thread.join()
        if self._error is None:
            try:
                self._take()
            except Exception as exc:
                self._error = exc
        if self._error is not None:
            raise SamplerError(f"sampler failed: {self._error}", self._sink) from self._error


class SyntheticSampler(ThreadedSampler):
    """Deterministic waveform: a constant wattage or a function of elapsed seconds."""

    def __init__(self, waveform=DEFAULT_IDLE_WATTS, rate_hz=1.0, clock=time.monotonic):
        super().__init__(rate_hz, clock)
        self.waveform = waveform if callable(waveform) else (lambda _t, w=float(waveform): w)

    def read_watts(self, elapsed):
        return self.waveform(elapsed)


class ReplaySampler(PowerSampler):
    """Replays a recorded trace (CSV ``t_s,watts``) regardless of run duration."""

    def __init__(self, samples):
        self.samples = tuple(samples)
        self._sink = None

    @classmethod
    def from_csv(cls, path):
        return cls(PowerTrace.read(path).samples)

    def start(self, sink):
        self._sink = sink

    def stop(self):
        self._sink.extend(self.samples)


class SerialMeterSampler(ThreadedSampler):
    """Adapter slot for a live USB/serial power meter.

    Subclass and implement ``read_watts`` for a specific meter; the base
    class only fixes the polling contract.
    """

    def __init__(self, port, rate_hz=1.0, clock=time.monotonic):
        super().__init__(rate_hz, clock)
        self.port = port

    def read_watts(self, elapsed):
        raise NotImplementedError(f"no meter protocol for {self.port}; "
                                  "record a trace and use ReplaySampler")


def parse_sampler(text):
    """``synthetic``, ``synthetic:<watts>`` or ``replay:<file>``."""
    kind, _, arg = text.partition(":")
    if kind == "synthetic":
        return SyntheticSampler(float(arg) if arg else DEFAULT_IDLE_WATTS)
    if kind == "replay" and arg:
        return ReplaySampler.from_csv(arg)
    raise ValueError(f"unknown sampler {text!r}; use synthetic[:watts] or replay:<file>")


# -- bench run ---------------------------------------------------------------

def discover_dataset(root):
    """Sorted (class_name, wav_path) pairs from ``<root>/<class>/*.wav``."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory {root} does not exist")
    clips = [(d.name, wav) for d in sorted(p for p in root.iterdir() if p.is_dir())
             for wav in sorted(d.glob("*.wav"))]
    if not clips:
        raise DatasetError(f"no <class>/*.wav clips under {root}")
    return clips


def run_bench(model, dataset_dir, sampler: PowerSampler, idle_watts=DEFAULT_IDLE_WATTS,
              trials=1, include_features=False, clock=time.perf_counter,
              cfg: fe.MfccConfig = fe.MfccConfig(), model_name=None):
    """Benchmark ``model`` over every clip; returns (BenchResult, PowerTrace).

    ``model=None`` runs the feature-extraction-only condition.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    clips = [fe.load_wav(path) for _, path in discover_dataset(dataset_dir)]

    def extract(pcm):
        return fe.extract_mfcc(pcm, cfg)

    if model is None:
        include_features = True
    # warm-up happens before sampling so it does not pollute the trace
    measure_latency(model, clips[:1], clock, extract, include_features, warmup=False)

    sink = []
    sampler.start(sink)
    try:
        latency = measure_latency(model, clips * trials, clock, extract,
                                  include_features, warmup=False)
    except BaseException:
        try:
            sampler.stop()
        except SamplerError:
            pass
        raise
    sampler.stop()

    trace = PowerTrace(tuple(sink), idle_watts)
    n_queries = len(clips) * trials
    name = model_name or getattr(model, "name", None) or "features-only"
    result = BenchResult(name, n_queries, latency,
                         energy_per_query(trace, n_queries), peak_power(trace))
    return result, trace
