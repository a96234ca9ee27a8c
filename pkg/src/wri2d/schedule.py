"""Frequency-batch scheduling, weight-decay schedule, multi-pass restarts,
and the per-batch stopping rule."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class BatchSchedule:
    """Ordered frequency batches plus the per-batch iteration policy.

    ``paths`` lists (start frequency, pass index) restarts: each pass walks
    the batches whose first frequency is >= its start frequency, feeding
    the final model of one pass to the next. ``eps_d_from_noise`` selects
    the noisy-data policy where the data tolerance of a batch equals the
    norm of the noise injected into that batch's gathers.
    """

    batches: tuple[tuple[float, ...], ...]
    k_max: int = 15
    eps_b: float = 0.0
    eps_d: float = 0.0
    eps_d_from_noise: bool = False
    overlap: int = 0
    paths: tuple[tuple[float, int], ...] = ()

    def __post_init__(self):
        if not self.batches or any(len(b) == 0 for b in self.batches):
            raise ValidationError("schedule needs at least one non-empty batch")
        if self.k_max < 1:
            raise ValidationError("k_max must be >= 1")
        object.__setattr__(
            self, "batches", tuple(tuple(float(f) for f in b) for b in self.batches)
        )
        if not self.paths:
            object.__setattr__(self, "paths", ((self.batches[0][0], 1),))

    def batches_from(self, start_freq: float) -> list[list[float]]:
        out = [list(b) for b in self.batches if b[0] >= start_freq - 1e-9]
        if not out:
            raise ValidationError(f"no batches start at or above {start_freq} Hz")
        return out

    def all_frequencies(self) -> list[float]:
        seen: list[float] = []
        for b in self.batches:
            for f in b:
                if not any(abs(f - g) < 1e-9 for g in seen):
                    seen.append(f)
        return sorted(seen)


def make_schedule(
    f_start: float,
    f_end: float,
    df: float,
    batch_size: int,
    overlap: int,
    k_max: int = 15,
    eps_b: float = 0.0,
    eps_d: float = 0.0,
    eps_d_from_noise: bool = False,
    paths: list[tuple[float, int]] | None = None,
) -> BatchSchedule:
    """Ascending batches over an arithmetic frequency ladder.

    Consecutive batches share ``overlap`` frequencies; the last batch may
    be short if the ladder does not divide evenly.
    """
    if f_start > f_end:
        raise ValidationError("f_start must be <= f_end")
    if df <= 0:
        raise ValidationError("df must be > 0")
    if not 0 <= overlap < batch_size:
        raise ValidationError("need 0 <= overlap < batch_size")
    count = int(round((f_end - f_start) / df)) + 1
    freqs = [f_start + i * df for i in range(count)]
    if freqs[-1] > f_end + 1e-9:
        freqs = freqs[:-1]
    step = batch_size - overlap
    batches = []
    i = 0
    while True:
        batch = freqs[i : i + batch_size]
        batches.append(tuple(batch))
        if i + batch_size >= len(freqs):
            break
        i += step
    return BatchSchedule(
        batches=tuple(batches),
        k_max=k_max,
        eps_b=eps_b,
        eps_d=eps_d,
        eps_d_from_noise=eps_d_from_noise,
        overlap=overlap,
        paths=tuple(paths) if paths else (),
    )


def simultaneous_schedule(
    frequencies: list[float],
    k_max: int,
    eps_b: float = 0.0,
    eps_d: float = 0.0,
) -> BatchSchedule:
    """All frequencies inverted jointly: a single batch with a fixed
    iteration budget."""
    return BatchSchedule(
        batches=(tuple(frequencies),), k_max=k_max, eps_b=eps_b, eps_d=eps_d
    )


def gamma_schedule(
    iter_in_run: int, init: float, decay_every: int, factor: float, floor: float
) -> float:
    """Stepwise decay: init / factor^(iter // decay_every), floored."""
    if factor < 1.0:
        raise ValidationError("decay factor must be >= 1")
    if decay_every < 1:
        raise ValidationError("decay_every must be >= 1")
    return max(init / factor ** (iter_in_run // decay_every), floor)


def stopping_check(
    wave_residual: float,
    data_residual: float,
    iter_in_batch: int,
    sched: BatchSchedule,
    eps_d_override: float | None = None,
) -> bool:
    """True when the batch is done: iteration cap reached, or both the
    wave-equation and data residuals are within tolerance."""
    if iter_in_batch < 1:
        return False
    if iter_in_batch >= sched.k_max:
        return True
    eps_d = sched.eps_d if eps_d_override is None else eps_d_override
    return wave_residual <= sched.eps_b and data_residual <= eps_d
