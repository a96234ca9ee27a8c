import pytest

from wri2d.errors import ValidationError
from wri2d.schedule import (
    BatchSchedule,
    gamma_schedule,
    make_schedule,
    simultaneous_schedule,
    stopping_check,
)


class TestMakeSchedule:
    def test_central_target_ladder(self):
        sched = make_schedule(3.5, 12.0, 0.5, batch_size=2, overlap=1,
                              k_max=15, eps_b=1e-3, eps_d=1e-5)
        assert len(sched.batches) == 17
        assert sched.batches[0] == (3.5, 4.0)
        assert sched.batches[1] == (4.0, 4.5)
        assert sched.batches[-1] == (11.5, 12.0)
        assert sched.k_max == 15

    def test_single_frequency_range(self):
        sched = make_schedule(5.0, 5.0, 0.5, batch_size=2, overlap=1)
        assert sched.batches == ((5.0,),)

    def test_no_overlap(self):
        sched = make_schedule(1.0, 6.0, 1.0, batch_size=2, overlap=0)
        assert sched.batches == ((1.0, 2.0), (3.0, 4.0), (5.0, 6.0))

    def test_short_final_batch(self):
        sched = make_schedule(1.0, 5.0, 1.0, batch_size=2, overlap=0)
        assert sched.batches[-1] == (5.0,)

    def test_degenerate_ranges_rejected(self):
        with pytest.raises(ValidationError):
            make_schedule(5.0, 3.0, 0.5, 2, 1)
        with pytest.raises(ValidationError):
            make_schedule(3.0, 5.0, -0.5, 2, 1)
        with pytest.raises(ValidationError):
            make_schedule(3.0, 5.0, 0.5, 2, 2)

    def test_deterministic(self):
        a = make_schedule(3.0, 13.0, 0.5, 2, 1)
        b = make_schedule(3.0, 13.0, 0.5, 2, 1)
        assert a.batches == b.batches


class TestPaths:
    def test_default_single_path(self):
        sched = make_schedule(3.0, 5.0, 1.0, 2, 1)
        assert sched.paths == ((3.0, 1),)

    def test_three_paths_enumerate(self):
        sched = make_schedule(3.0, 13.0, 0.5, 2, 1,
                              paths=[(3.0, 1), (6.0, 2), (8.5, 3)])
        assert len(sched.paths) == 3
        second = sched.batches_from(6.0)
        assert second[0][0] == 6.0
        third = sched.batches_from(8.5)
        assert third[0][0] == 8.5
        # all passes end at the top of the ladder
        assert second[-1][-1] == 13.0 and third[-1][-1] == 13.0

    def test_start_above_ladder_rejected(self):
        sched = make_schedule(3.0, 5.0, 1.0, 2, 1)
        with pytest.raises(ValidationError):
            sched.batches_from(9.0)


class TestGammaSchedule:
    def test_iteration_zero(self):
        assert gamma_schedule(0, 1.0, 10, 2.0, 0.01) == 1.0

    def test_decay_formula(self):
        assert gamma_schedule(25, 1.0, 10, 2.0, 0.01) == 0.25

    def test_floor(self):
        assert gamma_schedule(10_000, 1.0, 10, 2.0, 0.01) == 0.01

    def test_nonincreasing_and_bounded(self):
        vals = [gamma_schedule(k, 1.0, 10, 2.0, 0.01) for k in range(200)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        assert min(vals) >= 0.01

    def test_constant_when_init_equals_floor(self):
        assert gamma_schedule(500, 0.01, 10, 2.0, 0.01) == 0.01


class TestStoppingCheck:
    def _sched(self, k_max=15, eps_b=1e-3, eps_d=1e-5):
        return BatchSchedule(batches=((5.0,),), k_max=k_max, eps_b=eps_b, eps_d=eps_d)

    def test_cap_reached(self):
        assert stopping_check(1.0, 1.0, 15, self._sched())

    def test_both_tolerances_met(self):
        assert stopping_check(5e-4, 5e-6, 3, self._sched())

    def test_single_tolerance_insufficient(self):
        assert not stopping_check(5e-4, 1.0, 3, self._sched())
        assert not stopping_check(1.0, 5e-6, 3, self._sched())

    def test_never_stops_before_one_iteration(self):
        assert not stopping_check(0.0, 0.0, 0, self._sched())

    def test_noise_override(self):
        sched = self._sched(eps_d=0.0)
        assert stopping_check(5e-4, 0.3, 2, sched, eps_d_override=0.5)


class TestSimultaneous:
    def test_single_batch(self):
        sched = simultaneous_schedule([2.5, 5.0, 7.0], k_max=70)
        assert sched.batches == ((2.5, 5.0, 7.0),)
        assert sched.k_max == 70

    def test_all_frequencies(self):
        sched = make_schedule(3.0, 5.0, 1.0, 2, 1)
        assert sched.all_frequencies() == [3.0, 4.0, 5.0]
