import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proactivenet import sched
from proactivenet.sched import (
    Backlog,
    MulticastBacklog,
    advance_slot,
    after_service,
    dynamic_primary_capacity,
    edf_serve,
    multicast_after_service,
    multicast_edf_serve,
    pi2_serve,
    serve_two_class,
)
from proactivenet.traffic import ArrivalBatch

backlogs = st.lists(st.integers(0, 20), min_size=1, max_size=6).map(
    lambda c: Backlog(counts=tuple(c))
)


class TestEdfServe:
    def test_two_bucket_split(self):
        out = edf_serve(Backlog((1, 3)), 2)
        assert out.served_per_deadline == (1, 1)
        assert out.leftover_capacity == 0 and out.expired == 0

    def test_deficit_expires(self):
        assert edf_serve(Backlog((5, 0)), 3).expired == 2

    def test_empty_system(self):
        out = edf_serve(Backlog((0, 0)), 4)
        assert out.leftover_capacity == 4 and out.expired == 0

    @given(backlogs, st.integers(0, 30))
    def test_work_conserving(self, b, cap):
        out = edf_serve(b, cap)
        if out.leftover_capacity > 0:
            assert after_service(b, out).total == 0

    @given(backlogs, st.integers(0, 30))
    def test_expired_monotone_in_capacity(self, b, cap):
        assert edf_serve(b, cap).expired >= edf_serve(b, cap + 1).expired

    @given(backlogs, st.integers(0, 30))
    def test_outcome_consistency(self, b, cap):
        out = edf_serve(b, cap)
        assert out.served + out.leftover_capacity == cap
        assert out.expired == b.counts[0] - out.served_per_deadline[0]


class TestAdvanceSlot:
    def test_shift_and_insert(self):
        b = advance_slot(Backlog((0, 2)), ArrivalBatch(0, {1: 3}))
        assert b.counts == (2, 3)

    def test_urgent_insertion(self):
        b = advance_slot(Backlog.empty(2), ArrivalBatch(0, {0: 4}))
        assert b.counts == (4, 0, 0)

    def test_zero_shift(self):
        assert advance_slot(Backlog.empty(3), ArrivalBatch(0)).counts == (0, 0, 0, 0)

    def test_out_of_range_lookahead(self):
        with pytest.raises(ValueError):
            advance_slot(Backlog.empty(1), ArrivalBatch(0, {5: 1}))


class TestDynamicCapacity:
    def test_half_fraction_ceiling(self):
        assert dynamic_primary_capacity(Backlog((3, 4)), 10, 0.5) == 5

    def test_f1_capped(self):
        assert dynamic_primary_capacity(Backlog((3, 4)), 5, 1.0) == 5

    def test_f0_urgent_only(self):
        assert dynamic_primary_capacity(Backlog((3, 4)), 10, 0.0) == 3

    def test_floor_variant_switch(self):
        sched.FRACTION_ROUNDING["mode"] = "floor"
        try:
            assert dynamic_primary_capacity(Backlog((3, 3)), 10, 0.5) == 4
        finally:
            sched.FRACTION_ROUNDING["mode"] = "ceil"
        assert dynamic_primary_capacity(Backlog((3, 3)), 10, 0.5) == 5


class TestTwoClass:
    def test_selfish_trace(self):
        p, s = serve_two_class(Backlog((2, 1)), 2, 4, "selfish")
        assert p.served == 3 and s.served == 1 and s.expired == 1

    def test_dynamic_leaves_room(self):
        p, s = serve_two_class(Backlog((0, 4)), 2, 4, "dynamic", f=0.5)
        assert p.served == 2 and s.expired == 0

    def test_no_secondary_no_outage(self):
        _, s = serve_two_class(Backlog((5, 5)), 0, 4, "selfish")
        assert not s.outage

    @given(backlogs, st.integers(0, 10), st.integers(1, 20))
    def test_dynamic_f1_equals_selfish(self, b, q, C):
        # primary leftover is relative to the granted cap under dynamic, so
        # compare the service decisions and the secondary outcome instead
        pd, sd = serve_two_class(b, q, C, "dynamic", f=1.0)
        ps, ss = serve_two_class(b, q, C, "selfish")
        assert pd.served_per_deadline == ps.served_per_deadline
        assert pd.expired == ps.expired
        assert sd == ss

    @given(backlogs, st.integers(0, 10), st.integers(1, 20))
    def test_capacity_partition(self, b, q, C):
        p, s = serve_two_class(b, q, C, "selfish")
        assert p.served + s.served <= C
        assert s.served + s.expired == q


class TestMulticast:
    def test_edf_order(self):
        out = multicast_edf_serve(MulticastBacklog({0: 0, 1: 0, 2: 1}), 2)
        assert out.served_per_deadline[0] == 2 and out.expired == 0

    def test_deficit(self):
        assert multicast_edf_serve(MulticastBacklog({0: 0, 1: 0, 2: 0}), 2).expired == 1

    def test_empty(self):
        assert multicast_edf_serve(MulticastBacklog({}), 5).leftover_capacity == 5

    def test_serving_clears_source(self):
        out, left = multicast_after_service(MulticastBacklog({7: 0, 8: 2}), 1)
        assert out.served == 1
        assert left.residual_deadline == {8: 2}


class TestPi2:
    def test_urgent_multicast_first(self):
        mc, uc = pi2_serve(MulticastBacklog({0: 0}), 3, 3)
        assert mc.served == 1 and uc.served == 2 and uc.expired == 1

    def test_exact_fit(self):
        mc, uc = pi2_serve(MulticastBacklog({}), 3, 3)
        assert uc.expired == 0 and mc.expired == 0

    def test_multicast_deficit(self):
        mc, _ = pi2_serve(MulticastBacklog({0: 0, 1: 0}), 0, 1)
        assert mc.expired == 1

    def test_leftover_goes_to_later_multicast(self):
        mc, uc = pi2_serve(MulticastBacklog({0: 0, 1: 2, 2: 1}), 1, 4)
        assert mc.served == 3 and uc.served == 1


def test_edf_equals_fcfs_under_deterministic_window():
    # with a single deterministic look-ahead, per-slot service counts match
    # a FIFO-by-arrival-slot reference implementation
    rng = np.random.default_rng(11)
    T, C, slots = 3, 2, 400
    arrivals = rng.poisson(1.7, slots)

    edf_expired = []
    b = Backlog.empty(T)
    for n in range(slots):
        b = advance_slot_into(b, arrivals[n], T)
        out = edf_serve(b, C)
        edf_expired.append(out.expired)
        b = after_service(b, out)

    fifo_expired = []
    queue = []  # (arrival slot) per request, FIFO
    for n in range(slots):
        queue.extend([n] * int(arrivals[n]))
        served = 0
        while queue and served < C:
            queue.pop(0)
            served += 1
        exp = sum(1 for a in queue if a + T == n)
        fifo_expired.append(exp)
        queue = [a for a in queue if a + T > n]

    assert edf_expired == fifo_expired


def advance_slot_into(b: Backlog, count: int, T: int) -> Backlog:
    shifted = list(b.counts[1:]) + [0]
    shifted[T] += int(count)
    return Backlog(tuple(shifted))
