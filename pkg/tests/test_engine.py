import numpy as np
import pytest

from sepgeo.engine import ClockRecord, evolve
from sepgeo.models import build_rate_model, initial_condition

TASEP = build_rate_model("tasep")
ASEP = build_rate_model("asep", p=0.75)


def test_lone_particle_free_jumps():
    init = initial_condition("explicit", labels=[0], positions=[0])
    clock = ClockRecord.explicit({0: ([0.5, 1.2], [1, 1])})
    run = evolve(TASEP, init, clock, t_max=2.0, checkpoints=[2.0])
    assert run.position(0, 2.0) == 2
    assert run.log.suppressed_right(0).size == 0
    assert run.jumps == 2


def test_blocked_attempt_recorded_suppressed():
    init = initial_condition("explicit", labels=[0, 1], positions=[0, -1])
    clock = ClockRecord.explicit({1: ([1.0], [1])})
    run = evolve(TASEP, init, clock, t_max=2.0, checkpoints=[2.0])
    assert list(run.positions_at(2.0)) == [0, -1]
    assert list(run.log.suppressed_right(1)) == [1.0]


def test_checkpoint_semantics_between_events():
    init = initial_condition("explicit", labels=[0], positions=[0])
    clock = ClockRecord.explicit({0: ([1.0, 2.0, 3.0], [1, 1, 1])})
    run = evolve(TASEP, init, clock, t_max=4.0, checkpoints=[0.5, 2.0, 2.5, 4.0])
    assert run.position(0, 0.5) == 0
    assert run.position(0, 2.0) == 2   # state at exactly t includes the jump at t
    assert run.position(0, 2.5) == 2
    assert run.position(0, 4.0) == 3


def test_leftmost_never_jumps_left_and_unrecorded():
    init = initial_condition("explicit", labels=[0, 1], positions=[0, -5])
    clock = ClockRecord.explicit({1: ([1.0], [-1])})
    run = evolve(ASEP, init, clock, t_max=2.0, checkpoints=[2.0])
    assert run.position(1, 2.0) == -5
    assert run.log.suppressed_left(1).size == 0
    assert run.attempts[1] == 0


def test_rightmost_unbounded_room():
    init = initial_condition("explicit", labels=[0, 1], positions=[0, -1])
    clock = ClockRecord.explicit({0: ([0.5, 1.0, 1.5], [1, 1, 1])})
    run = evolve(TASEP, init, clock, t_max=2.0, checkpoints=[2.0])
    assert run.position(0, 2.0) == 3


def test_left_jump_blocking():
    init = initial_condition("explicit", labels=[0, 1], positions=[0, -1])
    clock = ClockRecord.explicit({0: ([1.0], [-1]), 1: ([], [])})
    run = evolve(ASEP, init, clock, t_max=2.0, checkpoints=[2.0])
    assert run.position(0, 2.0) == 0
    assert list(run.log.suppressed_left(0)) == [1.0]


def test_counter_mode_replays_bit_exactly():
    init = initial_condition("flat", rho=0.5, labels=range(40))
    r1 = evolve(ASEP, init, ClockRecord.counter(123), 30.0, checkpoints=[10.0, 30.0])
    r2 = evolve(ASEP, init, ClockRecord.counter(123), 30.0, checkpoints=[10.0, 30.0])
    assert np.array_equal(r1.positions, r2.positions)
    assert np.array_equal(r1.log.sup_right_n, r2.log.sup_right_n)
    for lab in range(40):
        assert np.array_equal(r1.log.suppressed_right(lab), r2.log.suppressed_right(lab))
    r3 = evolve(ASEP, init, ClockRecord.counter(124), 30.0, checkpoints=[10.0, 30.0])
    assert not np.array_equal(r1.positions, r3.positions)


def test_explicit_mode_replays_bit_exactly():
    init = initial_condition("flat", rho=0.5, labels=range(10))
    clock = ClockRecord.from_seed_per_label(5, range(10), 8.0, p=0.75)
    r1 = evolve(ASEP, init, clock, 8.0, checkpoints=[8.0])
    r2 = evolve(ASEP, init, clock, 8.0, checkpoints=[8.0])
    assert np.array_equal(r1.positions, r2.positions)


def test_asep_p1_equals_tasep_bitwise():
    init = initial_condition("flat", rho=0.5, labels=range(30))
    asep1 = build_rate_model("asep", p=1.0)
    ra = evolve(asep1, init, ClockRecord.counter(9), 25.0, checkpoints=[25.0])
    rt = evolve(TASEP, init, ClockRecord.counter(9), 25.0, checkpoints=[25.0])
    assert np.array_equal(ra.positions, rt.positions)
    assert np.array_equal(ra.log.sup_right_n, rt.log.sup_right_n)
    assert ra.log.sup_left_n.sum() == 0


def test_exclusion_and_order_preserved_at_checkpoints():
    init = initial_condition("flat", rho=0.5, labels=range(60))
    for seed in range(5):
        run = evolve(ASEP, init, ClockRecord.counter(seed), 40.0,
                     checkpoints=[10.0, 20.0, 40.0])
        for c in range(3):
            assert np.all(np.diff(run.positions[c]) < 0)


def test_asepsc_infinite_E_never_moves_left():
    model = build_rate_model("asepsc", beta=np.log(4.0), E=np.inf)
    init = initial_condition("flat", rho=0.5, labels=range(50))
    run = evolve(model, init, ClockRecord.counter(3), 40.0, checkpoints=[40.0])
    assert run.log.sup_left_n.sum() == 0
    assert np.all(run.positions_at(40.0) >= init.positions)


def test_asepsc_beta0_rates_match_asep_like_dynamics():
    # beta=0: window-independent rates (1 right, e^-E left)
    model = build_rate_model("asepsc", beta=0.0, E=50.0)
    init = initial_condition("flat", rho=0.5, labels=range(40))
    run = evolve(model, init, ClockRecord.counter(17), 25.0, checkpoints=[25.0])
    assert np.all(np.diff(run.positions_at(25.0)) < 0)


def test_attempt_counts_poisson_consistent():
    """Mean attempts per label within 3 sigma of t over >= 1e4 labels."""
    n = 10_000
    t = 3.0
    init = initial_condition("flat", rho=0.5, labels=range(n))
    run = evolve(ASEP, init, ClockRecord.counter(77), t, checkpoints=[t])
    interior = run.attempts[1:-1]
    mean = interior.mean()
    sigma = np.sqrt(t / interior.size)
    assert abs(mean - t) < 3 * sigma


def test_evolve_errors():
    init = initial_condition("flat", rho=0.5, labels=range(4))
    with pytest.raises(ValueError):
        evolve(TASEP, init, ClockRecord.counter(1), 0.0)
    with pytest.raises(ValueError):
        evolve(TASEP, init, ClockRecord.counter(1), 5.0, checkpoints=[6.0])


def test_explicit_stream_validation():
    with pytest.raises(ValueError):
        ClockRecord.explicit({0: ([2.0, 1.0], [1, 1])})
    with pytest.raises(ValueError):
        ClockRecord.explicit({0: ([1.0], [1, 1])})


def test_tie_break_goes_to_smaller_label():
    # two labels attempt at the same instant; smaller label goes first
    init = initial_condition("explicit", labels=[0, 1], positions=[1, 0])
    clock = ClockRecord.explicit({0: ([1.0], [1]), 1: ([1.0], [1])})
    run = evolve(TASEP, init, clock, 2.0, checkpoints=[2.0])
    # label 0 moves to 2 first, freeing site 1 for label 1
    assert list(run.positions_at(2.0)) == [2, 1]
    assert run.log.suppressed_right(1).size == 0
