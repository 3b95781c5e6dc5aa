from __future__ import annotations

import math

import numpy as np

from popsim import broadcast
from popsim.broadcast import Source, run_pushpull
from popsim.engine import Configuration, step


def test_two_agents_finish_in_one_step():
    r = run_pushpull(2, seed=5)
    assert r.steps_to_completion == 1 and r.informed.all()


def test_completion_within_log_periods():
    n = 1 << 10
    for seed in range(100):
        r = run_pushpull(n, seed)
        assert r.informed.all()
        assert r.periods_to_completion <= 30 * math.log2(n)


def test_informed_set_never_shrinks():
    proto = broadcast.protocol(50)
    cfg = Configuration.initial(proto, Source(7), 3)
    informed = cfg.states.copy()
    while not cfg.states.all():
        step(cfg, proto)
        assert np.all(cfg.states >= informed)
        informed = cfg.states.copy()


def test_fast_and_reference_agree():
    for seed in range(5):
        assert run_pushpull(300, seed, fast=True).steps_to_completion == \
            run_pushpull(300, seed, fast=False).steps_to_completion
