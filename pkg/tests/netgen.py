"""Random element and network generators for property tests."""

import math

import numpy as np

from cvfeedback.elements import (
    BeamSplitterParams,
    DetectionParams,
    NopaParams,
    ThreePortSample,
    beam_splitter,
    detector_chain,
    excess_noise,
    loss_channel,
    nopa_transfer,
    phase_shift,
    sample_transfer,
)
from cvfeedback.network import Network

OMEGA = 2 * math.pi * 2e6


def random_nopa(rng):
    return NopaParams(
        kappa_total=OMEGA / rng.uniform(0.05, 2.0),
        escape_efficiency=rng.uniform(0.3, 1.0),
        pump_parameter=rng.uniform(0.0, 0.95),
        pump_phase=rng.uniform(-math.pi, math.pi),
        excess_phase_noise=rng.uniform(0.0, 0.5),
    )


def random_sample(rng):
    t, r, l = rng.dirichlet([1.0, 1.0, 1.0])
    return ThreePortSample(t, r, 1.0 - t - r)


def random_element(rng, omega=OMEGA):
    kind = rng.integers(7)
    if kind == 0:
        return beam_splitter(BeamSplitterParams(rng.uniform()))
    if kind == 1:
        return phase_shift(rng.uniform(-math.pi, math.pi))
    if kind == 2:
        return sample_transfer(random_sample(rng))
    if kind == 3:
        return loss_channel(rng.uniform())
    if kind == 4:
        return detector_chain(DetectionParams(rng.uniform(0.05, 1.0)))
    if kind == 5:
        return excess_noise(rng.uniform(0, 2))
    return nopa_transfer(random_nopa(rng), omega)


def random_network(rng, max_elements=6, omega=OMEGA):
    """Random port graph with loops; unused inputs become vacuum sources."""
    net = Network()
    n = int(rng.integers(1, max_elements + 1))
    outs, ins = [], []
    for k in range(n):
        t = random_element(rng, omega)
        net.add(f"e{k}", t)
        outs += [f"e{k}.{p}" for p in t.outputs]
        ins += [f"e{k}.{p}" for p in t.inputs]
    rng.shuffle(outs)
    rng.shuffle(ins)
    # keep at least one output free for a sink
    n_links = int(rng.integers(0, min(len(outs) - 1, len(ins)) + 1))
    for src, dst in zip(outs[:n_links], ins[:n_links]):
        net.connect(src, dst, phase=rng.uniform(-math.pi, math.pi))
    for dst in ins[n_links:]:
        net.vacuum(dst)
    free = outs[n_links:]
    n_sinks = int(rng.integers(1, len(free) + 1))
    for k, src in enumerate(free[:n_sinks]):
        net.probe(src, f"s{k}")
    return net
