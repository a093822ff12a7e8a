import math

import numpy as np
import pytest

from rondeau.evolution import initial_state
from rondeau.sequences import MonopoleSpec
from rondeau.spins import build_hamiltonian, compute_couplings, generate_graph


@pytest.fixture(scope="session")
def small_system():
    """6-spin interacting system shared by the engine tests."""
    graph = generate_graph(6, seed=11)
    couplings = compute_couplings(graph, coupling_median=1.0)
    hamiltonian = build_hamiltonian(couplings)
    psi0 = initial_state(6, hamiltonian)
    return graph, couplings, hamiltonian, psi0


@pytest.fixture()
def short_spec():
    """Small block keeping unit tests fast; kick layout mirrors the 2:1 ratio."""
    return MonopoleSpec(pulses_per_block=12, kick_plus=8, kick_minus=4,
                        tau=0.05, gamma_y=math.pi)


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))
