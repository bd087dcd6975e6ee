import numpy as np
import pytest

import anchorquad as aq


@pytest.fixture(scope="session")
def wiener():
    return aq.wiener_kernel()


@pytest.fixture(scope="session")
def prod3(wiener):
    """Product weights gamma_j = j^-3 bound to the Wiener kernel."""
    return aq.ProductWeights(aq.PowerGenerator(1.0, 3.0), c0=wiener.C0)


@pytest.fixture(scope="session")
def hand_family():
    """The three-set family with hat weights 1/3, 1/24, 1/72."""
    return aq.ExplicitWeights.of(
        {(1,): 1.0, (2,): 0.125, (1, 2): 0.125}, c0=1.0 / 3.0
    )


def random_explicit_family(rng: np.random.Generator, max_sets: int = 20,
                           max_index: int = 8, c0: float = 1.0 / 3.0):
    """A random finite positive weight family over indices <= max_index."""
    n_sets = int(rng.integers(1, max_sets + 1))
    mapping = {}
    while len(mapping) < n_sets:
        size = int(rng.integers(1, 5))
        u = tuple(sorted(rng.choice(np.arange(1, max_index + 1), size=size,
                                    replace=False).tolist()))
        mapping[u] = float(rng.uniform(0.05, 2.0))
    return aq.ExplicitWeights.of(mapping, c0=c0)


def random_anchored_function(rng: np.random.Generator, kernel, sets,
                             max_terms: int = 5):
    """Random explicit integrand with terms on the given sets."""
    terms = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        u = sets[int(rng.integers(0, len(sets)))]
        u = u if isinstance(u, aq.VariableSet) else aq.VariableSet.of(u)
        atoms = tuple(
            aq.KernelTranslate(float(rng.uniform(0.05, 1.0)))
            if rng.random() < 0.7
            else aq.MeanEmbedding()
            for _ in u
        )
        terms.append(aq.Term(u, float(rng.uniform(-2.0, 2.0)), atoms))
    return aq.AnchoredFunction(kernel, tuple(terms))


def direct_component_eval(f, u, batch):
    """Independent oracle: sum the terms sitting exactly on u."""
    picked = aq.AnchoredFunction(f.kernel, tuple(t for t in f.terms if t.u == u))
    return aq.func_eval(picked, batch)
