import numpy as np
import pytest

from fermi_spectra import models
from fermi_spectra.bands import (
    FermiState,
    extract_fermi_surface,
    fermi_measure,
    sample_bands,
)


def random_hermitian(n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (g + g.conj().T) / 2


def random_ginibre(n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * g / np.sqrt(2 * n)


def random_unitary(n, seed):
    q, r = np.linalg.qr(random_ginibre(n, seed))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture(scope="session")
def graphene():
    return models.graphene_symbol(1.0)


@pytest.fixture(scope="session")
def graphene_pipeline(graphene):
    """Band structure, mesh, measure and state at several grids for gamma=1,
    lambda=2; shared across the acceptance criteria."""
    out = {}
    for grid in (128, 256, 512):
        bs = sample_bands(graphene, grid)
        mesh = extract_fermi_surface(bs, 2.0)
        measure = fermi_measure(bs, mesh, graphene)
        state = FermiState(measure=measure, symbol=graphene, level=2.0)
        out[grid] = {"bs": bs, "mesh": mesh, "measure": measure, "state": state}
    return out
