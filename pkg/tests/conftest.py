"""Shared fixtures: one simulated cohort and its fitted nuisance models.

Session scope keeps the model fits out of the per-test budget; every
test that mutates nothing may share them.
"""

import pytest

from causalrules import (
    fit_outcome_model,
    fit_treatment_model,
    generate,
    no_violation_dgp,
)


@pytest.fixture(scope="session")
def gen_nv():
    return no_violation_dgp()


@pytest.fixture(scope="session")
def data_nv(gen_nv):
    return generate(gen_nv, 800, seed=11)


@pytest.fixture(scope="session")
def models_nv(data_nv):
    return fit_treatment_model(data_nv), fit_outcome_model(data_nv)
