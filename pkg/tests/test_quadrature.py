import itertools
from math import factorial

import numpy as np
import pytest

from decsie import quadrature as q


def _simplex_mean(alpha):
    """Mean of prod lambda_i^alpha_i over a d-simplex (d = len(alpha) - 1)."""
    d = len(alpha) - 1
    return factorial(d) * np.prod([factorial(a) for a in alpha]) / factorial(sum(alpha) + d)


def _exponents(n_vars, degree):
    return [a for a in itertools.product(range(degree + 1), repeat=n_vars) if sum(a) <= degree]


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_triangle_rule_exact_to_degree(n):
    # the collapse Jacobian uses one degree of the Gauss exactness
    lam, w = q.triangle_rule(n)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(lam >= -1e-15)
    for a in _exponents(3, 2 * n - 2):
        got = np.sum(w * np.prod(lam ** np.array(a), axis=1))
        assert got == pytest.approx(_simplex_mean(a), rel=1e-12, abs=1e-15)


def test_strang_fix_degree_five():
    lam, w = q.strang_fix7()
    for a in _exponents(3, 5):
        assert np.sum(w * np.prod(lam ** np.array(a), axis=1)) == pytest.approx(_simplex_mean(a), rel=1e-11)


@pytest.mark.parametrize("levels", [1, 2])
def test_subdivided_rule_keeps_exactness(levels):
    lam, w = q.subdivided_rule(q.strang_fix7(), levels)
    assert len(w) == 7 * 4**levels
    for a in _exponents(3, 5):
        assert np.sum(w * np.prod(lam ** np.array(a), axis=1)) == pytest.approx(_simplex_mean(a), rel=1e-11)


@pytest.mark.parametrize("case", ["coincident", "edge", "vertex"])
def test_sauter_schwab_smooth_integrand(case):
    X, Y, W = q.sauter_schwab(case, 6)
    assert W.sum() == pytest.approx(0.25, abs=1e-14)
    # barycentrics on both panels stay inside the simplex
    assert X.min() > -1e-14 and Y.min() > -1e-14
    # for a separable polynomial the pair integral factors into two triangle means
    for a, b in [((1, 0, 0), (0, 2, 0)), ((0, 1, 1), (2, 0, 1)), ((2, 1, 0), (0, 0, 3))]:
        got = np.sum(W * np.prod(X ** np.array(a), axis=1) * np.prod(Y ** np.array(b), axis=1))
        assert got == pytest.approx(0.25 * _simplex_mean(a) * _simplex_mean(b), rel=1e-12)


def test_sauter_schwab_rejects_unknown_case():
    with pytest.raises(ValueError):
        q.sauter_schwab("overlap", 3)
