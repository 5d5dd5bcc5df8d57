"""Acceptance criteria, one test each, at the stated scales.

Each test runs the registered experiments that realise the criterion and
records a PASS/FAIL line; the lines are printed in the pytest terminal summary
(see conftest) and when this file is run as a script.
"""
from __future__ import annotations

import sys

import numpy as np
import pytest

from charmonic.cli import registry

CRITERIA = {
    1: ("curvature stack on e^{2ω}δ, 16^4, three draws", ["curvature-suite"]),
    2: ("conformal invariance of E4, 10 draws, decreasing with resolution", ["conformal-invariance-e4"]),
    3: ("Paneitz consistency and covariance", ["paneitz-covariance"]),
    4: ("gradient identity, flat and sphere targets", ["gradient-identity"]),
    5: ("triple oracle and exact closed forms", ["triple-oracle", "einstein-closed-form"]),
    6: ("H covariance, 16^4, three draws", ["h-covariance"]),
    7: ("identity map residual", ["identity-check"]),
    8: ("jet parity and Einstein zero jet", ["jet-oracle-h4"]),
    9: ("ruban fit: round trip, Einstein F, invariance, negative control", ["ruban-fit"]),
    10: ("first variations against central differences", ["variation-fd-suite"]),
    11: ("dimension six", ["dim6-identity", "dim6-einstein-op"]),
    12: ("GJMS on Einstein manifolds", ["gjms-einstein-check"]),
    13: ("Newton solve near the identity", ["newton-local"]),
    14: ("flow to a zero of H with monotone energy", ["flow-run"]),
}

RESULTS: dict[int, tuple[bool, str]] = {}


def run_criterion(number: int, seed: int = 0) -> tuple[bool, list]:
    failed = []
    for name in CRITERIA[number][1]:
        outcome = registry()[name]({"experiment": name}, np.random.Generator(np.random.Philox(seed)))
        failed += [f"{name}:{c.name}={c.value}" for c in outcome.checks if not c.passed]
    return not failed, failed


def line(number: int, ok: bool, detail: list) -> str:
    text = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {CRITERIA[number][0]}"
    return text + (f"  [{'; '.join(detail)}]" if detail else "")


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, failed = run_criterion(number)
    RESULTS[number] = (ok, line(number, ok, failed))
    assert ok, "; ".join(failed)


if __name__ == "__main__":
    status = 0
    for n in sorted(CRITERIA):
        ok, failed = run_criterion(n)
        print(line(n, ok, failed), flush=True)
        status |= not ok
    sys.exit(status)
