"""Runs every acceptance criterion at its stated tolerance, one line each."""

from __future__ import annotations

import warnings

import pytest

from lqtraj.validation import CRITERIA, run_criterion


@pytest.mark.parametrize("cid", sorted(CRITERIA))
def test_criterion(cid, capsys):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = run_criterion(cid)
    with capsys.disabled():
        print("\n" + result.line())
        for check in result.checks:
            mark = "ok " if check.passed else "BAD"
            print(f"    {mark} {check.name}: {check.measured:.3g} (tol {check.tolerance:.3g})")
    assert result.passed, result.line()
