"""Smoke test for the qcmass extension module.

Build the module first, for example with
    maturin develop -m crates/py/Cargo.toml
or see README.md for a manual build.
"""

from fractions import Fraction

import qcmass


def main():
    q1 = qcmass.GridQuasiCopula.builtin("q1")
    q2 = qcmass.GridQuasiCopula.builtin("q2")
    assert q1.dimension == 4
    assert q1.total_mass() == 1
    assert q1.verify()["passed"]
    assert q2.verify()["passed"]
    assert q1.box_volume("3/7:6/7,3/7:6/7,3/7:6/7,3/7:6/7") == Fraction(-9, 7)
    assert q2.box_volume([(Fraction(1, 2), 1)] * 4) == 2
    assert q1.evaluate([1, 1, 1, "1/2"]) == Fraction(1, 2)

    margin = q2.marginalize(3)
    assert margin.dimension == 3
    assert margin.box_volume([("1/2", 1)] * 3) == 1
    center = dict(q1.marginalize(3).cells())[(1, 1, 1)]
    assert center == Fraction(-5, 7)
    again = qcmass.GridQuasiCopula.from_json(margin.to_json())
    assert again.cells() == margin.cells()

    lo = qcmass.extremize(4, "min")
    hi = qcmass.extremize(4, "max")
    assert lo["optimum"] == Fraction(-9, 7) and lo["certificate"] == "pass"
    assert hi["optimum"] == 2 and hi["certificate"] == "pass"
    assert len(lo["vertices"]) == 16
    assert qcmass.extremize(2, "min")["optimum"] == Fraction(-1, 3)

    for direction, value in [("min", Fraction(-9, 7)), ("max", Fraction(2))]:
        w = qcmass.reported_witness(direction)
        assert w["feasible"] and w["objective"] == value

    cand = qcmass.candidate_pattern(5)
    assert cand["feasible"]
    assert cand["objective"] == qcmass.conjectured_minimum(5) == Fraction(-16, 9)
    assert qcmass.export_lp(2).startswith("qclp 1 2 min\n")

    try:
        q1.evaluate([0.5, 0.5, 0.5, 0.5])
    except TypeError:
        pass
    else:
        raise AssertionError("floats must be rejected")

    print("qcmass smoke test passed")


if __name__ == "__main__":
    main()
