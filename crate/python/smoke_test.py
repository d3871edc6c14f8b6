"""Smoke test for the poptlab extension module."""

import math

import poptlab


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    swap = poptlab.swap_operator(3).scale(1 / 3)
    close(swap.trace(), 1.0, 1e-12)
    close(min(swap.eigenvalues()), -1 / 3, 1e-9)

    report = poptlab.classify(swap, 3, 3)
    assert report["verdict"] == "popt_only", report["verdict"]
    assert report["popt_certificate"]["min_value"] >= -1e-8

    state = poptlab.max_entangled(3)
    assert poptlab.classify(state, 3, 3, restarts=8, samples=10)["verdict"] == "quantum_state"
    flipped = state.partial_transpose(3, 3)
    close(max(abs(a - b) for ra, rb in zip(flipped.rows(), swap.rows()) for a, b in zip(ra, rb)), 0.0, 1e-12)

    mu = poptlab.Measure.from_operator(swap, 3, 3)
    assert mu.check_no_signalling(contexts=20)["satisfied"]
    rho, residual = mu.gleason_extend()
    assert residual <= 1e-8
    rows = swap.rows()
    close(max(abs(a - b) for ra, rb in zip(rho.rows(), rows) for a, b in zip(ra, rb)), 0.0, 1e-8)

    def oracle(q1, q2):
        return mu.eval(q1, q2)

    rho, _ = poptlab.gleason_extend(oracle, 3, 3)
    close(rho.trace(), 1.0, 1e-9)

    box = poptlab.pr_box()
    assert box.chsh() == 4.0
    assert box.check_no_signalling()["satisfied"]
    try:
        box.gleason_extend(allow_qubit=True)
    except poptlab.PoptlabError as e:
        assert "missing" in str(e)
    else:
        raise AssertionError("PR box should not extend")

    singlet = poptlab.Operator(
        [[0, 0, 0, 0], [0, 0.5, -0.5, 0], [0, -0.5, 0.5, 0], [0, 0, 0, 0]]
    )
    close(poptlab.optimize_chsh(singlet, 2, 2, restarts=8)["value"], 2 * math.sqrt(2), 1e-3)

    assert poptlab.Povm.trine().dilate()["residual"] <= 1e-8
    assert poptlab.stinespring_dilate(state, 3, 3)["residual"] <= 1e-8

    generated = poptlab.generate("swap_popt", 3)
    assert generated["certificate"]["expected_class"] == "popt_only"
    again = poptlab.Operator.from_json(poptlab.Operator.to_json(swap))
    assert again.dim == 9

    try:
        poptlab.Operator([[1, 1j], [0, 1]])
    except poptlab.PoptlabError:
        pass
    else:
        raise AssertionError("non-Hermitian input accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
