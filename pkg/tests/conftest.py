import numpy as np


def reference_state(circuit, params):
    """Independent simulator: reshape the state to an n-axis tensor and act on axes.

    Axis ``n - 1 - q`` of the C-ordered tensor carries qubit ``q``.
    """
    n = circuit.num_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    ax = lambda q: n - 1 - q  # noqa: E731
    for g in circuit.gates:
        if g.kind in ("RY", "CRY", "CCRY", "MCRY"):
            t = g.angle if g.param is None else params[g.param]
            m = np.array([[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]])
        elif g.kind == "CZ":
            m = np.diag([1.0, -1.0])
        else:
            m = np.array([[0.0, 1.0], [1.0, 0.0]])
        sel = [slice(None)] * n
        for q, b in g.controls:
            sel[ax(q)] = b
        sel = tuple(sel)
        block = psi[sel]
        # target axis position inside the sliced block
        tpos = sum(1 for q in range(n - 1, g.target, -1) if q not in dict(g.controls))
        block = np.moveaxis(np.tensordot(m, block, axes=([1], [tpos])), 0, tpos)
        psi[sel] = block
    return psi.reshape(-1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
