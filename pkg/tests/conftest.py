"""Shared test helpers plus a summary hook that prints one line per
acceptance criterion at the end of a run."""
import numpy as np

from ualearn.nn import LayerSpec, Network, loss_and_grad

_acceptance_outcomes = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(_acceptance_outcomes):
        outcome = _acceptance_outcomes[nodeid]
        name = nodeid.split("::")[-1]
        label = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{label}  {name}")


def random_small_net(rng, final="softmax", n_classes=3, max_layers=3, max_width=8):
    """A random network of <= max_layers dense layers, dropout disabled."""
    hidden_acts = ("relu", "leaky_relu", "sigmoid", "identity")
    n_layers = int(rng.integers(1, max_layers + 1))
    widths = [int(rng.integers(2, max_width + 1)) for _ in range(n_layers)]
    specs = []
    for i in range(n_layers - 1):
        act = hidden_acts[int(rng.integers(len(hidden_acts)))]
        specs.append(LayerSpec(widths[i], widths[i + 1], activation=act))
    out_width = n_classes if final == "softmax" else 1
    specs.append(LayerSpec(widths[-1], out_width, activation=final))
    return Network.init(specs, seed=int(rng.integers(2**31)))


def finite_difference_grads(net, X, y, loss, l2=0.0, h=1e-5):
    """Central finite differences of the loss over every parameter."""
    grads_w, grads_b = [], []
    for arrays, out in ((net.weights, grads_w), (net.biases, grads_b)):
        for arr in arrays:
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                plus = loss_and_grad(net, X, y, loss, l2=l2)[0]
                arr[idx] = orig - h
                minus = loss_and_grad(net, X, y, loss, l2=l2)[0]
                arr[idx] = orig
                g[idx] = (plus - minus) / (2.0 * h)
            out.append(g)
    return grads_w, grads_b


def max_relative_error(analytic, numeric):
    """Worst-case relative error between two gradient lists."""
    worst = 0.0
    for a, f in zip(analytic, numeric):
        denom = np.maximum(1e-6, np.maximum(np.abs(a), np.abs(f)))
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


def gradient_check(net, X, y, loss, l2=0.0):
    """Analytic-vs-numeric worst relative error and the probe count."""
    _, analytic = loss_and_grad(net, X, y, loss, l2=l2)
    num_w, num_b = finite_difference_grads(net, X, y, loss, l2=l2)
    err = max(
        max_relative_error(analytic.weights, num_w),
        max_relative_error(analytic.biases, num_b),
    )
    probes = sum(a.size for a in num_w) + sum(a.size for a in num_b)
    return err, probes
