from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    tolerance: float
    errors: dict = field(default_factory=dict)

    @property
    def max_error(self):
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self):
        return self.max_error <= self.tolerance


def _block_error(analytic, numeric):
    # Relative to the block's gradient scale, so near-zero entries don't blow up.
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-10)
    return float(np.abs(analytic - numeric).max() / scale)


def grad_check(model, inputs, tolerance=1e-4, step=1e-6, max_entries=None, seed=0,
               check_inputs=True):
    """Compare reverse-mode gradients to central finite differences.

    The scalar objective is ``sum(model(x) * R)`` for a fixed random ``R``, so
    every output coordinate contributes. ``max_entries`` caps the number of
    coordinates probed per parameter block (sampled uniformly without
    replacement); ``None`` probes all of them.
    """
    rng = np.random.default_rng(seed)
    x = Tensor(np.array(inputs, dtype=np.float64), requires_grad=check_inputs)
    out = model(x)
    proj = rng.standard_normal(out.shape)

    def objective():
        return float((model(Tensor(x.data)).data * proj).sum())

    model.zero_grad()
    out.backward(proj)
    blocks = list(model.named_parameters())
    if check_inputs:
        blocks.append(("input", x))
    report = GradCheckReport(tolerance)
    for name, p in blocks:
        analytic = np.zeros(p.shape) if p.grad is None else p.grad.copy()
        flat = p.data.reshape(-1)
        if max_entries is None or flat.size <= max_entries:
            probe = np.arange(flat.size)
        else:
            probe = rng.choice(flat.size, size=max_entries, replace=False)
        numeric = np.empty(len(probe))
        for k, i in enumerate(probe):
            orig = flat[i]
            flat[i] = orig + step
            up = objective()
            flat[i] = orig - step
            down = objective()
            flat[i] = orig
            numeric[k] = (up - down) / (2 * step)
        report.errors[name] = _block_error(analytic.reshape(-1)[probe], numeric)
    return report
