"""Central-difference gradient checking.

The error for a parameter tensor is the norm-wise relative error
``||analytic - numeric|| / max(||analytic||, ||numeric||, floor)``; the report
keeps the worst tensor.  Norm-wise comparison avoids the blow-up that
elementwise ratios suffer on entries whose true gradient is ~0, and the
floor turns the check absolute for tensors whose gradient vanishes
identically (e.g. attention key biases, which softmax cancels).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .layers import Module, iter_dropouts
from .tensor import Tensor


class PreconditionError(RuntimeError):
    pass


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol

    def worst(self, n: int = 3) -> list[tuple[str, float]]:
        return sorted(self.per_param.items(), key=lambda kv: -kv[1])[:n]

    def __str__(self) -> str:
        status = "ok" if self.passed else "FAILED"
        worst = ", ".join(f"{k}={v:.2e}" for k, v in self.worst())
        return f"grad-check {status}: max rel err {self.max_rel_error:.3e} (tol {self.tol:g}); worst: {worst}"


def _check_deterministic(model) -> None:
    if isinstance(model, Module) and model.training:
        if any(d.rate > 0 for d in iter_dropouts(model)):
            raise PreconditionError("grad_check needs a deterministic model: disable dropout (model.eval())")


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Module | Iterable[tuple[str, Tensor]],
    h: float = 1e-5,
    tol: float = 1e-4,
    floor: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare backprop gradients of ``loss_fn()`` with central differences.

    ``max_coords`` limits each tensor to a random subset of coordinates, which
    keeps checks on larger models affordable.
    """
    _check_deterministic(params)
    named = params.named_parameters() if isinstance(params, Module) else list(params)
    for _, p in named:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    base = float(loss.data)
    if float(loss_fn().data) != base:
        raise PreconditionError("loss_fn is not deterministic")
    rng = rng or np.random.default_rng(0)
    report = GradCheckReport(0.0, tol)
    for name, p in named:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        numeric = np.empty(idx.size)
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + h
            fp = float(loss_fn().data)
            flat[i] = old - h
            fm = float(loss_fn().data)
            flat[i] = old
            numeric[j] = (fp - fm) / (2 * h)
        a = analytic.reshape(-1)[idx]
        denom = max(np.linalg.norm(a), np.linalg.norm(numeric), floor)
        err = float(np.linalg.norm(a - numeric) / denom)
        report.per_param[name] = err
        report.max_rel_error = max(report.max_rel_error, err)
    return report
