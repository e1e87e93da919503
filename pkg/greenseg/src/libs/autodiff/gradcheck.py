import logging
from typing import Callable, Iterable, Optional

import numpy as np

try:
    from .exceptions import ContractViolation
    from .tensor import ParamTensor, Tensor, no_grad
except (ImportError, ModuleNotFoundError):
    from exceptions import ContractViolation
    from tensor import ParamTensor, Tensor, no_grad


def grad_check(forward: Callable[[], Tensor],
               params: Iterable[ParamTensor],
               eps: float = 1e-6,
               samples: Optional[int] = 8,
               rng: Optional[np.random.Generator] = None,
               floor: float = 1e-5) -> float:
    """Compare tape gradients against central finite differences.

    Parameters are promoted to float64 for the duration of the check and
    restored afterwards. `forward` must rebuild the graph from the current
    parameter values on every call and return a single-element tensor.

    Args:
        forward: builds the scalar loss
        params: parameters to check
        eps: finite-difference step
        samples: coordinates checked per parameter, None checks all of them
        rng: picks the checked coordinates
        floor: lower bound of the relative-error denominator

    Returns:
        float: max over checked coordinates of |analytic - numeric| / max(|analytic|, |numeric|, floor)
    """
    params = list(params)
    rng = rng if rng is not None else np.random.default_rng(0)
    original = {id(p): p.data for p in params}
    try:
        for p in params:
            p.data = p.data.astype(np.float64)
            p.grad = None

        loss = forward()
        if loss.data.size != 1:
            raise ContractViolation(
                f"grad_check: forward must return one element, got shape {loss.shape}")
        loss.backward()
        analytic = {id(p): (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                    for p in params}

        worst = 0.0
        for p in params:
            flat = p.data.reshape(-1)
            coords = np.arange(flat.size)
            if samples is not None and flat.size > samples:
                coords = rng.choice(flat.size, size=samples, replace=False)
            for idx in coords:
                saved = flat[idx]
                with no_grad():
                    flat[idx] = saved + eps
                    upper = float(forward().data.reshape(-1)[0])
                    flat[idx] = saved - eps
                    lower = float(forward().data.reshape(-1)[0])
                flat[idx] = saved
                numeric = (upper - lower) / (2.0 * eps)
                exact = float(analytic[id(p)].reshape(-1)[idx])
                err = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
                if err > worst:
                    logging.debug("grad_check: %s[%d] analytic=%g numeric=%g",
                                  getattr(p, "name", "?"), idx, exact, numeric)
                    worst = err
        return worst
    finally:
        for p in params:
            p.data = original[id(p)]
            p.grad = None
