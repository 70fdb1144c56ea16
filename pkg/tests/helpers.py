"""Shared test utilities: whole-model finite-difference gradient checking."""

import numpy as np

from kanforge.tensor import backward, no_grad


def model_param_grad_errors(model, loss_fn, h=1e-5):
    """Max relative error per named parameter, analytic vs central differences.

    loss_fn() must rebuild the scalar loss from the model's current state.
    Relative error per entry is |analytic - numeric| / max(1, |numeric|),
    matching grad_check.
    """
    for t in model.parameters():
        t.grad = None
    backward(loss_fn())
    errors = {}
    with no_grad():
        for name, t in model.named_parameters():
            analytic = t.grad if t.grad is not None else np.zeros(t.shape)
            numeric = np.zeros(t.size)
            flat = t.data.reshape(-1)
            for i in range(t.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = loss_fn().item()
                flat[i] = orig - h
                fm = loss_fn().item()
                flat[i] = orig
                numeric[i] = (fp - fm) / (2.0 * h)
            numeric = numeric.reshape(t.shape)
            denom = np.maximum(1.0, np.abs(numeric))
            errors[name] = float(np.max(np.abs(analytic - numeric) / denom))
    return errors
