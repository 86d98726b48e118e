"""Central finite-difference gradient checking against autograd."""

import torch


def fd_gradient(f, x: torch.Tensor, h: float = 1e-5) -> torch.Tensor:
    """Central finite differences of scalar f w.r.t. every element of x."""
    g = torch.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        step = h * max(1.0, abs(orig))
        flat[i] = orig + step
        hi = float(f(x))
        flat[i] = orig - step
        lo = float(f(x))
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * step)
    return g


def assert_grads_close(analytic: torch.Tensor, numeric: torch.Tensor, rtol=1e-4, atol=1e-6):
    analytic = analytic.reshape(-1)
    numeric = numeric.reshape(-1)
    scale = torch.maximum(analytic.abs(), numeric.abs())
    bad = (analytic - numeric).abs() > (atol + rtol * scale)
    if bool(bad.any()):
        i = int(bad.nonzero()[0])
        raise AssertionError(
            f"gradient mismatch at flat index {i}: analytic {float(analytic[i]):.8g} "
            f"vs finite-difference {float(numeric[i]):.8g} "
            f"({int(bad.sum())}/{analytic.numel()} elements beyond rtol={rtol})"
        )


def check_input_gradient(loss_fn, x: torch.Tensor, rtol=1e-4):
    """Compare autograd and finite differences for a scalar loss of one tensor."""
    x = x.detach().double()
    xg = x.clone().requires_grad_(True)
    (analytic,) = torch.autograd.grad(loss_fn(xg), xg)
    with torch.no_grad():
        numeric = fd_gradient(lambda v: loss_fn(v), x.clone())
    assert_grads_close(analytic, numeric, rtol=rtol)


def check_parameter_gradients(module: torch.nn.Module, scalar_fn, rtol=1e-4, h=1e-5):
    """FD-check the gradient of ``scalar_fn(module)`` w.r.t. every parameter."""
    module = module.double()
    loss = scalar_fn(module)
    params = list(module.parameters())
    analytic = torch.autograd.grad(loss, params, allow_unused=True)
    with torch.no_grad():
        for p, a in zip(params, analytic):
            a = torch.zeros_like(p) if a is None else a
            numeric = fd_gradient(lambda _: scalar_fn(module), p.data, h=h)
            assert_grads_close(a, numeric, rtol=rtol)
