"""Shared oracles for the test suite."""

import math

import mpmath
import numpy as np
import torch

from supergaze.config import DhecaConfig
from supergaze.dheca import Dheca


def finite_difference_check(seed=0, eps=3e-3, floor=1e-8):
    """Worst elementwise relative gap between autograd and central differences.

    Tiny DHECA (C=8, heads=2, depth 1, 3 head + 2 eye tokens) in float64;
    every parameter and input entry is perturbed. Central differences at
    ``eps`` and ``eps / 2`` are Richardson-combined (error O(eps^4)).
    ``floor`` guards the ratio for gradients that vanish analytically
    (key-projection biases: softmax ignores a constant score shift).
    """
    torch.manual_seed(seed)
    model = Dheca(DhecaConfig(depth=1, dim=8, heads=2, variant="dheca"), 3, 2).double()
    for m in model.modules():
        if isinstance(m, torch.nn.LayerNorm):
            with torch.no_grad():
                m.weight.normal_(1.0, 0.3)
                m.bias.normal_(0.0, 0.1)
    head = torch.randn(1, 3, 8, dtype=torch.float64, requires_grad=True)
    eye = torch.randn(1, 2, 8, dtype=torch.float64, requires_grad=True)
    rh = torch.randn(1, 8, dtype=torch.float64)
    re = torch.randn(1, 8, dtype=torch.float64)

    def loss():
        h, e = model(head, eye)
        return (torch.sin(h) * rh).sum() + (torch.cos(e) * re).sum()

    def central(flat, i, orig, h):
        flat[i] = orig + h
        up = loss().item()
        flat[i] = orig - h
        down = loss().item()
        flat[i] = orig
        return (up - down) / (2 * h)

    tensors = [head, eye] + list(model.parameters())
    grads = torch.autograd.grad(loss(), tensors)
    worst = 0.0
    with torch.no_grad():
        for t, g in zip(tensors, grads):
            flat = t.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                numeric = (4 * central(flat, i, orig, eps / 2) - central(flat, i, orig, eps)) / 3
                analytic = g.view(-1)[i].item()
                gap = abs(analytic - numeric) / max(abs(numeric), abs(analytic), floor)
                worst = max(worst, gap)
    return worst


def mp_angle_deg(a, b):
    """Angle between two vectors in degrees at 40 significant digits."""
    with mpmath.workdps(40):
        return _mp_angle(a, b)


def _mp_angle(a, b):
    a = [mpmath.mpf(float(x)) for x in a]
    b = [mpmath.mpf(float(x)) for x in b]
    dot = sum(x * y for x, y in zip(a, b))
    na = mpmath.sqrt(sum(x * x for x in a))
    nb = mpmath.sqrt(sum(x * x for x in b))
    c = max(mpmath.mpf(-1), min(mpmath.mpf(1), dot / (na * nb)))
    return float(mpmath.degrees(mpmath.acos(c)))



def ref_layernorm(x, weight, bias, eps=1e-5):
    out = np.zeros_like(x)
    for i, row in enumerate(x):
        mu = sum(row) / len(row)
        var = sum((v - mu) ** 2 for v in row) / len(row)
        out[i] = [(v - mu) / math.sqrt(var + eps) * w + b for v, w, b in zip(row, weight, bias)]
    return out


def ref_linear(x, weight, bias):
    out = np.zeros((x.shape[0], weight.shape[0]))
    for i in range(x.shape[0]):
        for j in range(weight.shape[0]):
            out[i, j] = sum(x[i, k] * weight[j, k] for k in range(x.shape[1])) + bias[j]
    return out


def ref_attention(q, k, v, heads):
    lq, c = q.shape
    dk = c // heads
    out = np.zeros((lq, c))
    weights = np.zeros((heads, lq, k.shape[0]))
    for h in range(heads):
        sl = slice(h * dk, (h + 1) * dk)
        for i in range(lq):
            scores = [sum(q[i, sl][d] * k[j, sl][d] for d in range(dk)) / math.sqrt(dk) for j in range(k.shape[0])]
            m = max(scores)
            ex = [math.exp(s - m) for s in scores]
            z = sum(ex)
            for j in range(k.shape[0]):
                weights[h, i, j] = ex[j] / z
                out[i, sl] += weights[h, i, j] * v[j, sl]
    return out, weights


def ref_mlp(x, mlp):
    p = lambda t: t.detach().double().numpy()
    hdn = ref_linear(x, p(mlp.fc1.weight), p(mlp.fc1.bias))
    hdn = np.vectorize(lambda t: 0.5 * t * (1 + math.erf(t / math.sqrt(2))))(hdn)
    return ref_linear(hdn, p(mlp.fc2.weight), p(mlp.fc2.bias))


def ref_dual_block(blk, head, eye):
    p = lambda t: t.detach().double().numpy()
    c = head.shape[1]
    nh = ref_layernorm(head, p(blk.norm_h.weight), p(blk.norm_h.bias))
    ne = ref_layernorm(eye, p(blk.norm_e.weight), p(blk.norm_e.bias))
    qkv_h = ref_linear(nh, p(blk.qkv_h.weight), p(blk.qkv_h.bias))
    qkv_e = ref_linear(ne, p(blk.qkv_e.weight), p(blk.qkv_e.bias))
    qh, kh, vh = qkv_h[:, :c], qkv_h[:, c:2 * c], qkv_h[:, 2 * c:]
    qe, ke, ve = qkv_e[:, :c], qkv_e[:, c:2 * c], qkv_e[:, 2 * c:]
    ah, wh = ref_attention(qh, ke, ve, blk.heads)
    ae, we = ref_attention(qe, kh, vh, blk.heads)
    h1 = head + ref_linear(ah, p(blk.proj_h.weight), p(blk.proj_h.bias))
    e1 = eye + ref_linear(ae, p(blk.proj_e.weight), p(blk.proj_e.bias))
    h2 = h1 + ref_mlp(ref_layernorm(h1, p(blk.norm2_h.weight), p(blk.norm2_h.bias)), blk.mlp_h)
    e2 = e1 + ref_mlp(ref_layernorm(e1, p(blk.norm2_e.weight), p(blk.norm2_e.bias)), blk.mlp_e)
    return h2, e2, wh, we


def randomize_norms(module, seed=0):
    g = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, torch.nn.LayerNorm):
            with torch.no_grad():
                m.weight.copy_(1 + 0.3 * torch.randn(m.weight.shape, generator=g, dtype=m.weight.dtype))
                m.bias.copy_(0.1 * torch.randn(m.bias.shape, generator=g, dtype=m.bias.dtype))


# ---- acceptance verdicts -------------------------------------------------------

VERDICTS = {}


def criterion(number, title):
    """Run a check returning ``(ok, detail)``; record and print its verdict, then assert it."""
    import functools

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                ok, detail = fn(*args, **kwargs)
            except Exception as exc:
                ok, detail = False, f"{type(exc).__name__}: {exc}"
                VERDICTS[number] = (title, ok, detail)
                print(format_verdict(number))
                raise
            VERDICTS[number] = (title, bool(ok), detail)
            print(format_verdict(number))
            assert ok, detail
        return run
    return wrap


def format_verdict(number):
    title, ok, detail = VERDICTS[number]
    return f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {title}: {detail}"
