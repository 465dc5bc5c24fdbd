"""Independent oracles shared by the test suite: naive loop implementations
and a central finite-difference gradient checker. These deliberately avoid
the library's own code paths."""

import math

import numpy as np
import torch


def reflect_idx(i, n):
    if n == 1:
        return 0
    period = 2 * n - 2
    m = i % period
    return period - m if m >= n else m


def naive_conv2d_reflect(x, weight):
    """Dense direct convolution (cross-correlation) with reflect padding.
    x: (C_in, H, W) numpy, weight: (C_out, C_in, kh, kw) numpy."""
    c_in, h, w = x.shape
    c_out, _, kh, kw = weight.shape
    out = np.zeros((c_out, h, w), dtype=np.float64)
    for co in range(c_out):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for ci in range(c_in):
                    for di in range(kh):
                        for dj in range(kw):
                            ii = reflect_idx(i + di - kh // 2, h)
                            jj = reflect_idx(j + dj - kw // 2, w)
                            acc += x[ci, ii, jj] * weight[co, ci, di, dj]
                out[co, i, j] = acc
    return out


def naive_conv1x1(x, weight):
    """Per-pixel linear map. x: (C_in, H, W), weight: (C_out, C_in)."""
    c_in, h, w = x.shape
    c_out = weight.shape[0]
    out = np.zeros((c_out, h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            out[:, i, j] = weight @ x[:, i, j]
    return out


def naive_linear_attention(q, k, v, heads, eps=1e-6):
    """Double-loop kernelized attention on (N, C) numpy arrays."""

    def phi(x):
        return x + 1.0 if x > 0 else math.exp(x)

    n, c = q.shape
    d = c // heads
    out = np.zeros_like(q)
    for h in range(heads):
        sl = slice(h * d, (h + 1) * d)
        fq = np.vectorize(phi)(q[:, sl])
        fk = np.vectorize(phi)(k[:, sl])
        for i in range(n):
            num = np.zeros(d)
            den = 0.0
            for j in range(n):
                wgt = float(fq[i] @ fk[j])
                num += wgt * v[j, sl]
                den += wgt
            out[i, sl] = num / (den + eps)
    return out


def naive_channel_attention(q, k, v, heads, temperature):
    """Per-head (d x d) softmax attention oracle on (N, C) numpy arrays."""
    n, c = q.shape
    d = c // heads
    out = np.zeros_like(q)
    for h in range(heads):
        sl = slice(h * d, (h + 1) * d)
        qh = q[:, sl] / np.maximum(np.linalg.norm(q[:, sl], axis=0, keepdims=True), 1e-12)
        kh = k[:, sl] / np.maximum(np.linalg.norm(k[:, sl], axis=0, keepdims=True), 1e-12)
        logits = qh.T @ kh * float(temperature[h])
        attn = np.exp(logits - logits.max(axis=1, keepdims=True))
        attn /= attn.sum(axis=1, keepdims=True)
        out[:, sl] = v[:, sl] @ attn.T
    return out


def naive_spatial_attention(q, k, v, heads, temperature):
    """Per-head (N x N) softmax attention oracle on (N, C) numpy arrays."""
    n, c = q.shape
    d = c // heads
    out = np.zeros_like(q)
    for h in range(heads):
        sl = slice(h * d, (h + 1) * d)
        logits = q[:, sl] @ k[:, sl].T / math.sqrt(d) * float(temperature[h])
        attn = np.exp(logits - logits.max(axis=1, keepdims=True))
        attn /= attn.sum(axis=1, keepdims=True)
        out[:, sl] = attn @ v[:, sl]
    return out


def brute_force_partners(values):
    """O(g^2) cosine partner selection. values: (g, n, C) numpy."""
    g = values.shape[0]
    reps = [values[m].mean(axis=0) for m in range(g)]

    def cos(a, b):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(a @ b / (na * nb))

    partners = []
    for m in range(g):
        best_sim, best_idx = -np.inf, None
        for n_ in range(g):
            if n_ == m:
                continue
            s = cos(reps[m], reps[n_])
            if s > best_sim:
                best_sim, best_idx = s, n_
        partners.append(best_idx)
    return np.asarray(partners)


def fd_gradient(fn, x, h=1e-6):
    """Central finite-difference gradient of scalar fn at x (torch.float64)."""
    x = x.detach().clone()
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            fp = float(fn(x))
            flat[i] = orig - h
            fm = float(fn(x))
            flat[i] = orig
            gflat[i] = (fp - fm) / (2 * h)
    return grad


def rel_err(a: torch.Tensor, b: torch.Tensor) -> float:
    denom = max(a.norm().item(), b.norm().item(), 1e-12)
    return (a - b).norm().item() / denom


def check_gradient(fn, x, tol=1e-3, h=1e-6):
    """Compare autograd gradient of scalar fn wrt x against central FD."""
    xg = x.detach().clone().requires_grad_(True)
    fn(xg).backward()
    ad = xg.grad.detach()
    fd = fd_gradient(fn, x, h=h)
    err = rel_err(ad, fd)
    assert err <= tol, f"gradient mismatch: rel err {err:.3e} > {tol}"
    return err
