"""Slow, loop-based reference computations used to check the vectorized code.

Nothing here imports from the package: every oracle works on plain numpy
arrays with explicit loops or textbook formulas.
"""

import cmath
import math

import numpy as np


def layer_norm(x, gamma, beta, eps=1e-6):
    b, c, h, w = x.shape
    out = np.empty_like(x, dtype=np.float64)
    for n in range(b):
        for i in range(h):
            for j in range(w):
                v = [float(x[n, k, i, j]) for k in range(c)]
                mu = sum(v) / c
                var = sum((t - mu) ** 2 for t in v) / c
                for k in range(c):
                    out[n, k, i, j] = gamma[k] * (v[k] - mu) / math.sqrt(var + eps) + beta[k]
    return out


def conv1x1(x, weight, bias):
    """weight (Cout, Cin) or (Cout, Cin, 1, 1)."""
    weight = np.asarray(weight).reshape(weight.shape[0], -1)
    b, cin, h, w = x.shape
    out = np.zeros((b, weight.shape[0], h, w))
    for n in range(b):
        for o in range(weight.shape[0]):
            acc = np.full((h, w), 0.0 if bias is None else float(bias[o]))
            for i in range(cin):
                acc += weight[o, i] * x[n, i]
            out[n, o] = acc
    return out


def depthwise_replicate(x, weight, bias):
    """Depthwise correlation with replicate padding; weight (C, 1, k, k)."""
    b, c, h, w = x.shape
    k = weight.shape[-1]
    p = k // 2
    out = np.zeros((b, c, h, w))
    for n in range(b):
        for ch in range(c):
            for i in range(h):
                for j in range(w):
                    acc = 0.0 if bias is None else float(bias[ch])
                    for di in range(k):
                        for dj in range(k):
                            ii = min(max(i + di - p, 0), h - 1)
                            jj = min(max(j + dj - p, 0), w - 1)
                            acc += weight[ch, 0, di, dj] * x[n, ch, ii, jj]
                    out[n, ch, i, j] = acc
    return out


def simple_gate(x):
    c = x.shape[1] // 2
    return x[:, :c] * x[:, c:]


def dft2(a):
    """Unnormalized forward 2-D DFT by direct summation."""
    h, w = a.shape
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            s = 0j
            for m in range(h):
                for n in range(w):
                    s += a[m, n] * cmath.exp(-2j * math.pi * (u * m / h + v * n / w))
            out[u, v] = s
    return out


def half_spectrum_inverse(s, w):
    """Real signal from the non-negative-frequency half plane (H, W//2+1), unnormalized.

    Columns are first inverted along rows, then the last axis is rebuilt with
    Hermitian symmetry (imaginary parts of the DC and Nyquist columns drop out).
    """
    h = s.shape[0]
    z = np.zeros_like(s, dtype=complex)
    for y in range(h):
        for v in range(s.shape[1]):
            z[y, v] = sum(s[u, v] * cmath.exp(2j * math.pi * u * y / h) for u in range(h))
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = z[y, 0].real
            last = w // 2
            for v in range(1, (w + 1) // 2):
                acc += 2 * (z[y, v] * cmath.exp(2j * math.pi * v * x / w)).real
            if w % 2 == 0:
                acc += z[y, last].real * (-1) ** x
            out[y, x] = acc
    return out


def spectral_branch(x, w1, b1, w2, b2):
    """Gated conv in the half-plane Fourier domain with orthonormal scaling."""
    bsz, c, h, w = x.shape
    half = w // 2 + 1
    norm = math.sqrt(h * w)
    spec = np.zeros((bsz, 2 * c, h, half))
    for n in range(bsz):
        for ch in range(c):
            f = dft2(x[n, ch])[:, :half] / norm
            spec[n, ch] = f.real
            spec[n, c + ch] = f.imag
    y = simple_gate(depthwise_replicate(conv1x1(spec, w1, b1), w2, b2))
    out = np.zeros((bsz, c, h, w))
    for n in range(bsz):
        for ch in range(c):
            out[n, ch] = half_spectrum_inverse(y[n, ch] + 1j * y[n, c + ch], w) / norm
    return out


def unfold_replicate(x, k):
    b, c, h, w = x.shape
    p = k // 2
    out = np.zeros((b, c * k * k, h * w))
    for n in range(b):
        for ch in range(c):
            for di in range(k):
                for dj in range(k):
                    row = ch * k * k + di * k + dj
                    for i in range(h):
                        for j in range(w):
                            ii = min(max(i + di - p, 0), h - 1)
                            jj = min(max(j + dj - p, 0), w - 1)
                            out[n, row, i * w + j] = x[n, ch, ii, jj]
    return out


def grouped_lowpass(x, filters):
    """filters (B, g, k, k); channel ch uses group ch // (C // g)."""
    b, c, h, w = x.shape
    g, k = filters.shape[1], filters.shape[-1]
    p = k // 2
    out = np.zeros((b, c, h, w))
    for n in range(b):
        for ch in range(c):
            f = filters[n, ch // (c // g)]
            for i in range(h):
                for j in range(w):
                    acc = 0.0
                    for di in range(k):
                        for dj in range(k):
                            ii = min(max(i + di - p, 0), h - 1)
                            jj = min(max(j + dj - p, 0), w - 1)
                            acc += f[di, dj] * x[n, ch, ii, jj]
                    out[n, ch, i, j] = acc
    return out


def softmax_rows(m):
    out = np.empty_like(m, dtype=np.float64)
    for r in range(m.shape[0]):
        top = max(m[r])
        e = [math.exp(v - top) for v in m[r]]
        s = sum(e)
        out[r] = [t / s for t in e]
    return out


def matmul(a, b):
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = sum(a[i, t] * b[t, j] for t in range(k))
    return out


def bilinear_up(img, factor):
    """Half-pixel-centre bilinear upsampling of a 2-D array with edge clamping."""
    h, w = img.shape
    out = np.zeros((h * factor, w * factor))
    for i in range(h * factor):
        for j in range(w * factor):
            y = max((i + 0.5) / factor - 0.5, 0.0)
            x = max((j + 0.5) / factor - 0.5, 0.0)
            y0, x0 = min(int(math.floor(y)), h - 1), min(int(math.floor(x)), w - 1)
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            fy, fx = y - y0, x - x0
            out[i, j] = (
                (1 - fy) * (1 - fx) * img[y0, x0]
                + (1 - fy) * fx * img[y0, x1]
                + fy * (1 - fx) * img[y1, x0]
                + fy * fx * img[y1, x1]
            )
    return out


def avg_pool2(img):
    h, w = img.shape[:2]
    out = np.zeros((h // 2, w // 2) + img.shape[2:])
    for i in range(h // 2):
        for j in range(w // 2):
            out[i, j] = (img[2 * i, 2 * j] + img[2 * i + 1, 2 * j] + img[2 * i, 2 * j + 1] + img[2 * i + 1, 2 * j + 1]) / 4
    return out


def gaussian_blur_loops(img, sigma, size):
    """Normalized Gaussian, replicate padding, (H, W, C) image."""
    r = size // 2
    k = np.array([[math.exp(-((i - r) ** 2 + (j - r) ** 2) / (2 * sigma**2)) for j in range(size)] for i in range(size)])
    k /= k.sum()
    h, w, c = img.shape
    out = np.zeros_like(img, dtype=np.float64)
    for ch in range(c):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for di in range(size):
                    for dj in range(size):
                        ii = min(max(i + di - r, 0), h - 1)
                        jj = min(max(j + dj - r, 0), w - 1)
                        acc += k[di, dj] * img[ii, jj, ch]
                out[i, j, ch] = acc
    return out


def conv_replicate(x, weight, bias):
    """Dense correlation with replicate padding; weight (Cout, Cin, k, k)."""
    b, cin, h, w = x.shape
    cout, _, k, _ = weight.shape
    p = k // 2
    out = np.zeros((b, cout, h, w))
    for n in range(b):
        for o in range(cout):
            for i in range(h):
                for j in range(w):
                    acc = float(bias[o])
                    for ci in range(cin):
                        for di in range(k):
                            for dj in range(k):
                                ii = min(max(i + di - p, 0), h - 1)
                                jj = min(max(j + dj - p, 0), w - 1)
                                acc += weight[o, ci, di, dj] * x[n, ci, ii, jj]
                    out[n, o, i, j] = acc
    return out
