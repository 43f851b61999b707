"""Independent numpy re-implementation of the toy world and the metrics.

Used only to produce frozen expectations under tests/fixtures. Nothing here
imports or calls the C++ library.
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1


class MT19937_64:
    """Reference 64-bit Mersenne Twister (Matsumoto and Nishimura, 2004)."""

    NN, MM = 312, 156
    MATRIX_A = 0xB5026F5AA96619E9
    UM, LM = 0xFFFFFFFF80000000, 0x7FFFFFFF

    def __init__(self, seed):
        self.mt = [0] * self.NN
        self.mt[0] = seed & MASK64
        for i in range(1, self.NN):
            prev = self.mt[i - 1]
            self.mt[i] = (6364136223846793005 * (prev ^ (prev >> 62)) + i) & MASK64
        self.mti = self.NN

    def _twist(self):
        mt = self.mt
        for i in range(self.NN):
            x = (mt[i] & self.UM) | (mt[(i + 1) % self.NN] & self.LM)
            xa = x >> 1
            if x & 1:
                xa ^= self.MATRIX_A
            mt[i] = mt[(i + self.MM) % self.NN] ^ xa
        self.mti = 0

    def __call__(self):
        if self.mti >= self.NN:
            self._twist()
        x = self.mt[self.mti]
        self.mti += 1
        x ^= (x >> 29) & 0x5555555555555555
        x ^= (x << 17) & 0x71D67FFFEDA60000
        x ^= (x << 37) & 0xFFF7EEE000000000
        x ^= x >> 43
        return x & MASK64


def splitmix(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(*parts):
    h = 0x243F6A8885A308D3
    for p in parts:
        h = splitmix(h ^ (p & MASK64))
    return h


class Normals:
    """Box-Muller pairs from 53-bit uniforms; the cosine branch comes first."""

    def __init__(self, seed):
        self.e = MT19937_64(seed)
        self.spare = None

    def __call__(self):
        if self.spare is not None:
            v, self.spare = self.spare, None
            return v
        u1 = ((self.e() >> 11) + 1) * 2.0**-53
        u2 = (self.e() >> 11) * 2.0**-53
        r = math.sqrt(-2.0 * math.log(u1))
        t = 2.0 * math.pi * u2
        self.spare = r * math.sin(t)
        return r * math.cos(t)

    def vector(self, n):
        return np.array([self() for _ in range(n)])


# ---------------------------------------------------------------- toy world

LATENT_DIM, STYLE_DIM, NUM_LAYERS, NUM_CLASSES = 4, 5, 4, 3
H = W = 32
A = np.array(
    [
        [0.015, 0.0, 0.005, 0.0],
        [0.0, 0.015, 0.0, 0.005],
        [0.0, 0.0, 0.25, 0.025],
        [0.0, 0.0, -0.025, 0.25],
        [0.05, 0.0, 0.0, 0.15],
    ]
)
B = np.zeros((3, 5))
B[0, 0], B[2, 0] = -0.03, 0.03
ALPHA = np.array([-20.0, 0.0, 20.0])
GAMMA = np.array([-0.3, 0.0, -0.7])
SIGMA0, SIGMA_MIN, SIGMA_MAX = 0.10, 0.04, 0.20
AMP0, AMP_MIN, AMP_MAX = 0.75, 0.05, 1.0
POOL = 2


def seed_latent(rng_seed, cls, seed_id):
    return Normals(derive_seed(rng_seed, cls, seed_id)).vector(LATENT_DIM)


def map_w(z, cls):
    return A @ z + B[cls]


def mean_style(cls, samples, seed):
    """Plain arithmetic mean (the library uses a running update)."""
    n = Normals(derive_seed(seed, cls))
    ws = np.array([map_w(n.vector(LATENT_DIM), cls) for _ in range(samples)])
    return ws.mean(axis=0)


def mean_styles(samples, rng_seed):
    seed = derive_seed(rng_seed, 0x6D65616E5F777)
    return [mean_style(c, samples, seed) for c in range(NUM_CLASSES)]


def style_code(w):
    return np.tile(w, (NUM_LAYERS, 1))


def truncate(code, w_bar, psi, cutoff):
    out = code.copy()
    out[:cutoff] = w_bar + psi * (code[:cutoff] - w_bar)
    return out


def mix(src, rival, layers, lam):
    out = src.copy()
    for l in layers:
        out[l] = (1 - lam) * src[l] + lam * rival[l]
    return out


def blob(code):
    cx = 0.5 + code[0:2, 0].mean()
    cy = 0.5 + code[0:2, 1].mean()
    sx = np.clip(SIGMA0 * (1 + code[2, 2]), SIGMA_MIN, SIGMA_MAX)
    sy = np.clip(SIGMA0 * (1 + code[2, 3]), SIGMA_MIN, SIGMA_MAX)
    a = np.clip(AMP0 + code[3, 4], AMP_MIN, AMP_MAX)
    return cx, cy, sx, sy, a


def synthesize(code):
    cx, cy, sx, sy, a = blob(code)
    py = (np.arange(H) + 0.5) / H
    px = (np.arange(W) + 0.5) / W
    img = a * np.exp(-((px[None, :] - cx) ** 2 / (2 * sx * sx) + (py[:, None] - cy) ** 2 / (2 * sy * sy)))
    return np.clip(img, 0.0, 1.0)


def logits(img):
    pooled = img.reshape(H // POOL, POOL, W // POOL, POOL).mean(axis=(1, 3))
    xs = (np.arange(W // POOL) + 0.5) / (W // POOL)
    out = []
    for k in range(NUM_CLASSES):
        wk = ALPHA[k] * (xs[None, :] - 0.5) + GAMMA[k]
        out.append(float((wk * pooled).sum()))
    return np.array(out)


def probs(img):
    l = logits(img)
    e = np.exp(l - l.max())
    return e / e.sum()


def render(z, cls, means, psi, cutoff=NUM_LAYERS):
    code = truncate(style_code(map_w(z, cls)), means[cls], psi, cutoff)
    return code, synthesize(code)


# ---------------------------------------------------------------- gates

P_MIN, DELTA, TAU_SSIM, TAU_L2 = 0.90, 0.50, 0.95, 0.20


def top2(p):
    order = np.argsort(-p, kind="stable")
    return int(order[0]), float(p[order[0]]), float(p[order[0]] - p[order[1]])


def baseline_ok(p, cls):
    top, conf, margin = top2(p)
    return top == cls and conf >= P_MIN and margin >= DELTA


# ---------------------------------------------------------------- metrics


def luma(img):
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        return img
    if img.shape[2] >= 3:
        return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]
    return img[..., 0]


def ssim(x, y, win=8, k1=0.01, k2=0.03):
    """Mean SSIM over non-overlapping tiles; edge tiles keep their partial size.

    Uses moment identities (E[xy] - E[x]E[y]) rather than centred sums.
    """
    a, b = luma(x), luma(y)
    c1, c2 = k1 * k1, k2 * k2
    vals = []
    for r in range(0, a.shape[0], win):
        for c in range(0, a.shape[1], win):
            ta, tb = a[r : r + win, c : c + win], b[r : r + win, c : c + win]
            ma, mb = ta.mean(), tb.mean()
            va = (ta * ta).mean() - ma * ma
            vb = (tb * tb).mean() - mb * mb
            cov = (ta * tb).mean() - ma * mb
            vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def l2(x, y):
    return float(np.sqrt(np.mean((np.asarray(x, float) - np.asarray(y, float)) ** 2)))


def screen_ok(ref, cand):
    return ssim(ref, cand) >= TAU_SSIM and l2(ref, cand) <= TAU_L2


def pyramid(img, levels=3):
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        img = img[..., None]
    feats = []
    for ch in range(img.shape[2]):
        plane = img[..., ch]
        for lvl in range(levels):
            if lvl > 0 and plane.shape[0] >= 2 and plane.shape[1] >= 2:
                h, w = plane.shape[0] // 2, plane.shape[1] // 2
                plane = plane[: 2 * h, : 2 * w].reshape(h, 2, w, 2).mean(axis=(1, 3))
            feats.append(plane.ravel() / math.sqrt(plane.size))
    return np.concatenate(feats)


def rademacher(dim, n, seed):
    m = np.empty((dim, n))
    for i in range(dim):
        for j in range(n):
            m[i, j] = -1.0 if splitmix(derive_seed(seed, i, j)) >> 63 else 1.0
    return m


def embed(img, levels=3, dim=64, seed=0x5EED):
    f = pyramid(img, levels)
    return rademacher(dim, f.size, seed) @ f / math.sqrt(dim)
