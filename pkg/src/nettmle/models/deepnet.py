"""Adversarial MLP outcome model with a temporal U-net and gradient reversal.

Architecture, applied to a window of T_r steps of panel features:

    S = relu(relu(x W1 + b1) W2 + b2)            backbone, per time step
    K = temporal(S)[:, -1, :]                    U-net along the time axis
    ŷ = expit(K w_y + b_y)                       outcome head
    â = expit(GRL(K) w_a + b_a)                  intervention head

The temporal module halves the time extent with linear maps D_k along the
time axis (T_r → ⌈T_r/2⌉ → ... → 1), then climbs back with up-projections
E_k, concatenating the encoder output of the same length on the channel
axis and mixing with C_k. With T_r = 1 it is the identity.

GRL is the identity forward and multiplies the gradient by −λ backward, so
θ_b, θ_t and θ_y descend ΣL_y − λΣL_a while θ_a descends its own ΣL_a.
All arithmetic is float64 and gradients are hand-derived.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from nettmle.config import TrainConfig
from nettmle.errors import TrainingDivergedError

logger = logging.getLogger(__name__)

MAGIC = "NETTMLE-MLP v1"
PROB_EPS = 1e-7
OUTCOME_CLIP = (0.05, 0.95)


def temporal_lengths(reception_field: int) -> list[int]:
    """Time extents of the encoder levels, e.g. 9 → [9, 5, 3, 2, 1]."""
    if reception_field < 1:
        raise ValueError(f"reception_field must be >= 1, got {reception_field}")
    lengths = [reception_field]
    while lengths[-1] > 1:
        lengths.append(math.ceil(lengths[-1] / 2))
    return lengths


def _shapes(n_features: int, reception_field: int, hidden: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        "b.W1": (n_features, hidden),
        "b.b1": (hidden,),
        "b.W2": (hidden, hidden),
        "b.b2": (hidden,),
    }
    lengths = temporal_lengths(reception_field)
    for k in range(len(lengths) - 1):
        lk, lnext = lengths[k], lengths[k + 1]
        shapes[f"t.D{k}"] = (lnext, lk)
        shapes[f"t.d{k}"] = (lnext,)
        shapes[f"t.E{k}"] = (lk, lnext)
        shapes[f"t.e{k}"] = (lk,)
        shapes[f"t.C{k}"] = (2 * hidden, hidden)
        shapes[f"t.c{k}"] = (hidden,)
    shapes.update({"y.w": (hidden,), "y.b": (1,), "a.w": (hidden,), "a.b": (1,)})
    return shapes


@dataclass
class MlpParams:
    """Parameter blocks θ_b (``b.*``), θ_t (``t.*``), θ_y (``y.*``), θ_a (``a.*``).

    ``input_mean`` and ``input_std`` standardize raw feature windows; ``lam``
    is the reversal strength reached at the end of training.
    """

    reception_field: int
    hidden_dim: int
    n_features: int
    arrays: dict[str, np.ndarray]
    input_mean: np.ndarray
    input_std: np.ndarray
    lam: float = 0.0
    history: list[dict[str, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        expected = _shapes(self.n_features, self.reception_field, self.hidden_dim)
        if set(expected) != set(self.arrays):
            raise ValueError(f"parameter blocks {sorted(self.arrays)} do not match {sorted(expected)}")
        for name, shape in expected.items():
            arr = self.arrays[name]
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")
        if self.input_mean.shape != (self.n_features,) or self.input_std.shape != (self.n_features,):
            raise ValueError("input standardization must have one entry per feature")

    @property
    def n_levels(self) -> int:
        return len(temporal_lengths(self.reception_field)) - 1

    def group(self, prefix: str) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.arrays.items() if k.startswith(prefix + ".")}

    @property
    def theta_b(self) -> dict[str, np.ndarray]:
        return self.group("b")

    @property
    def theta_t(self) -> dict[str, np.ndarray]:
        return self.group("t")

    @property
    def theta_y(self) -> dict[str, np.ndarray]:
        return self.group("y")

    @property
    def theta_a(self) -> dict[str, np.ndarray]:
        return self.group("a")

    def copy(self) -> MlpParams:
        return MlpParams(
            reception_field=self.reception_field,
            hidden_dim=self.hidden_dim,
            n_features=self.n_features,
            arrays={k: v.copy() for k, v in self.arrays.items()},
            input_mean=self.input_mean.copy(),
            input_std=self.input_std.copy(),
            lam=self.lam,
        )

    @classmethod
    def initialize(
        cls,
        n_features: int,
        reception_field: int,
        hidden_dim: int,
        rng: np.random.Generator,
    ) -> MlpParams:
        """He-normal weights, zero biases, identity standardization."""
        arrays = {}
        for name, shape in _shapes(n_features, reception_field, hidden_dim).items():
            kind = name.split(".")[1][0]
            if kind in "bdec":
                arrays[name] = np.zeros(shape)
                continue
            # time-axis maps act on their second axis
            fan_in = shape[1] if kind in "DE" else shape[0]
            arrays[name] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
        return cls(
            reception_field=reception_field,
            hidden_dim=hidden_dim,
            n_features=n_features,
            arrays=arrays,
            input_mean=np.zeros(n_features),
            input_std=np.ones(n_features),
        )

    @classmethod
    def zeros(cls, n_features: int, reception_field: int, hidden_dim: int) -> MlpParams:
        shapes = _shapes(n_features, reception_field, hidden_dim)
        return cls(
            reception_field=reception_field,
            hidden_dim=hidden_dim,
            n_features=n_features,
            arrays={k: np.zeros(s) for k, s in shapes.items()},
            input_mean=np.zeros(n_features),
            input_std=np.ones(n_features),
        )


# ── Forward ───────────────────────────────────────────────────


@dataclass
class _Cache:
    x: np.ndarray
    a1: np.ndarray
    h1: np.ndarray
    a2: np.ndarray
    enc: list[np.ndarray]
    enc_pre: list[np.ndarray]
    dec: list[np.ndarray]
    dec_cat: list[np.ndarray]
    dec_pre: list[np.ndarray]
    rep: np.ndarray
    z_y: np.ndarray
    z_a: np.ndarray


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _check_window(params: MlpParams, window: np.ndarray) -> np.ndarray:
    window = np.asarray(window, dtype=np.float64)
    expected = (params.reception_field, params.n_features)
    if window.ndim != 3 or window.shape[1:] != expected:
        raise ValueError(f"window has shape {window.shape}, expected (batch, {expected[0]}, {expected[1]})")
    return window


def backbone(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Per-time-step feature extraction S on standardized inputs (B, T, F)."""
    p = params.arrays
    return _relu(_relu(x @ p["b.W1"] + p["b.b1"]) @ p["b.W2"] + p["b.b2"])


def _temporal(params: MlpParams, s: np.ndarray) -> tuple[list, list, list, list, list]:
    p = params.arrays
    enc, enc_pre = [s], []
    for k in range(params.n_levels):
        pre = np.einsum("ij,bjh->bih", p[f"t.D{k}"], enc[k]) + p[f"t.d{k}"][None, :, None]
        enc_pre.append(pre)
        enc.append(_relu(pre))

    # decoder lists are built deepest level first, then reversed
    dec, dec_cat, dec_pre = [enc[-1]], [], []
    for k in reversed(range(params.n_levels)):
        up = np.einsum("ij,bjh->bih", p[f"t.E{k}"], dec[-1]) + p[f"t.e{k}"][None, :, None]
        cat = np.concatenate([up, enc[k]], axis=-1)
        pre = cat @ p[f"t.C{k}"] + p[f"t.c{k}"]
        dec_cat.append(cat)
        dec_pre.append(pre)
        dec.append(_relu(pre))
    return enc, enc_pre, dec[::-1], dec_cat[::-1], dec_pre[::-1]


def temporal(params: MlpParams, s: np.ndarray) -> np.ndarray:
    """U-net output over the full window (B, T, H); identity when T_r = 1."""
    return _temporal(params, s)[2][0]


def _forward(params: MlpParams, window: np.ndarray) -> _Cache:
    window = _check_window(params, window)
    p = params.arrays
    x = (window - params.input_mean) / params.input_std
    a1 = x @ p["b.W1"] + p["b.b1"]
    h1 = _relu(a1)
    a2 = h1 @ p["b.W2"] + p["b.b2"]
    enc, enc_pre, dec, dec_cat, dec_pre = _temporal(params, _relu(a2))
    rep = dec[0][:, -1, :]
    return _Cache(
        x=x,
        a1=a1,
        h1=h1,
        a2=a2,
        enc=enc,
        enc_pre=enc_pre,
        dec=dec,
        dec_cat=dec_cat,
        dec_pre=dec_pre,
        rep=rep,
        z_y=rep @ p["y.w"] + p["y.b"][0],
        z_a=rep @ p["a.w"] + p["a.b"][0],
    )


def forward(params: MlpParams, window: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Outcome probability ŷ, intervention probability â, and representation K."""
    cache = _forward(params, window)
    return expit(cache.z_y), expit(cache.z_a), cache.rep


def predict_outcome(
    params: MlpParams,
    window: np.ndarray,
    clip: tuple[float, float] = OUTCOME_CLIP,
) -> np.ndarray:
    """Outcome probability clipped to ``clip`` for use in targeting."""
    upsilon_hat, _, _ = forward(params, window)
    return np.clip(upsilon_hat, *clip)


# ── Loss and backward ─────────────────────────────────────────


def _bce(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def _bce_grad(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d BCE(clip(expit(z)), y) / dz: p − y inside the clip range, 0 outside."""
    p = expit(z)
    inside = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
    return np.where(inside, p - y, 0.0)


def loss(
    upsilon_hat: np.ndarray,
    upsilon: np.ndarray,
    alpha_hat: np.ndarray,
    alpha: np.ndarray,
    lam: float,
    labeled: np.ndarray | None = None,
) -> tuple[float, float, float]:
    """Summed outcome loss L_y (labeled records only), L_a, and L = L_y − λ·L_a."""
    labeled = np.ones(len(upsilon_hat), dtype=bool) if labeled is None else labeled
    upsilon = np.where(labeled, upsilon, 0.0)
    l_y = float(_bce(upsilon_hat, upsilon)[labeled].sum())
    l_a = float(_bce(alpha_hat, alpha).sum())
    return l_y, l_a, l_y - lam * l_a


def loss_and_gradients(
    params: MlpParams,
    window: np.ndarray,
    upsilon: np.ndarray,
    alpha: np.ndarray,
    lam: float,
    labeled: np.ndarray | None = None,
) -> tuple[tuple[float, float, float], dict[str, np.ndarray]]:
    """Summed losses and the gradient of every parameter block.

    Gradients of θ_b, θ_t and θ_y are those of ΣL_y − λΣL_a; the gradient of
    θ_a is that of ΣL_a.
    """
    cache = _forward(params, window)
    p = params.arrays
    labeled = np.ones(len(cache.rep), dtype=bool) if labeled is None else np.asarray(labeled, dtype=bool)
    upsilon = np.where(labeled, np.nan_to_num(np.asarray(upsilon, dtype=np.float64)), 0.0)
    alpha = np.asarray(alpha, dtype=np.float64)
    losses = loss(expit(cache.z_y), upsilon, expit(cache.z_a), alpha, lam, labeled)

    g: dict[str, np.ndarray] = {}
    gz_y = np.where(labeled, _bce_grad(cache.z_y, upsilon), 0.0)
    gz_a = _bce_grad(cache.z_a, alpha)
    g["y.w"] = cache.rep.T @ gz_y
    g["y.b"] = np.array([gz_y.sum()])
    g["a.w"] = cache.rep.T @ gz_a
    g["a.b"] = np.array([gz_a.sum()])

    # Reversal: the adversary's signal reaches K scaled by −λ.
    g_rep = np.outer(gz_y, p["y.w"]) - lam * np.outer(gz_a, p["a.w"])
    g_dec = np.zeros_like(cache.dec[0])
    g_dec[:, -1, :] = g_rep

    hidden = params.hidden_dim
    g_enc = [np.zeros_like(e) for e in cache.enc]
    for k in range(params.n_levels):
        g_pre = g_dec * (cache.dec_pre[k] > 0)
        g[f"t.C{k}"] = np.einsum("bic,bih->ch", cache.dec_cat[k], g_pre)
        g[f"t.c{k}"] = g_pre.sum(axis=(0, 1))
        g_cat = g_pre @ p[f"t.C{k}"].T
        g_up = g_cat[..., :hidden]
        g_enc[k] += g_cat[..., hidden:]
        g[f"t.E{k}"] = np.einsum("bih,bjh->ij", g_up, cache.dec[k + 1])
        g[f"t.e{k}"] = g_up.sum(axis=(0, 2))
        g_dec = np.einsum("ij,bih->bjh", p[f"t.E{k}"], g_up)
    g_enc[params.n_levels] += g_dec

    for k in reversed(range(params.n_levels)):
        g_pre = g_enc[k + 1] * (cache.enc_pre[k] > 0)
        g[f"t.D{k}"] = np.einsum("bih,bjh->ij", g_pre, cache.enc[k])
        g[f"t.d{k}"] = g_pre.sum(axis=(0, 2))
        g_enc[k] += np.einsum("ij,bih->bjh", p[f"t.D{k}"], g_pre)

    g_a2 = g_enc[0] * (cache.a2 > 0)
    g["b.W2"] = np.einsum("btf,bth->fh", cache.h1, g_a2)
    g["b.b2"] = g_a2.sum(axis=(0, 1))
    g_a1 = (g_a2 @ p["b.W2"].T) * (cache.a1 > 0)
    g["b.W1"] = np.einsum("btf,bth->fh", cache.x, g_a1)
    g["b.b1"] = g_a1.sum(axis=(0, 1))
    return losses, g


# ── Training ──────────────────────────────────────────────────


@dataclass
class WindowSet:
    """Feature windows (records, T_r, F) with intervention labels and optional outcomes."""

    windows: np.ndarray
    alpha: np.ndarray
    upsilon: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(self.windows) != len(self.alpha):
            raise ValueError(f"{len(self.windows)} windows but {len(self.alpha)} intervention labels")
        if self.upsilon is not None and len(self.upsilon) != len(self.windows):
            raise ValueError(f"{len(self.windows)} windows but {len(self.upsilon)} outcomes")

    def __len__(self) -> int:
        return len(self.windows)


def _standardization(windows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = windows.reshape(-1, windows.shape[-1])
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def train(
    observed: WindowSet,
    sampled: WindowSet | None,
    config: TrainConfig,
    params: MlpParams | None = None,
) -> MlpParams:
    """Mini-batch gradient descent towards the saddle point of ΣL_y − λΣL_a.

    Each epoch mixes every observed record with an equal number of sampled
    records drawn without replacement. Outcome gradients come from observed
    records only; the intervention head sees both.
    """
    if observed.upsilon is None:
        raise ValueError("observed windows need outcome labels")
    if observed.windows.shape[1] != config.reception_field:
        raise ValueError(
            f"windows span {observed.windows.shape[1]} steps, reception_field is {config.reception_field}"
        )
    rng = np.random.default_rng(config.seed)
    n_features = observed.windows.shape[2]
    if params is None:
        params = MlpParams.initialize(n_features, config.reception_field, config.hidden_dim, rng)
        params.input_mean, params.input_std = _standardization(observed.windows)
    params = params.copy()

    n_obs = len(observed)
    n_sampled = len(sampled) if sampled is not None else 0
    per_epoch = n_obs + min(n_obs, n_sampled)
    batches_per_epoch = math.ceil(per_epoch / config.batch_size)
    total_steps = config.n_epochs * batches_per_epoch
    step = 0
    lam = 0.0

    for epoch in range(config.n_epochs):
        if n_sampled:
            pick = rng.choice(n_sampled, size=min(n_obs, n_sampled), replace=False)
            windows = np.concatenate([observed.windows, sampled.windows[pick]])
            alpha = np.concatenate([observed.alpha, sampled.alpha[pick]])
        else:
            windows, alpha = observed.windows, observed.alpha
        upsilon = np.concatenate([observed.upsilon, np.zeros(len(windows) - n_obs)])
        labeled = np.arange(len(windows)) < n_obs
        order = rng.permutation(len(windows))

        epoch_ly = epoch_la = 0.0
        for b in range(batches_per_epoch):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            lam = config.lambda_at(step / max(total_steps - 1, 1))
            (l_y, l_a, total), grads = loss_and_gradients(
                params, windows[idx], upsilon[idx], alpha[idx], lam, labeled[idx]
            )
            if not np.isfinite(total):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {b} "
                    f"(L_y={l_y}, L_a={l_a}, lambda={lam:.4f}, {len(idx)} records)"
                )
            scale = config.learning_rate / len(idx)
            for name, grad in grads.items():
                params.arrays[name] -= scale * grad
            epoch_ly += l_y
            epoch_la += l_a
            step += 1

        stats = {
            "epoch": float(epoch),
            "loss_y": epoch_ly / n_obs,
            "loss_a": epoch_la / len(windows),
            "lambda": lam,
        }
        params.history.append(stats)
        logger.debug(
            "epoch %d: L_y=%.5f L_a=%.5f lambda=%.4f", epoch, stats["loss_y"], stats["loss_a"], lam
        )
    params.lam = lam
    return params


# ── Checkpoints ───────────────────────────────────────────────


def save_params(params: MlpParams, path: str | Path) -> None:
    """Write the versioned text checkpoint: header, then shape line and row-major values per block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blocks = dict(params.arrays)
    blocks["input.mean"] = params.input_mean
    blocks["input.std"] = params.input_std
    with open(path, "w") as f:
        f.write(f"{MAGIC}\n")
        f.write(
            f"reception_field={params.reception_field} hidden_dim={params.hidden_dim} "
            f"n_features={params.n_features} lambda={float(params.lam):.17g}\n"
        )
        for name, arr in blocks.items():
            f.write(f"{name} {' '.join(str(d) for d in arr.shape)}\n")
            f.write(" ".join(f"{v:.17g}" for v in arr.ravel()) + "\n")


def load_params(path: str | Path) -> MlpParams:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{path} is not a {MAGIC} checkpoint")
    header = dict(item.split("=", 1) for item in lines[1].split())
    blocks: dict[str, np.ndarray] = {}
    for i in range(2, len(lines), 2):
        name, *dims = lines[i].split()
        shape = tuple(int(d) for d in dims)
        values = np.array([float(v) for v in lines[i + 1].split()], dtype=np.float64)
        blocks[name] = values.reshape(shape)
    return MlpParams(
        reception_field=int(header["reception_field"]),
        hidden_dim=int(header["hidden_dim"]),
        n_features=int(header["n_features"]),
        input_mean=blocks.pop("input.mean"),
        input_std=blocks.pop("input.std"),
        arrays=blocks,
        lam=float(header["lambda"]),
    )
