"""Seeded synthetic data-generating processes.

All generators share the additive outcome model

    Y = theta(T) + g(X) + eps,    eps ~ N(0, 0.5^2),

with T ~ Uniform(-2, 2) independent of X and confounder
g(X) = X_1 + 0.5 X_2^2 - 0.3 X_3.  Contamination adds a jump to the
outcome of exactly floor(p * n) samples; the jump law and its treatment
support depend on the DGP kind.  Every generator is a pure function of
its arguments (bit-identical output for identical inputs).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import child_rng

NOISE_SD = 0.5

_BASE_KINDS = (
    "parabola",
    "sinusoidal",
    "sinusoidal_region",
    "sinusoidal_asymmetric",
    "sinusoidal_heavytail",
    "t_family",
    "ihdp_like",
)


@dataclass(frozen=True)
class DgpKind:
    """A dose-response shape plus a contamination law.

    ``nu`` is the Student-t degrees of freedom, used only by t_family.
    """

    name: str
    nu: int | None = None

    def __post_init__(self):
        if self.name not in _BASE_KINDS:
            raise ValueError(f"unknown DGP kind: {self.name!r}")
        if self.name == "t_family":
            if self.nu is None or self.nu < 2:
                raise ValueError("t_family requires nu >= 2")
        elif self.nu is not None:
            raise ValueError(f"{self.name} takes no nu parameter")

    @property
    def label(self) -> str:
        if self.name == "t_family":
            return f"t_family_nu{self.nu}"
        return self.name


PARABOLA = DgpKind("parabola")
SINUSOIDAL = DgpKind("sinusoidal")
SINUSOIDAL_REGION = DgpKind("sinusoidal_region")
SINUSOIDAL_ASYMMETRIC = DgpKind("sinusoidal_asymmetric")
SINUSOIDAL_HEAVYTAIL = DgpKind("sinusoidal_heavytail")
IHDP_LIKE = DgpKind("ihdp_like")

MAIN_KINDS = (
    PARABOLA,
    SINUSOIDAL,
    SINUSOIDAL_REGION,
    SINUSOIDAL_ASYMMETRIC,
    SINUSOIDAL_HEAVYTAIL,
)


def parse_kind(label: str) -> DgpKind:
    """Inverse of DgpKind.label, e.g. 't_family_nu3' -> t_family(nu=3)."""
    if label.startswith("t_family"):
        tail = label.removeprefix("t_family").removeprefix("_nu")
        return DgpKind("t_family", nu=int(tail) if tail else 3)
    return DgpKind(label)


@dataclass
class Dataset:
    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    outlier_mask: np.ndarray
    kind: DgpKind
    p_contam: float
    seed: int
    # diagnostic: the additive jump applied per sample (0 where clean)
    jumps: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def true_curve(self, grid: np.ndarray) -> np.ndarray:
        return true_theta(self.kind, grid)


@dataclass
class MultiDataset:
    x: np.ndarray
    t: np.ndarray  # (n, d)
    y: np.ndarray
    outlier_mask: np.ndarray
    d: int
    p_contam: float
    seed: int

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclass
class TimeSeriesDataset:
    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    outlier_mask: np.ndarray
    rho: float
    trend: np.ndarray
    p_contam: float = 0.0
    seed: int = 0

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclass
class BinaryDataset:
    x: np.ndarray  # (n, 10)
    treat: np.ndarray  # boolean
    y: np.ndarray
    true_tau: np.ndarray
    outlier_mask: np.ndarray
    p_contam: float = 0.0
    seed: int = 0

    @property
    def n(self) -> int:
        return self.y.shape[0]


def true_theta(kind: DgpKind, t) -> np.ndarray:
    """Ground-truth dose-response function evaluated at treatment t."""
    t = np.asarray(t, dtype=float)
    if kind.name == "parabola":
        return 0.5 * t**2
    if kind.name == "ihdp_like":
        return 2.0 * np.tanh(0.8 * t) + 0.3 * np.sin(1.5 * t)
    # all sinusoidal variants and the t-family share one curve
    return np.sin(np.pi * t / 2.0) + 0.5 * t


def confounder(x: np.ndarray) -> np.ndarray:
    """g(X) = X_1 + 0.5 X_2^2 - 0.3 X_3 (first three columns)."""
    return x[:, 0] + 0.5 * x[:, 1] ** 2 - 0.3 * x[:, 2]


def _ihdp_confounder(x: np.ndarray) -> np.ndarray:
    # continuous block plus a few binary main effects and one interaction
    return (
        x[:, 0]
        + 0.5 * x[:, 1] ** 2
        - 0.3 * x[:, 2]
        + 0.4 * x[:, 6]
        + 0.3 * x[:, 7]
        - 0.2 * x[:, 8]
        + 0.25 * x[:, 9] * x[:, 0]
    )


def _draw_jumps(kind: DgpKind, k: int, rng: np.random.Generator) -> np.ndarray:
    """Additive contamination jumps for k flagged samples."""
    if kind.name == "sinusoidal_heavytail":
        return 6.0 * rng.standard_t(3, size=k)
    if kind.name == "t_family":
        return 6.0 * rng.standard_t(kind.nu, size=k)
    if kind.name == "ihdp_like":
        mags = np.abs(rng.normal(8.0, 2.0, size=k))
        return rng.choice([-1.0, 1.0], size=k) * mags
    mags = np.abs(rng.normal(12.0, 3.0, size=k))
    if kind.name == "sinusoidal_asymmetric":
        return mags
    return rng.choice([-1.0, 1.0], size=k) * mags


def generate(
    kind: DgpKind,
    n: int = 800,
    p_contam: float = 0.0,
    seed: int = 0,
    p_cov: int = 5,
) -> Dataset:
    """Generate one dataset of size n with contamination fraction p_contam.

    For the region kind the flagged samples' treatments are placed
    uniformly in [0, 1] so the contamination concentrates in a window of
    width 1 regardless of p_contam; all other kinds contaminate uniformly
    over the sample.
    """
    if n < 20:
        raise ValueError("n must be >= 20")
    if not 0.0 <= p_contam <= 0.5:
        raise ValueError("p_contam must be in [0, 0.5]")

    if kind.name == "ihdp_like":
        rng = child_rng(seed, "dgp", kind.label, n)
        x_cont = rng.standard_normal((n, 6))
        x_bin = (rng.random((n, 19)) < 0.3).astype(float)
        x = np.hstack([x_cont, x_bin])
        g = _ihdp_confounder(x)
    else:
        rng = child_rng(seed, "dgp", kind.label, n, p_cov)
        x = rng.standard_normal((n, p_cov))
        g = confounder(x)

    t = rng.uniform(-2.0, 2.0, size=n)
    eps = rng.normal(0.0, NOISE_SD, size=n)

    k = int(np.floor(p_contam * n))
    idx = rng.choice(n, size=k, replace=False) if k > 0 else np.empty(0, dtype=int)
    if kind.name == "sinusoidal_region" and k > 0:
        t[idx] = rng.uniform(0.0, 1.0, size=k)

    y = true_theta(kind, t) + g + eps
    jumps = np.zeros(n)
    if k > 0:
        jumps[idx] = _draw_jumps(kind, k, rng)
        y[idx] += jumps[idx]

    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return Dataset(x=x, t=t, y=y, outlier_mask=mask, kind=kind,
                   p_contam=p_contam, seed=seed, jumps=jumps)


def true_theta_multi(d: int, *ts) -> np.ndarray:
    """True surface: sin(pi t1 / 2) + 0.5 t2 + 0.3 t1 t2 (+ 0.2 t3^2 at d=3)."""
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")
    t1, t2 = np.asarray(ts[0], float), np.asarray(ts[1], float)
    out = np.sin(np.pi * t1 / 2.0) + 0.5 * t2 + 0.3 * t1 * t2
    if d == 3:
        out = out + 0.2 * np.asarray(ts[2], float) ** 2
    return out


def generate_multi(d: int, n: int = 800, p_contam: float = 0.0, seed: int = 0) -> MultiDataset:
    """Multi-treatment dataset with a d-dimensional dose vector."""
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")
    rng = child_rng(seed, "dgp_multi", d, n)
    x = rng.standard_normal((n, 5))
    t = rng.uniform(-2.0, 2.0, size=(n, d))
    eps = rng.normal(0.0, NOISE_SD, size=n)
    y = true_theta_multi(d, *(t[:, j] for j in range(d))) + confounder(x) + eps

    k = int(np.floor(p_contam * n))
    idx = rng.choice(n, size=k, replace=False) if k > 0 else np.empty(0, dtype=int)
    if k > 0:
        mags = np.abs(rng.normal(12.0, 3.0, size=k))
        y[idx] += rng.choice([-1.0, 1.0], size=k) * mags
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return MultiDataset(x=x, t=t, y=y, outlier_mask=mask, d=d,
                        p_contam=p_contam, seed=seed)


def generate_ts(n: int = 1000, rho: float = 0.7, p_contam: float = 0.0, seed: int = 0) -> TimeSeriesDataset:
    """AR(1)-covariate time series with a sinusoidal trend.

    Contamination is one contiguous block of floor(p * n) timestamps with
    jumps of +-10 standard deviations of the clean outcome series.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must be in [0, 1)")
    rng = child_rng(seed, "dgp_ts", n, round(rho * 1000))
    innov_scale = np.sqrt(1.0 - rho**2) if rho > 0 else 1.0
    x = np.empty((n, 5))
    innov = rng.standard_normal((n, 5))
    x[0] = innov[0]
    for i in range(1, n):
        x[i] = rho * x[i - 1] + innov_scale * innov[i]

    tidx = np.arange(n)
    trend = 0.6 * np.sin(2.0 * np.pi * tidx / 250.0)
    t = 0.3 * x[:, 0] + 0.3 * x[:, 1] + rng.standard_normal(n)
    y = (true_theta(SINUSOIDAL, t) + x[:, 0] + 0.3 * x[:, 1] + trend
         + rng.normal(0.0, NOISE_SD, size=n))

    k = int(np.floor(p_contam * n))
    mask = np.zeros(n, dtype=bool)
    if k > 0:
        sd_clean = float(np.std(y))  # scale fixed before injection
        start = int(rng.integers(0, n - k + 1))
        block = np.arange(start, start + k)
        y[block] += rng.choice([-1.0, 1.0], size=k) * 10.0 * sd_clean
        mask[block] = True
    return TimeSeriesDataset(x=x, t=t, y=y, outlier_mask=mask, rho=rho,
                             trend=trend, p_contam=p_contam, seed=seed)


def generate_binary(n: int = 2000, p_contam: float = 0.0, seed: int = 0) -> BinaryDataset:
    """Binary-treatment dataset with heterogeneous effect tau(x).

    tau(x) = 1 + 0.5 x_1 - 0.3 x_2^2, propensity e(x) = sigmoid(0.3 x_3);
    contamination adds N(8, 2^2) draws to floor(p * n) outcomes.
    """
    if n < 50:
        raise ValueError("n must be >= 50")
    rng = child_rng(seed, "dgp_binary", n)
    x = rng.standard_normal((n, 10))
    tau = 1.0 + 0.5 * x[:, 0] - 0.3 * x[:, 1] ** 2
    e = 1.0 / (1.0 + np.exp(-0.3 * x[:, 2]))
    treat = rng.random(n) < e
    m = x[:, 0] + 0.5 * x[:, 1] ** 2 - 0.3 * x[:, 2]
    y = m + treat * tau + rng.normal(0.0, NOISE_SD, size=n)

    k = int(np.floor(p_contam * n))
    idx = rng.choice(n, size=k, replace=False) if k > 0 else np.empty(0, dtype=int)
    if k > 0:
        y[idx] += rng.normal(8.0, 2.0, size=k)
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return BinaryDataset(x=x, treat=treat, y=y, true_tau=tau, outlier_mask=mask,
                         p_contam=p_contam, seed=seed)
