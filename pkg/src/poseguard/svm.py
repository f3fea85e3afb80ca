"""Binary SVM head trained by sequential minimal optimization.

The solver optimizes the usual dual (box constraint c, equality constraint
sum(alpha_i * y_i) = 0) by repeatedly picking a KKT-violating index and a
random partner under a seeded generator, so training is deterministic for a
fixed seed. Decision values are mapped to fight probabilities by a sigmoid
fitted with damped Newton iterations (Platt scaling).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dataset import LabeledSample, samples_to_arrays
from .errors import CalibrationError, DataError, ModelFormatError, PersistenceError, TrainingError

KERNEL_LINEAR = "linear"
KERNEL_RBF = "rbf"

MODEL_MAGIC = "poseguard-svm"
MODEL_VERSION = 1

# Alphas at or below this are treated as zero and not stored.
_ALPHA_FLOOR = 1e-10
# Minimum useful change in one alpha update step.
_MIN_ALPHA_STEP = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    kernel: str = KERNEL_RBF
    gamma: float | None = None  # None: 1 / (n_features * feature variance)
    c: float = 1.0
    tolerance: float = 1e-3
    max_passes: int = 10
    seed: int = 0
    max_sweeps: int = 5000

    def __post_init__(self) -> None:
        if self.kernel not in (KERNEL_LINEAR, KERNEL_RBF):
            raise DataError(f"unknown kernel {self.kernel!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise DataError(f"gamma must be positive, got {self.gamma}")
        if not self.c > 0:
            raise DataError(f"c must be positive, got {self.c}")
        if not self.tolerance > 0:
            raise DataError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes < 1:
            raise DataError(f"max_passes must be >= 1, got {self.max_passes}")


def resolve_gamma(config: SvmConfig, X: np.ndarray) -> float:
    """Fill in the variance-scaled default gamma for the RBF kernel."""
    if config.kernel == KERNEL_LINEAR:
        return 0.0
    if config.gamma is not None:
        return config.gamma
    var = float(X.var())
    if var <= 0.0:
        var = 1.0
    return 1.0 / (X.shape[1] * var)


def kernel_matrix(kernel: str, gamma: float, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if kernel == KERNEL_LINEAR:
        return A @ B.T
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@dataclass(frozen=True)
class SvmModel:
    """Trained head: support vectors with their dual weights and a bias.

    platt_a/platt_b map decision values to fight probabilities and are None
    until calibration.
    """

    support_vectors: np.ndarray  # (n_sv, dim)
    alphas: np.ndarray  # (n_sv,), each in (0, c]
    labels: np.ndarray  # (n_sv,), each in {-1, +1}
    bias: float
    kernel: str
    gamma: float
    c: float
    platt_a: float | None = None
    platt_b: float | None = None

    @property
    def dim(self) -> int:
        return int(self.support_vectors.shape[1])

    @property
    def calibrated(self) -> bool:
        return self.platt_a is not None and self.platt_b is not None

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise DataError(f"query dimension {X.shape[1]} != model dimension {self.dim}")
        K = kernel_matrix(self.kernel, self.gamma, X, self.support_vectors)
        return K @ (self.alphas * self.labels) + self.bias

    def decision_value(self, x: np.ndarray | Sequence[float]) -> float:
        """Signed margin surrogate; positive means fight."""
        return float(self.decision_values(np.asarray(x, dtype=np.float64))[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        """0/1 class labels (1 = fight) for a batch of feature rows."""
        return (self.decision_values(X) >= 0.0).astype(int)

    def predict_proba(self, x: np.ndarray | Sequence[float]) -> float:
        """Calibrated fight probability in [0, 1] for one feature vector."""
        if not self.calibrated:
            raise CalibrationError("model has no Platt calibration; train or calibrate first")
        return float(_sigmoid(self.platt_a * self.decision_value(x) + self.platt_b))

    def with_calibration(self, platt_a: float, platt_b: float) -> "SvmModel":
        return replace(self, platt_a=platt_a, platt_b=platt_b)


def _sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return np.where(
        np.asarray(z) >= 0,
        1.0 / (1.0 + np.exp(-np.clip(z, -500, 500))),
        np.exp(np.clip(z, -500, 500)) / (1.0 + np.exp(np.clip(z, -500, 500))),
    )


def dual_objective(alphas: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    """Value of the dual being maximized: sum(a) - 1/2 (a*y)' K (a*y)."""
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ K @ ay)


class _SmoSolver:
    """Simplified SMO over a precomputed kernel matrix."""

    def __init__(self, K: np.ndarray, y: np.ndarray, config: SvmConfig):
        self.K = K
        self.y = y.astype(np.float64)
        self.c = config.c
        self.tol = config.tolerance
        self.max_passes = config.max_passes
        self.max_sweeps = config.max_sweeps
        self.rng = np.random.default_rng(config.seed)
        self.m = len(y)
        self.alphas = np.zeros(self.m)
        self.b = 0.0

    def _decision(self, i: int) -> float:
        return float((self.alphas * self.y) @ self.K[:, i] + self.b)

    def _step(self, i: int, j: int) -> bool:
        y, K, c = self.y, self.K, self.c
        e_i = self._decision(i) - y[i]
        e_j = self._decision(j) - y[j]
        a_i_old, a_j_old = self.alphas[i], self.alphas[j]
        if y[i] != y[j]:
            lo = max(0.0, a_j_old - a_i_old)
            hi = min(c, c + a_j_old - a_i_old)
        else:
            lo = max(0.0, a_i_old + a_j_old - c)
            hi = min(c, a_i_old + a_j_old)
        if lo >= hi:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0.0:
            return False
        a_j = a_j_old - y[j] * (e_i - e_j) / eta
        a_j = min(hi, max(lo, a_j))
        if abs(a_j - a_j_old) < _MIN_ALPHA_STEP:
            return False
        a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j)
        self.alphas[i] = a_i
        self.alphas[j] = a_j
        b1 = self.b - e_i - y[i] * (a_i - a_i_old) * K[i, i] - y[j] * (a_j - a_j_old) * K[i, j]
        b2 = self.b - e_j - y[i] * (a_i - a_i_old) * K[i, j] - y[j] * (a_j - a_j_old) * K[j, j]
        if 0.0 < a_i < c:
            self.b = b1
        elif 0.0 < a_j < c:
            self.b = b2
        else:
            self.b = 0.5 * (b1 + b2)
        return True

    def run(self) -> tuple[np.ndarray, float]:
        passes = 0
        sweeps = 0
        while passes < self.max_passes and sweeps < self.max_sweeps:
            sweeps += 1
            changed = 0
            for i in range(self.m):
                e_i = self._decision(i) - self.y[i]
                r_i = self.y[i] * e_i
                violates = (r_i < -self.tol and self.alphas[i] < self.c) or (
                    r_i > self.tol and self.alphas[i] > 0.0
                )
                if not violates:
                    continue
                j = int(self.rng.integers(self.m - 1))
                if j >= i:
                    j += 1
                if self._step(i, j):
                    changed += 1
            passes = passes + 1 if changed == 0 else 0
        return self.alphas, self.b


def _stable_bias(alphas: np.ndarray, y: np.ndarray, K: np.ndarray, c: float) -> float:
    """Bias from KKT conditions at the solved alphas.

    Mean over in-bound support vectors when any exist; otherwise the midpoint
    of the feasible interval implied by the bound alphas.
    """
    margins = K @ (alphas * y)  # decision values without bias
    eps = 1e-8 * c
    in_bounds = (alphas > eps) & (alphas < c - eps)
    if np.any(in_bounds):
        return float(np.mean(y[in_bounds] - margins[in_bounds]))
    lower = -np.inf
    upper = np.inf
    for i in range(len(y)):
        target = y[i] - margins[i]
        at_upper = alphas[i] >= c - eps
        # alpha=0 requires y*f >= 1; alpha=c requires y*f <= 1
        if y[i] > 0:
            if at_upper:
                upper = min(upper, target)
            else:
                lower = max(lower, target)
        else:
            if at_upper:
                lower = max(lower, target)
            else:
                upper = min(upper, target)
    if not np.isfinite(lower) and not np.isfinite(upper):
        return 0.0
    if not np.isfinite(lower):
        return float(upper)
    if not np.isfinite(upper):
        return float(lower)
    return float(0.5 * (lower + upper))


def fit_svm_arrays(X: np.ndarray, y01: np.ndarray, config: SvmConfig) -> SvmModel:
    """Train on raw arrays (labels in {0, 1}); dimension is generic."""
    X = np.asarray(X, dtype=np.float64)
    y01 = np.asarray(y01)
    if X.ndim != 2 or len(X) != len(y01):
        raise DataError("X must be 2-D with one label per row")
    if not np.all(np.isfinite(X)):
        raise DataError("features contain non-finite values")
    classes = set(int(v) for v in np.unique(y01))
    if not classes <= {0, 1}:
        raise TrainingError(f"labels must be 0/1, got {sorted(classes)}")
    if len(classes) < 2:
        raise TrainingError("training needs both classes present")

    y = np.where(y01 == 1, 1.0, -1.0)
    gamma = resolve_gamma(config, X)
    K = kernel_matrix(config.kernel, gamma, X, X)
    solver = _SmoSolver(K, y, config)
    alphas, _ = solver.run()
    bias = _stable_bias(alphas, y, K, config.c)

    keep = alphas > _ALPHA_FLOOR
    return SvmModel(
        support_vectors=X[keep].copy(),
        alphas=alphas[keep].copy(),
        labels=y[keep].astype(np.float64),
        bias=bias,
        kernel=config.kernel,
        gamma=gamma,
        c=config.c,
    )


def train_svm(samples: Sequence[LabeledSample], config: SvmConfig | None = None) -> SvmModel:
    """Train and Platt-calibrate a fight/normal SVM from labeled samples."""
    config = config or SvmConfig()
    X, y = samples_to_arrays(samples)
    model = fit_svm_arrays(X, y, config)
    # Calibrated on training decision values; optimistic but adequate at
    # this data scale (no internal cross-validation).
    a, b = fit_platt(model.decision_values(X), y)
    return model.with_calibration(a, b)


def kkt_violations(model: SvmModel, X: np.ndarray, y01: np.ndarray) -> np.ndarray:
    """Per-sample KKT residuals at the trained solution (0 = satisfied)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.where(np.asarray(y01) == 1, 1.0, -1.0)
    yf = y * model.decision_values(X)
    # Recover each training point's alpha (0 when it is not a support vector).
    # Support vectors are exact row copies of the training matrix, so identity
    # comparison is safe; duplicated rows share the first match's alpha.
    alphas = np.zeros(len(X))
    for idx, row in enumerate(X):
        match = np.where(np.all(model.support_vectors == row, axis=1))[0]
        if match.size:
            alphas[idx] = model.alphas[match[0]]
    eps = 1e-8 * model.c
    viol = np.zeros(len(X))
    free = (alphas > eps) & (alphas < model.c - eps)
    viol[alphas <= eps] = np.maximum(0.0, 1.0 - yf[alphas <= eps])
    viol[alphas >= model.c - eps] = np.maximum(0.0, yf[alphas >= model.c - eps] - 1.0)
    viol[free] = np.abs(yf[free] - 1.0)
    return viol


def fit_platt(decision_values: Sequence[float], labels: Sequence[int], max_iterations: int = 100) -> tuple[float, float]:
    """Fit (a, b) so that sigmoid(a*d + b) tracks the fight labels.

    Damped Newton on the cross-entropy of the fitted sigmoid, using Platt's
    smoothed targets (n+1)/(n+2) so separable decision values cannot push the
    slope to infinity. The returned slope is positive whenever larger decision
    values mean fight, so the probability is monotone increasing in d.
    """
    d = np.asarray(decision_values, dtype=np.float64)
    t01 = np.asarray(labels)
    if d.shape != t01.shape:
        raise DataError(f"lengths differ: {d.shape} decision values vs {t01.shape} labels")
    n_pos = int(np.sum(t01 == 1))
    n_neg = int(np.sum(t01 == 0))
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError("calibration needs both classes present")

    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(t01 == 1, hi, lo)

    a = 0.0
    b = float(np.log((n_pos + 1.0) / (n_neg + 1.0)))

    def nll(a_: float, b_: float) -> float:
        z = a_ * d + b_
        # log(1+exp(-|z|)) form avoids overflow on extreme z
        return float(np.sum(np.logaddexp(0.0, -z) * t + np.logaddexp(0.0, z) * (1.0 - t)))

    best = nll(a, b)
    lam = 1e-10
    for _ in range(max_iterations):
        p = np.asarray(_sigmoid(a * d + b))
        w = np.maximum(p * (1.0 - p), 1e-12)
        g_a = float(np.sum(d * (p - t)))
        g_b = float(np.sum(p - t))
        if abs(g_a) < 1e-9 and abs(g_b) < 1e-9:
            break
        h_aa = float(np.sum(d * d * w)) + lam
        h_ab = float(np.sum(d * w))
        h_bb = float(np.sum(w)) + lam
        det = h_aa * h_bb - h_ab * h_ab
        if det <= 0:
            lam = max(lam * 10.0, 1e-8)
            continue
        step_a = (h_bb * g_a - h_ab * g_b) / det
        step_b = (h_aa * g_b - h_ab * g_a) / det
        # Backtracking keeps Newton steps from overshooting
        scale = 1.0
        improved = False
        for _ in range(30):
            cand = nll(a - scale * step_a, b - scale * step_b)
            if cand < best + 1e-12:
                a -= scale * step_a
                b -= scale * step_b
                best = cand
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
    return float(a), float(b)


def platt_objective(a: float, b: float, decision_values: np.ndarray, labels: np.ndarray) -> float:
    """The calibration loss fit_platt minimizes, exposed for verification."""
    d = np.asarray(decision_values, dtype=np.float64)
    t01 = np.asarray(labels)
    n_pos = int(np.sum(t01 == 1))
    n_neg = int(np.sum(t01 == 0))
    t = np.where(t01 == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    z = a * d + b
    return float(np.sum(np.logaddexp(0.0, -z) * t + np.logaddexp(0.0, z) * (1.0 - t)))


def save_svm(model: SvmModel, fp) -> None:
    """Write the versioned self-describing text format."""
    try:
        fp.write(f"{MODEL_MAGIC} {MODEL_VERSION}\n")
        fp.write(f"kernel {model.kernel}\n")
        fp.write(f"gamma {model.gamma!r}\n")
        fp.write(f"c {model.c!r}\n")
        fp.write(f"bias {model.bias!r}\n")
        if model.calibrated:
            fp.write(f"platt {model.platt_a!r} {model.platt_b!r}\n")
        fp.write(f"dim {model.dim}\n")
        fp.write(f"n_support {len(model.alphas)}\n")
        for i in range(len(model.alphas)):
            label = int(model.labels[i])
            cells = [str(label), repr(float(model.alphas[i]))]
            cells.extend(repr(float(v)) for v in model.support_vectors[i])
            fp.write(" ".join(cells) + "\n")
    except OSError as exc:
        raise PersistenceError(f"writing SVM model failed: {exc}") from exc


def load_svm(fp) -> SvmModel:
    try:
        lines = [line.rstrip("\n") for line in fp]
    except OSError as exc:
        raise PersistenceError(f"reading SVM model failed: {exc}") from exc
    try:
        magic = lines[0].split()
        if magic[0] != MODEL_MAGIC:
            raise ModelFormatError(f"not an SVM model file (got {lines[0]!r})")
        if int(magic[1]) != MODEL_VERSION:
            raise ModelFormatError(f"unsupported SVM model version {magic[1]}")
        fields: dict[str, str] = {}
        idx = 1
        while idx < len(lines) and not lines[idx].startswith("n_support"):
            key, _, value = lines[idx].partition(" ")
            fields[key] = value
            idx += 1
        n_support = int(lines[idx].split()[1])
        dim = int(fields["dim"])
        sv = np.zeros((n_support, dim))
        alphas = np.zeros(n_support)
        labels = np.zeros(n_support)
        for row in range(n_support):
            parts = lines[idx + 1 + row].split()
            labels[row] = float(parts[0])
            alphas[row] = float(parts[1])
            sv[row] = [float(p) for p in parts[2 : 2 + dim]]
        platt_a = platt_b = None
        if "platt" in fields:
            pa, pb = fields["platt"].split()
            platt_a, platt_b = float(pa), float(pb)
        return SvmModel(
            support_vectors=sv,
            alphas=alphas,
            labels=labels,
            bias=float(fields["bias"]),
            kernel=fields["kernel"],
            gamma=float(fields["gamma"]),
            c=float(fields["c"]),
            platt_a=platt_a,
            platt_b=platt_b,
        )
    except ModelFormatError:
        raise
    except (IndexError, KeyError, ValueError) as exc:
        raise ModelFormatError(f"malformed SVM model file: {exc}") from exc


def save_svm_to_path(model: SvmModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        save_svm(model, fp)


def load_svm_from_path(path: str) -> SvmModel:
    with open(path, "r", encoding="utf-8") as fp:
        return load_svm(fp)


def dumps_svm(model: SvmModel) -> str:
    buf = io.StringIO()
    save_svm(model, buf)
    return buf.getvalue()
