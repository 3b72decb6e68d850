"""Support vector machines trained with sequential minimal optimization.

The binary trainer maximizes the soft-margin dual

    W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t.  0 <= a_i <= C,  sum_i a_i y_i = 0

by repeatedly solving the two-variable subproblem in closed form
(Platt's SMO).  Pair selection is fully deterministic: the first index
is any KKT violator, the second maximizes |E_i - E_j| over the
non-bound set with rotating linear scans as fallbacks.  Training stops
once a full pass finds no KKT violation larger than ``tol``.

Multiclass classification is one-vs-rest with C binary machines; the
predicted label is the argmax of the decision values and the score
matrix is the row softmax of the decision values (uncalibrated, for
ranking and soft voting only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._serde import decode_array, encode_array
from ..datasets import LabeledDataset

_EPS = 1e-12
_SV_CUTOFF = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and parameters.

    ``gamma=None`` resolves at fit time to 1 / (d * Var(X)) where Var(X)
    is the variance of all entries of the training matrix (1/d when the
    matrix is constant).
    """

    kind: str = "rbf"
    gamma: float | None = None

    def __post_init__(self) -> None:
        from . import ClassifierError
        if self.kind not in ("rbf", "linear"):
            raise ClassifierError(f"kernel must be 'rbf' or 'linear', got '{self.kind}'")
        if self.gamma is not None and not (float(self.gamma) > 0):
            raise ClassifierError(f"gamma must be positive, got {self.gamma}")


def resolve_gamma(spec: KernelSpec, x: np.ndarray) -> float:
    if spec.kind == "linear":
        return 0.0
    if spec.gamma is not None:
        return float(spec.gamma)
    var = float(x.var())
    d = x.shape[1]
    return 1.0 / (d * var) if var > 0 else 1.0 / d


def kernel_matrix(kind: str, gamma: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return a @ b.T
    d2 = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


@dataclass
class BinarySVM:
    """Fitted binary machine: support set, dual coefficients, bias."""

    kernel: str
    gamma: float
    C: float
    sv_x: np.ndarray
    sv_y: np.ndarray
    sv_alpha: np.ndarray
    support: np.ndarray
    b: float
    n_train: int
    alpha: np.ndarray  # full dual vector, kept for feasibility checks
    w: np.ndarray | None = None  # primal weights, linear kernel only

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        if self.kernel == "linear" and self.w is not None:
            return x @ self.w + self.b
        if self.sv_x.shape[0] == 0:
            return np.full(x.shape[0], self.b)
        k = kernel_matrix(self.kernel, self.gamma, x, self.sv_x)
        return k @ (self.sv_alpha * self.sv_y) + self.b


class _SMO:
    """One SMO run over a precomputed kernel matrix."""

    def __init__(self, K: np.ndarray, y: np.ndarray, C: float, tol: float,
                 max_epochs: int):
        self.K = K
        self.y = y.astype(np.float64)
        self.C = float(C)
        self.tol = float(tol)
        self.max_epochs = int(max_epochs)
        n = y.size
        self.alpha = np.zeros(n)
        self.b = 0.0
        # E_i = f(x_i) - y_i with f = sum_j a_j y_j K_ij + b
        self.err = -self.y.copy()

    def run(self) -> int:
        from . import ConvergenceError
        n = self.y.size
        examine_all = True
        num_changed = 0
        epochs = 0
        while num_changed > 0 or examine_all:
            epochs += 1
            if epochs > self.max_epochs:
                raise ConvergenceError(
                    f"SMO did not converge within {self.max_epochs} passes "
                    f"(tol={self.tol})")
            num_changed = 0
            if examine_all:
                for i in range(n):
                    num_changed += self._examine(i)
            else:
                for i in np.flatnonzero((self.alpha > _EPS) & (self.alpha < self.C - _EPS)):
                    num_changed += self._examine(int(i))
            if examine_all:
                examine_all = False
            elif num_changed == 0:
                examine_all = True
        return epochs

    def _examine(self, i2: int) -> int:
        y2 = self.y[i2]
        a2 = self.alpha[i2]
        r2 = self.err[i2] * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return 0
        nonbound = np.flatnonzero((self.alpha > _EPS) & (self.alpha < self.C - _EPS))
        if nonbound.size > 1:
            i1 = int(nonbound[np.argmax(np.abs(self.err[nonbound] - self.err[i2]))])
            if self._step(i1, i2):
                return 1
        n = self.y.size
        start = (i2 + 1) % n
        for i1 in np.roll(nonbound, -np.searchsorted(nonbound, start)):
            if self._step(int(i1), i2):
                return 1
        for off in range(n):
            if self._step((start + off) % n, i2):
                return 1
        return 0

    def _step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.err[i1], self.err[i2]
        s = y1 * y2
        if s > 0:
            low, high = max(0.0, a1 + a2 - self.C), min(self.C, a1 + a2)
        else:
            low, high = max(0.0, a2 - a1), min(self.C, self.C + a2 - a1)
        if high - low < _EPS:
            return False
        k11 = self.K[i1, i1]
        k12 = self.K[i1, i2]
        k22 = self.K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > _EPS:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(max(a2_new, low), high)
        else:
            # W is flat or convex along this direction; compare endpoints
            # via dW(t) = y2 (E1 - E2) (t - a2) - eta (t - a2)^2 / 2
            slope = y2 * (e1 - e2)
            d_low = slope * (low - a2) - 0.5 * eta * (low - a2) ** 2
            d_high = slope * (high - a2) - 0.5 * eta * (high - a2) ** 2
            if d_low > d_high + _EPS:
                a2_new = low
            elif d_high > d_low + _EPS:
                a2_new = high
            else:
                return False
        if abs(a2_new - a2) < _EPS * (a2_new + a2 + _EPS):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        da1 = a1_new - a1
        da2 = a2_new - a2
        b1 = self.b - e1 - y1 * da1 * k11 - y2 * da2 * k12
        b2 = self.b - e2 - y1 * da1 * k12 - y2 * da2 * k22
        if _EPS < a1_new < self.C - _EPS:
            b_new = b1
        elif _EPS < a2_new < self.C - _EPS:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.err += y1 * da1 * self.K[i1] + y2 * da2 * self.K[i2] + (b_new - self.b)
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        self.b = b_new
        return True


def _fit_binary(x: np.ndarray, y: np.ndarray, spec: KernelSpec, C: float,
                tol: float, max_epochs: int, K: np.ndarray | None,
                gamma: float | None) -> BinarySVM:
    from . import ClassifierError
    if C <= 0:
        raise ClassifierError(f"C must be positive, got {C}")
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise ClassifierError("binary labels must contain both -1 and +1")
    if gamma is None:
        gamma = resolve_gamma(spec, x)
    if K is None:
        K = kernel_matrix(spec.kind, gamma, x, x)
    smo = _SMO(K, y, C, tol, max_epochs)
    smo.run()
    alpha = smo.alpha
    sv = np.flatnonzero(alpha > _SV_CUTOFF)
    w = x.T @ (alpha * y) if spec.kind == "linear" else None
    return BinarySVM(kernel=spec.kind, gamma=gamma, C=float(C), sv_x=x[sv],
                     sv_y=y[sv], sv_alpha=alpha[sv], support=sv, b=smo.b,
                     n_train=y.size, alpha=alpha, w=w)


def svm_train_binary(x, y, kernel: KernelSpec | str = "rbf", C: float = 1.0,
                     tol: float = 1e-3, max_epochs: int = 10000) -> BinarySVM:
    """Train one binary machine on (x, y) with y in {-1, +1}."""
    from . import as_matrix
    spec = kernel if isinstance(kernel, KernelSpec) else KernelSpec(kind=kernel)
    return _fit_binary(as_matrix(x), np.asarray(y), spec, C, tol, max_epochs,
                       K=None, gamma=None)


class SVMClassifier:
    """One-vs-rest SVM over C classes sharing one kernel matrix."""

    def __init__(self, kernel: str = "rbf", C: float = 1.0,
                 gamma: float | None = None, tol: float = 1e-3,
                 max_epochs: int = 10000):
        self.spec = KernelSpec(kind=kernel, gamma=gamma)
        self.C = float(C)
        self.tol = float(tol)
        self.max_epochs = int(max_epochs)
        self.machines: list[BinarySVM] = []
        self._n_features = 0

    def fit(self, train: LabeledDataset) -> "SVMClassifier":
        from . import check_training_data
        check_training_data(train)
        x, y = train.matrix.values, train.labels
        gamma = resolve_gamma(self.spec, x)
        K = kernel_matrix(self.spec.kind, gamma, x, x)
        self.machines = []
        for c in range(train.n_classes):
            yc = np.where(y == c, 1.0, -1.0)
            self.machines.append(_fit_binary(x, yc, self.spec, self.C, self.tol,
                                             self.max_epochs, K=K, gamma=gamma))
        self._n_features = x.shape[1]
        return self

    def decision_values(self, m) -> np.ndarray:
        from . import as_matrix, check_n_features, ClassifierError
        if not self.machines:
            raise ClassifierError("classifier is not fitted")
        x = as_matrix(m)
        check_n_features(self._n_features, x)
        return np.column_stack([mach.decision_function(x) for mach in self.machines])

    def predict_scores(self, m) -> np.ndarray:
        dec = self.decision_values(m)
        dec = dec - dec.max(axis=1, keepdims=True)
        scores = np.exp(dec)
        scores /= scores.sum(axis=1, keepdims=True)
        return scores

    def predict(self, m) -> np.ndarray:
        return np.argmax(self.decision_values(m), axis=1)

    def to_state(self) -> dict:
        machines = []
        for mach in self.machines:
            machines.append({
                "kernel": mach.kernel,
                "gamma": mach.gamma,
                "C": mach.C,
                "sv_x": encode_array(mach.sv_x),
                "sv_y": encode_array(mach.sv_y),
                "sv_alpha": encode_array(mach.sv_alpha),
                "support": encode_array(mach.support),
                "b": mach.b,
                "n_train": mach.n_train,
                "w": None if mach.w is None else encode_array(mach.w),
            })
        return {
            "kernel": self.spec.kind,
            "gamma": self.spec.gamma,
            "C": self.C,
            "tol": self.tol,
            "max_epochs": self.max_epochs,
            "n_features": self._n_features,
            "machines": machines,
        }

    @classmethod
    def from_state(cls, state: dict) -> "SVMClassifier":
        clf = cls(kernel=state["kernel"], C=state["C"], gamma=state["gamma"],
                  tol=state["tol"], max_epochs=state["max_epochs"])
        clf._n_features = int(state["n_features"])
        clf.machines = []
        for m in state["machines"]:
            sv_alpha = decode_array(m["sv_alpha"])
            support = decode_array(m["support"])
            alpha = np.zeros(int(m["n_train"]))
            alpha[support] = sv_alpha
            clf.machines.append(BinarySVM(
                kernel=m["kernel"], gamma=float(m["gamma"]), C=float(m["C"]),
                sv_x=decode_array(m["sv_x"]), sv_y=decode_array(m["sv_y"]),
                sv_alpha=sv_alpha, support=support, b=float(m["b"]),
                n_train=int(m["n_train"]), alpha=alpha,
                w=None if m["w"] is None else decode_array(m["w"])))
        return clf


def svm_classify(train: LabeledDataset, test, kernel: str = "rbf", C: float = 1.0,
                 gamma: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    clf = SVMClassifier(kernel=kernel, C=C, gamma=gamma).fit(train)
    return clf.predict(test), clf.predict_scores(test)
