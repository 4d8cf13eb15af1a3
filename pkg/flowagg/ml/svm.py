"""
Two-feature linear SVM over (f, delta_f) samples.

Training solves the soft-margin dual with SMO, picking the maximal
violating pair on every iteration. Features are scaled before training and
the scales are stored with the model so classification applies the same
transform.
"""
import json
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..models.schemas import ObservationSample, SvmModel
from ..utils.errors import DegenerateData, ModelFormatError, NoConvergence
from ..utils.rng import stream

logger = logging.getLogger(__name__)

DEFAULT_C = 100.0
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 100_000
SAMPLE_COLUMNS = ["f", "delta_f", "sign"]


def feature_scales(samples: Sequence[ObservationSample], f_cap: Optional[int] = None) -> Tuple[float, float]:
    """
    Divide both features by f_cap when it is known, else by one common
    data scale so that rescaling every feature leaves the fit unchanged.
    """
    if f_cap is not None:
        return float(f_cap), float(f_cap)
    peak = max(max(abs(s.f), abs(s.delta_f)) for s in samples)
    scale = float(peak) if peak > 0 else 1.0
    return scale, scale


def _smo(X: np.ndarray, y: np.ndarray, c_param: float, tol: float, max_iter: int):
    n = len(y)
    alpha = np.zeros(n)
    g = np.ones(n)
    lower = np.minimum(0.0, c_param * y)
    upper = np.maximum(0.0, c_param * y)
    diag = np.einsum("ij,ij->i", X, X)
    eps = 1e-12

    converged = False
    gap = np.inf
    for iteration in range(max_iter):
        ya = y * alpha
        yg = y * g
        i = int(np.argmax(np.where(ya < upper - eps, yg, -np.inf)))
        j = int(np.argmin(np.where(ya > lower + eps, yg, np.inf)))
        gap = yg[i] - yg[j]
        if not np.isfinite(gap) or gap < tol:
            converged = True
            break

        k_i = X @ X[i]
        k_j = X @ X[j]
        curvature = max(diag[i] + diag[j] - 2.0 * k_i[j], eps)
        step = min(upper[i] - ya[i], ya[j] - lower[j], gap / curvature)
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        g -= step * y * (k_i - k_j)
    else:
        iteration = max_iter

    ya = y * alpha
    yg = y * g
    free = (ya > lower + eps) & (ya < upper - eps)
    if free.any():
        b = float(np.mean(yg[free]))
    else:
        up = np.where(ya < upper - eps, yg, -np.inf).max()
        down = np.where(ya > lower + eps, yg, np.inf).min()
        finite = [v for v in (up, down) if np.isfinite(v)]
        b = float(np.mean(finite)) if finite else 0.0
    w = (alpha * y) @ X
    return w, b, converged, iteration, gap


def train(
    samples: Sequence[ObservationSample],
    c_param: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    f_cap: Optional[int] = None,
    strict: bool = False,
) -> SvmModel:
    """
    Fit a linear soft-margin SVM.

    Parameters
    ----------
    samples : labelled observations; both signs must be present
    c_param : soft-margin penalty C
    tol : stopping threshold on the maximal KKT violation
    max_iter : maximum SMO iterations
    f_cap : feature scale; the common data scale is used when omitted
    strict : raise NoConvergence instead of returning a flagged model

    Returns
    -------
    SvmModel with weights in the scaled feature space
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    labelled = [s for s in samples if s.sign is not None]
    signs = {s.sign for s in labelled}
    if len(signs) < 2:
        raise DegenerateData(f"training set needs both labels, got {sorted(signs)}")

    scale1, scale2 = feature_scales(labelled, f_cap)
    X = np.array([[s.f / scale1, s.delta_f / scale2] for s in labelled], dtype=float)
    y = np.array([s.sign for s in labelled], dtype=float)

    w, b, converged, iterations, gap = _smo(X, y, c_param, tol, max_iter)
    if np.allclose(w, 0.0):
        raise DegenerateData("solver returned a zero weight vector")

    model = SvmModel(
        w1=float(w[0]), w2=float(w[1]), b=b,
        scale1=scale1, scale2=scale2, f_cap=f_cap, converged=converged,
    )
    if converged:
        logger.info("svm trained on %d samples in %d iterations, margin %.4f", len(y), iterations, margin(model))
    else:
        message = f"SMO stopped after {max_iter} iterations with KKT gap {gap:.3g} > tol {tol}"
        if strict:
            raise NoConvergence(message, model)
        logger.warning(message)
    return model


def decision_value(model: SvmModel, f: float, delta_f: float) -> float:
    return model.w1 * f / model.scale1 + model.w2 * delta_f / model.scale2 + model.b


def classify(model: SvmModel, x: ObservationSample) -> int:
    """+1 for a good switch state, -1 for predicted degradation; the boundary maps to -1."""
    return 1 if decision_value(model, x.f, x.delta_f) > 0 else -1


def margin(model: SvmModel) -> float:
    return 2.0 / float(np.hypot(model.w1, model.w2))


def accuracy(model: SvmModel, samples: Sequence[ObservationSample]) -> float:
    labelled = [s for s in samples if s.sign is not None]
    if not labelled:
        return 0.0
    hits = sum(1 for s in labelled if classify(model, s) == s.sign)
    return hits / len(labelled)


def rule_labelled_samples(n: int, f_cap: int, seed: int = 0, band: float = 0.0) -> List[ObservationSample]:
    """
    Synthetic samples labelled -1 iff f + max(delta_f, 0) >= f_cap.

    Samples closer than `band` (as a fraction of f_cap) to the boundary are
    redrawn.
    """
    rng = stream(seed, "svm-samples")
    out: List[ObservationSample] = []
    while len(out) < n:
        f = int(rng.integers(0, f_cap + 1))
        delta_f = int(rng.integers(-f_cap // 5, f_cap // 2 + 1))
        delta_f = max(delta_f, -f)
        load = f + max(delta_f, 0)
        if abs(load - f_cap) < band * f_cap:
            continue
        out.append(ObservationSample(f=f, delta_f=delta_f, sign=-1 if load >= f_cap else 1))
    return out


# Persistence
def save_model(model: SvmModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.model_dump(mode="json"), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> SvmModel:
    try:
        with open(path, encoding="utf-8") as fh:
            return SvmModel.model_validate_json(fh.read())
    except ValidationError as exc:
        raise ModelFormatError(path, str(exc)) from exc


def samples_to_frame(samples: Sequence[ObservationSample]) -> pd.DataFrame:
    return pd.DataFrame(
        [(s.f, s.delta_f, s.sign) for s in samples], columns=SAMPLE_COLUMNS
    ).astype({"f": int, "delta_f": int})


def write_samples(samples: Sequence[ObservationSample], path: str) -> None:
    samples_to_frame(samples).to_csv(path, index=False, lineterminator="\n")


def read_samples(path: str) -> List[ObservationSample]:
    frame = pd.read_csv(path)
    missing = [c for c in SAMPLE_COLUMNS if c not in frame.columns]
    if missing:
        raise ModelFormatError(path, f"missing columns {missing}")
    return [
        ObservationSample(f=int(row.f), delta_f=int(row.delta_f), sign=int(row.sign))
        for row in frame.itertuples(index=False)
    ]
