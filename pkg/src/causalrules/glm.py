"""Logistic and multinomial-logistic regression by Newton-Raphson.

Two nuisance models drive everything downstream:

* the treatment mechanism ``g(a | W)``, a multinomial logit of the
  treatment level on main effects of the covariates, and
* the outcome regression ``Q(a, W) = P(Y = 1 | A = a, W)``, a logistic
  regression on covariate main effects, treatment-level indicators, and
  optional covariate-by-level interactions.

Fits converge on the sup-norm of the score (default ``1e-8``) with
step-halving, raise on perfect separation or singular designs instead
of silently returning garbage, and support two features plain library
GLMs do not: offset-only one-parameter fluctuation fits (the targeting
step) and structural zeros.  A structural zero is a (level, binary
feature) cell with no observations; the MLE for that coefficient
diverges to minus infinity, so the fit pins the cell to probability
zero exactly, restricts each row's choice set accordingly, and flags
the pin on the fitted model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import (
    ConvergenceError,
    SeparationError,
    SingularInformationError,
    ValidationError,
)
from .ingest import Dataset

DEFAULT_GTOL = 1e-8
DEFAULT_MAX_ITER = 100
# Beyond this, a binary-design coefficient is treated as diverging.
_SEPARATION_BOUND = 40.0
INTERCEPT_NAME = "(intercept)"


@dataclass(frozen=True)
class FitInfo:
    """Convergence record for a Newton fit."""

    converged: bool
    iterations: int
    grad_norm: float
    loglik: float


# ---------------------------------------------------------------------------
# Binary logistic regression


def _bernoulli_loglik(eta: np.ndarray, y: np.ndarray) -> float:
    # log P(y | eta) = y*eta - log(1 + exp(eta)), stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def _newton_logistic(
    X: np.ndarray,
    y: np.ndarray,
    offset: np.ndarray | None,
    feature_names: tuple[str, ...],
    gtol: float,
    max_iter: int,
    accept_tol: float,
) -> tuple[np.ndarray, FitInfo]:
    n, q = X.shape
    off = np.zeros(n) if offset is None else offset
    beta = np.zeros(q)
    eta = off + X @ beta
    ll = _bernoulli_loglik(eta, y)
    trace: list[float] = []
    for it in range(max_iter):
        p = expit(eta)
        grad = X.T @ (y - p)
        gnorm = float(np.max(np.abs(grad))) if q else 0.0
        trace.append(gnorm)
        if gnorm <= gtol:
            return beta, FitInfo(True, it, gnorm, ll)
        wdiag = p * (1.0 - p)
        info = (X * wdiag[:, None]).T @ X
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise SingularInformationError(
                "singular information matrix; design columns are collinear or degenerate"
            ) from None
        # Step-halving: accept the first step that improves the loglik.
        scale = 1.0
        improved = False
        for _ in range(40):
            cand = beta + scale * step
            eta_cand = off + X @ cand
            ll_cand = _bernoulli_loglik(eta_cand, y)
            if ll_cand > ll:
                beta, eta, ll = cand, eta_cand, ll_cand
                improved = True
                break
            scale *= 0.5
        if not improved:
            # The loglik is at machine resolution but the score may not
            # be: near the optimum a whole Newton step can shrink the
            # gradient by orders of magnitude while moving the loglik by
            # less than one ulp.  Fall back to accepting steps on score
            # decrease so the estimating equation is still driven to
            # (effectively) zero.
            scale = 1.0
            for _ in range(40):
                cand = beta + scale * step
                eta_cand = off + X @ cand
                g_cand = float(np.max(np.abs(X.T @ (y - expit(eta_cand)))))
                if g_cand < gnorm:
                    beta, eta = cand, eta_cand
                    ll = _bernoulli_loglik(eta_cand, y)
                    improved = True
                    break
                scale *= 0.5
        if not improved:
            # Stalled at numerical precision.
            if gnorm <= accept_tol:
                return beta, FitInfo(True, it + 1, gnorm, ll)
            raise ConvergenceError(
                f"logistic fit stalled with score sup-norm {gnorm:.3e} > {accept_tol:.1e}",
                trace,
            )
        big = np.abs(beta) > _SEPARATION_BOUND
        if big.any():
            j = int(np.argmax(np.abs(beta)))
            raise SeparationError(
                f"perfect separation: coefficient for {feature_names[j]!r} diverges",
                feature=feature_names[j],
            )
    p = expit(eta)
    gnorm = float(np.max(np.abs(X.T @ (y - p)))) if q else 0.0
    if gnorm <= accept_tol:
        return beta, FitInfo(True, max_iter, gnorm, ll)
    raise ConvergenceError(
        f"logistic fit did not converge in {max_iter} iterations "
        f"(score sup-norm {gnorm:.3e})",
        trace,
    )


@dataclass(frozen=True)
class LogisticFit:
    """Coefficients of a plain binary logistic regression."""

    coef: np.ndarray
    feature_names: tuple[str, ...]
    info: FitInfo

    def linear_predictor(self, X: np.ndarray, offset: np.ndarray | None = None) -> np.ndarray:
        eta = np.asarray(X, dtype=float) @ self.coef
        if offset is not None:
            eta = eta + offset
        return eta

    def predict(self, X: np.ndarray, offset: np.ndarray | None = None) -> np.ndarray:
        return expit(self.linear_predictor(X, offset))


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    offset: np.ndarray | None = None,
    feature_names: tuple[str, ...] | None = None,
    gtol: float = DEFAULT_GTOL,
    max_iter: int = DEFAULT_MAX_ITER,
    accept_tol: float | None = None,
) -> LogisticFit:
    """Maximum-likelihood binary logistic regression.

    ``X`` is the full design matrix (include your own intercept column);
    ``offset`` is an optional fixed term added to the linear predictor.
    Raises :class:`SeparationError` when the MLE diverges,
    :class:`SingularInformationError` for collinear designs, and
    :class:`ConvergenceError` when the iteration budget is exhausted.

    Convergence requires score sup-norm <= ``gtol``.  When step-halving
    stalls on the log-likelihood's machine-precision plateau, the fit is
    still accepted if the score is below ``accept_tol``, which defaults
    to a mean score of 1e-8 per observation: the summed score scales
    with n while the achievable plateau does too, so an absolute bound
    would spuriously fail large fits that are converged for every
    statistical purpose.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError("design matrix must be two-dimensional")
    y = np.asarray(y, dtype=float)
    n, q = X.shape
    if y.shape != (n,):
        raise ValidationError("outcome length does not match design rows")
    if offset is not None:
        offset = np.asarray(offset, dtype=float)
        if offset.shape != (n,):
            raise ValidationError("offset length does not match design rows")
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(q))
    else:
        feature_names = tuple(feature_names)
        if len(feature_names) != q:
            raise ValidationError("feature_names length does not match design columns")
    if accept_tol is None:
        accept_tol = max(gtol, 1e-8 * n)
    coef, fit_info = _newton_logistic(
        X, y, offset, feature_names, gtol, max_iter, accept_tol
    )
    return LogisticFit(coef=coef, feature_names=feature_names, info=fit_info)


@dataclass(frozen=True)
class FluctuationFit:
    """One-parameter logistic fluctuation fitted with a fixed offset.

    The model is ``logit P(Y=1) = offset + epsilon * h``; ``epsilon`` is
    the MLE.  ``h`` identically zero yields ``epsilon = 0`` exactly.
    """

    epsilon: float
    covariate: np.ndarray
    offset: np.ndarray
    info: FitInfo


def fit_fluctuation(
    y: np.ndarray,
    h: np.ndarray,
    offset: np.ndarray,
    gtol: float = 1e-10,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FluctuationFit:
    """Fit the targeting fluctuation: logistic in ``h`` with no intercept.

    Converges on score sup-norm ``gtol`` (tight by default so that
    downstream substitution estimators solve their estimating equation
    to near machine precision); a step-halving stall is accepted only if
    the mean score per observation is already below 1e-8, which keeps
    the solved estimating equation within that bound.
    """
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    offset = np.asarray(offset, dtype=float)
    if not (y.shape == h.shape == offset.shape):
        raise ValidationError("y, h, and offset must have matching shapes")
    if np.all(h == 0.0):
        eta = offset
        ll = _bernoulli_loglik(eta, y)
        return FluctuationFit(0.0, h, offset, FitInfo(True, 0, 0.0, ll))
    coef, fit_info = _newton_logistic(
        h[:, None], y, offset, ("h",), gtol, max_iter,
        accept_tol=max(gtol, 1e-8 * y.size),
    )
    return FluctuationFit(float(coef[0]), h, offset, fit_info)


# ---------------------------------------------------------------------------
# Outcome regression Q(a, W)


@dataclass(frozen=True)
class OutcomeDesign:
    """Feature map for the outcome regression.

    Columns: intercept, covariate main effects, indicator columns for
    treatment levels ``1..K-1`` (level 0 is the reference), and optional
    ``(covariate, level)`` interaction columns.
    """

    covariate_names: tuple[str, ...]
    n_treatment_levels: int = 6
    interactions: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        inters = tuple((str(c), int(l)) for c, l in self.interactions)
        for cov, level in inters:
            if cov not in self.covariate_names:
                raise ValidationError(f"interaction covariate {cov!r} not in design")
            if not 1 <= level < self.n_treatment_levels:
                raise ValidationError(
                    f"interaction level {level} outside 1..{self.n_treatment_levels - 1}"
                )
        object.__setattr__(self, "interactions", inters)

    @property
    def column_names(self) -> tuple[str, ...]:
        names = [INTERCEPT_NAME]
        names += list(self.covariate_names)
        names += [f"A={l}" for l in range(1, self.n_treatment_levels)]
        names += [f"{c}:A={l}" for c, l in self.interactions]
        return tuple(names)

    def matrix(self, a, w: np.ndarray) -> np.ndarray:
        """Design rows for treatment ``a`` (scalar or length-n vector) and covariates ``w``."""
        w = np.asarray(w, dtype=float)
        if w.ndim == 1:
            w = w[None, :]
        n = w.shape[0]
        if w.shape[1] != len(self.covariate_names):
            raise ValidationError("covariate matrix width does not match design")
        a_vec = np.broadcast_to(np.asarray(a, dtype=np.int64), (n,))
        cols = [np.ones(n), *(w[:, j] for j in range(w.shape[1]))]
        cols += [(a_vec == l).astype(float) for l in range(1, self.n_treatment_levels)]
        name_index = {c: j for j, c in enumerate(self.covariate_names)}
        cols += [w[:, name_index[c]] * (a_vec == l) for c, l in self.interactions]
        return np.column_stack(cols)


@dataclass(frozen=True)
class OutcomeModel:
    """Fitted outcome regression ``Q(a, W)``."""

    design: OutcomeDesign
    coef: np.ndarray
    info: FitInfo

    def linear_predictor(self, a, w: np.ndarray) -> np.ndarray:
        """``m(a, W) = logit Q(a, W)`` for scalar or per-row ``a``."""
        return self.design.matrix(a, w) @ self.coef

    def predict(self, a, w: np.ndarray) -> np.ndarray:
        return expit(self.linear_predictor(a, w))

    def to_dict(self) -> dict:
        return {
            "kind": "outcome",
            "covariate_names": list(self.design.covariate_names),
            "n_treatment_levels": self.design.n_treatment_levels,
            "interactions": [list(t) for t in self.design.interactions],
            "coef": [float(c) for c in self.coef],
            "converged": self.info.converged,
            "iterations": self.info.iterations,
            "grad_norm": self.info.grad_norm,
            "loglik": self.info.loglik,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OutcomeModel":
        design = OutcomeDesign(
            covariate_names=tuple(d["covariate_names"]),
            n_treatment_levels=int(d["n_treatment_levels"]),
            interactions=tuple((c, int(l)) for c, l in d.get("interactions", [])),
        )
        return cls(
            design=design,
            coef=np.asarray(d["coef"], dtype=float),
            info=FitInfo(
                bool(d.get("converged", True)),
                int(d.get("iterations", 0)),
                float(d.get("grad_norm", 0.0)),
                float(d.get("loglik", 0.0)),
            ),
        )


def predict_Q(model: OutcomeModel, a, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outcome probability and its logit for treatment ``a`` and covariates ``w``."""
    m = model.linear_predictor(a, w)
    return expit(m), m


def select_covariates(dataset: Dataset, names: tuple[str, ...]) -> np.ndarray:
    """Columns of ``dataset.w`` matching ``names``, in model order.

    Models may be fit on a subset of the dataset's covariates; this maps
    a full dataset onto the columns a given model expects.
    """
    names = tuple(names)
    if names == dataset.covariate_names:
        return dataset.w
    missing = [c for c in names if c not in dataset.covariate_names]
    if missing:
        raise ValidationError(f"model covariates not in dataset: {missing}")
    if not names:
        return np.zeros((dataset.n, 0), dtype=np.int8)
    idx = [dataset.covariate_names.index(c) for c in names]
    return dataset.w[:, idx]


def fit_outcome_model(
    dataset: Dataset,
    design: OutcomeDesign | None = None,
    gtol: float = DEFAULT_GTOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> OutcomeModel:
    """Fit ``Q(a, W)`` on a dataset; default design is main effects plus level indicators."""
    if design is None:
        design = OutcomeDesign(
            covariate_names=dataset.covariate_names,
            n_treatment_levels=dataset.n_treatment_levels,
        )
    elif design.n_treatment_levels != dataset.n_treatment_levels:
        raise ValidationError("design and dataset disagree on the number of treatment levels")
    X = design.matrix(dataset.a, select_covariates(dataset, design.covariate_names))
    fit = fit_logistic(
        X, dataset.y, feature_names=design.column_names, gtol=gtol, max_iter=max_iter
    )
    return OutcomeModel(design=design, coef=fit.coef, info=fit.info)


# ---------------------------------------------------------------------------
# Treatment mechanism g(a | W): multinomial logit with structural zeros


def _detect_structural_zeros(
    X: np.ndarray, y: np.ndarray, k_levels: int
) -> list[tuple[int, int]]:
    """Empty (level, binary column) margin cells; the MLE pins these to -inf.

    Column 0 is the intercept, so a level observed nowhere pins on
    column 0 and needs no further pins.
    """
    n, q = X.shape
    pins: list[tuple[int, int]] = []
    level_absent = [not np.any(y == l) for l in range(k_levels)]
    for l in range(k_levels):
        if level_absent[l]:
            pins.append((l, 0))
    for c in range(1, q):
        col = X[:, c]
        if not np.isin(col, (0.0, 1.0)).all():
            continue  # only binary features define margin cells
        active = col == 1.0
        if not active.any():
            continue
        y_active = y[active]
        for l in range(k_levels):
            if level_absent[l]:
                continue
            if not np.any(y_active == l):
                pins.append((l, c))
    return pins


def _support_matrix(X: np.ndarray, pins: list[tuple[int, int]], k_levels: int) -> np.ndarray:
    n = X.shape[0]
    support = np.ones((n, k_levels), dtype=bool)
    for l, c in pins:
        support[X[:, c] == 1.0, l] = False
    return support


def _multinomial_probs(
    X: np.ndarray, B: np.ndarray, support: np.ndarray
) -> np.ndarray:
    """Row-wise probabilities of a multinomial logit restricted to ``support``."""
    n, _ = X.shape
    k = support.shape[1]
    eta = np.zeros((n, k))
    eta[:, 1:] = X @ B.T
    eta = np.where(support, eta, -np.inf)
    m = eta.max(axis=1, keepdims=True)
    ex = np.exp(eta - m)
    ex[~support] = 0.0
    total = ex.sum(axis=1, keepdims=True)
    if np.any(total == 0.0):
        raise ValidationError("a covariate row has no supported treatment level")
    return ex / total


def _multinomial_loglik(probs: np.ndarray, y: np.ndarray) -> float:
    p_obs = probs[np.arange(len(y)), y]
    return float(np.sum(np.log(p_obs)))


def _newton_multinomial(
    X: np.ndarray,
    y: np.ndarray,
    k_levels: int,
    pins: list[tuple[int, int]],
    feature_names: tuple[str, ...],
    gtol: float,
    max_iter: int,
) -> tuple[np.ndarray, FitInfo]:
    n, q = X.shape
    # Same plateau allowance as the logistic fits: a stall is accepted
    # once the mean score per observation is below 1e-8.
    accept_tol = max(gtol, 1e-8 * n)
    support = _support_matrix(X, pins, k_levels)
    if not support[np.arange(n), y].all():
        raise ValidationError("observed treatment level conflicts with a structural zero")
    free = np.ones((k_levels - 1, q), dtype=bool)
    for l, c in pins:
        if l >= 1:
            if c == 0:
                # Level never observed: the whole coefficient row is
                # unidentified (its probabilities are zero everywhere).
                free[l - 1, :] = False
            else:
                free[l - 1, c] = False
    free_flat = free.ravel()
    n_free = int(free_flat.sum())
    ind = np.zeros((n, k_levels))
    ind[np.arange(n), y] = 1.0

    B = np.zeros((k_levels - 1, q))
    probs = _multinomial_probs(X, B, support)
    ll = _multinomial_loglik(probs, y)
    trace: list[float] = []
    for it in range(max_iter):
        resid = ind[:, 1:] - probs[:, 1:]  # (n, k-1)
        grad = (X.T @ resid).T  # (k-1, q)
        grad_free = grad.ravel()[free_flat]
        gnorm = float(np.max(np.abs(grad_free))) if n_free else 0.0
        trace.append(gnorm)
        if gnorm <= gtol:
            return B, FitInfo(True, it, gnorm, ll)
        # Fisher information over the free parameters, in (k-1, q) blocks.
        dim = (k_levels - 1) * q
        info = np.empty((dim, dim))
        for l in range(1, k_levels):
            for m in range(l, k_levels):
                wlm = probs[:, l] * ((l == m) - probs[:, m])
                block = (X * wlm[:, None]).T @ X
                info[(l - 1) * q : l * q, (m - 1) * q : m * q] = block
                if m != l:
                    info[(m - 1) * q : m * q, (l - 1) * q : l * q] = block
        info_free = info[np.ix_(free_flat, free_flat)]
        try:
            step_free = np.linalg.solve(info_free, grad_free)
        except np.linalg.LinAlgError:
            raise SingularInformationError(
                "singular information matrix in multinomial fit; "
                "design columns are collinear or degenerate"
            ) from None
        step = np.zeros(dim)
        step[free_flat] = step_free
        step = step.reshape(k_levels - 1, q)
        scale = 1.0
        improved = False
        for _ in range(40):
            cand = B + scale * step
            probs_cand = _multinomial_probs(X, cand, support)
            ll_cand = _multinomial_loglik(probs_cand, y)
            if ll_cand > ll:
                B, probs, ll = cand, probs_cand, ll_cand
                improved = True
                break
            scale *= 0.5
        if not improved:
            # Same machine-plateau fallback as the logistic fit: accept
            # a step that shrinks the score even if the loglik gain is
            # below one ulp.
            scale = 1.0
            for _ in range(40):
                cand = B + scale * step
                probs_cand = _multinomial_probs(X, cand, support)
                g_cand = (X.T @ (ind[:, 1:] - probs_cand[:, 1:])).T.ravel()[free_flat]
                if (float(np.max(np.abs(g_cand))) if n_free else 0.0) < gnorm:
                    B, probs = cand, probs_cand
                    ll = _multinomial_loglik(probs_cand, y)
                    improved = True
                    break
                scale *= 0.5
        if not improved:
            if gnorm <= accept_tol:
                return B, FitInfo(True, it + 1, gnorm, ll)
            raise ConvergenceError(
                f"multinomial fit stalled with score sup-norm {gnorm:.3e}", trace
            )
        mags = np.abs(B)
        mags[~free] = 0.0
        if mags.max() > _SEPARATION_BOUND:
            l_bad, c_bad = np.unravel_index(int(np.argmax(mags)), mags.shape)
            raise SeparationError(
                f"perfect separation: coefficient for level {l_bad + 1}, "
                f"feature {feature_names[c_bad]!r} diverges",
                feature=feature_names[c_bad],
                level=int(l_bad + 1),
            )
    resid = ind[:, 1:] - probs[:, 1:]
    grad_free = (X.T @ resid).T.ravel()[free_flat]
    gnorm = float(np.max(np.abs(grad_free))) if n_free else 0.0
    if gnorm <= accept_tol:
        return B, FitInfo(True, max_iter, gnorm, ll)
    raise ConvergenceError(
        f"multinomial fit did not converge in {max_iter} iterations "
        f"(score sup-norm {gnorm:.3e})",
        trace,
    )


@dataclass(frozen=True)
class TreatmentModel:
    """Fitted treatment mechanism ``g(a | W)``.

    ``coef`` has one row per non-reference level (1..K-1) over columns
    ``(intercept, covariates...)``.  ``structural_zeros`` lists the
    (level, feature name) cells pinned to probability zero; pinned
    entries of ``coef`` are stored as ``-inf``.  ``predict`` floors the
    raw probabilities at ``alpha_trunc`` without renormalizing;
    ``predict_raw`` returns the untruncated probabilities, which sum to
    one in every row (structurally zero cells are exactly zero).
    """

    covariate_names: tuple[str, ...]
    n_treatment_levels: int
    coef: np.ndarray
    structural_zeros: tuple[tuple[int, str], ...]
    alpha_trunc: float
    info: FitInfo

    @property
    def feature_names(self) -> tuple[str, ...]:
        return (INTERCEPT_NAME,) + tuple(self.covariate_names)

    def _pin_columns(self) -> list[tuple[int, int]]:
        names = self.feature_names
        return [(l, names.index(f)) for l, f in self.structural_zeros]

    def _design(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.ndim == 1:
            w = w[None, :]
        if w.shape[1] != len(self.covariate_names):
            raise ValidationError("covariate matrix width does not match treatment model")
        return np.column_stack([np.ones(w.shape[0]), w])

    def predict_raw(self, w: np.ndarray) -> np.ndarray:
        """Untruncated ``(n, K)`` probabilities; rows sum to one."""
        X = self._design(w)
        B = np.where(np.isfinite(self.coef), self.coef, 0.0)
        support = _support_matrix(X, self._pin_columns(), self.n_treatment_levels)
        return _multinomial_probs(X, B, support)

    def predict(self, w: np.ndarray) -> np.ndarray:
        """Probabilities floored at ``alpha_trunc`` (no renormalization)."""
        return np.maximum(self.predict_raw(w), self.alpha_trunc)

    def to_dict(self) -> dict:
        coef = [[None if not math.isfinite(v) else float(v) for v in row] for row in self.coef]
        return {
            "kind": "treatment",
            "covariate_names": list(self.covariate_names),
            "n_treatment_levels": self.n_treatment_levels,
            "coef": coef,
            "structural_zeros": [[int(l), f] for l, f in self.structural_zeros],
            "alpha_trunc": self.alpha_trunc,
            "converged": self.info.converged,
            "iterations": self.info.iterations,
            "grad_norm": self.info.grad_norm,
            "loglik": self.info.loglik,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreatmentModel":
        coef = np.array(
            [[-np.inf if v is None else float(v) for v in row] for row in d["coef"]],
            dtype=float,
        )
        return cls(
            covariate_names=tuple(d["covariate_names"]),
            n_treatment_levels=int(d["n_treatment_levels"]),
            coef=coef,
            structural_zeros=tuple((int(l), f) for l, f in d.get("structural_zeros", [])),
            alpha_trunc=float(d["alpha_trunc"]),
            info=FitInfo(
                bool(d.get("converged", True)),
                int(d.get("iterations", 0)),
                float(d.get("grad_norm", 0.0)),
                float(d.get("loglik", 0.0)),
            ),
        )


def predict_g(model: TreatmentModel, w: np.ndarray, truncated: bool = True) -> np.ndarray:
    """Treatment probabilities for covariate rows ``w`` (truncated by default)."""
    return model.predict(w) if truncated else model.predict_raw(w)


def fit_multinomial(
    w: np.ndarray,
    a: np.ndarray,
    k_levels: int,
    covariate_names: tuple[str, ...] | None = None,
    alpha_trunc: float = 0.05,
    gtol: float = DEFAULT_GTOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> TreatmentModel:
    """Fit a main-effects multinomial logit of treatment level on covariates.

    Empty (level, feature) margin cells — including treatment levels that
    never occur at all — are structural zeros: their probabilities are
    estimated as exactly zero and flagged on the returned model rather
    than sent diverging.  Genuine separation elsewhere raises
    :class:`SeparationError` naming the level and feature.
    """
    w = np.asarray(w)
    a = np.asarray(a, dtype=np.int64)
    if w.ndim != 2:
        raise ValidationError("covariate matrix must be two-dimensional")
    n, p = w.shape
    if a.shape != (n,):
        raise ValidationError("treatment length does not match covariate rows")
    if k_levels < 2:
        raise ValidationError("k_levels must be at least 2")
    if a.min() < 0 or a.max() >= k_levels:
        raise ValidationError(f"treatment levels must lie in 0..{k_levels - 1}")
    if not 0.0 <= alpha_trunc < 1.0:
        raise ValidationError("alpha_trunc must lie in [0, 1)")
    if covariate_names is None:
        covariate_names = tuple(f"w{j}" for j in range(p))
    else:
        covariate_names = tuple(covariate_names)
        if len(covariate_names) != p:
            raise ValidationError("covariate_names length does not match covariate columns")

    X = np.column_stack([np.ones(n), np.asarray(w, dtype=float)])
    names = (INTERCEPT_NAME,) + covariate_names
    pins = _detect_structural_zeros(X, a, k_levels)
    # Drop pins made redundant by an absent level (pinned on the intercept).
    absent = {l for l, c in pins if c == 0}
    pins = [(l, c) for l, c in pins if c == 0 or l not in absent]
    B, fit_info = _newton_multinomial(X, a, k_levels, pins, names, gtol, max_iter)
    coef = B.copy()
    for l, c in pins:
        if l >= 1:
            coef[l - 1, c] = -np.inf
    return TreatmentModel(
        covariate_names=covariate_names,
        n_treatment_levels=k_levels,
        coef=coef,
        structural_zeros=tuple((l, names[c]) for l, c in pins),
        alpha_trunc=alpha_trunc,
        info=fit_info,
    )


def fit_treatment_model(
    dataset: Dataset,
    alpha_trunc: float = 0.05,
    covariate_names: tuple[str, ...] | None = None,
    gtol: float = DEFAULT_GTOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> TreatmentModel:
    """Fit ``g(a | W)`` on a dataset, optionally on a covariate subset.

    ``covariate_names=()`` fits an intercept-only model (empirical level
    frequencies).
    """
    if covariate_names is None:
        covariate_names = dataset.covariate_names
    else:
        covariate_names = tuple(covariate_names)
    w = select_covariates(dataset, covariate_names)
    model = fit_multinomial(
        w,
        dataset.a,
        dataset.n_treatment_levels,
        covariate_names=covariate_names,
        alpha_trunc=alpha_trunc,
        gtol=gtol,
        max_iter=max_iter,
    )
    return model


# ---------------------------------------------------------------------------
# Model bundle serialization (used by the CLI's fit/simulate round trip)


def save_models(path, treatment: TreatmentModel, outcome: OutcomeModel, meta: dict | None = None) -> None:
    bundle = {
        "treatment": treatment.to_dict(),
        "outcome": outcome.to_dict(),
        "meta": dict(meta or {}),
    }
    with open(path, "w") as fh:
        json.dump(bundle, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_models(path) -> tuple[TreatmentModel, OutcomeModel, dict]:
    with open(path) as fh:
        bundle = json.load(fh)
    try:
        treatment = TreatmentModel.from_dict(bundle["treatment"])
        outcome = OutcomeModel.from_dict(bundle["outcome"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed model bundle ({exc})") from None
    return treatment, outcome, bundle.get("meta", {})
