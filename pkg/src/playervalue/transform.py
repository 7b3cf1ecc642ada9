"""Box-Cox power transform of a positive target.

``lmbda`` is fitted by maximising the profile log-likelihood with a
bounded scalar search; ``forward`` and ``inverse`` are exact inverses of
each other on the valid domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .errors import DegenerateInput, NonPositiveInput, OutOfDomain

LOG_BRANCH_EPS = 1e-9


@dataclass(frozen=True)
class BoxCoxParams:
    lmbda: float
    shift: float = 0.0
    log_likelihood: float = math.nan

    def to_dict(self) -> dict:
        return {
            "lambda": self.lmbda,
            "shift": self.shift,
            "log_likelihood": self.log_likelihood,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoxCoxParams":
        return cls(float(d["lambda"]), float(d.get("shift", 0.0)), float(d.get("log_likelihood", math.nan)))


def _shifted(values, shift: float) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64) + shift
    if np.isnan(x).any():
        raise NonPositiveInput("Box-Cox input contains NaN")
    if (x <= 0).any():
        bad = np.flatnonzero(x <= 0)
        raise NonPositiveInput(
            f"{len(bad)} value(s) are not strictly positive after shift={shift} "
            f"(first at index {bad[0]})"
        )
    return x


def _transform_logs(logx: np.ndarray, lmbda: float) -> np.ndarray:
    if abs(lmbda) < LOG_BRANCH_EPS:
        return logx.copy()
    return np.expm1(lmbda * logx) / lmbda


def _profile_ll(x: np.ndarray, lmbda: float) -> float:
    ll = float(stats.boxcox_llf(lmbda, x))
    return ll if math.isfinite(ll) else -math.inf


def profile_log_likelihood(values, lmbda: float, shift: float = 0.0) -> float:
    """Box-Cox profile log-likelihood (additive constants dropped)."""
    return _profile_ll(_shifted(values, shift), lmbda)


def fit_lambda(
    values,
    search_interval: tuple[float, float] = (-5.0, 5.0),
    tol: float = 1e-6,
    shift: float = 0.0,
    auto_shift: bool = False,
) -> BoxCoxParams:
    """Maximum-likelihood Box-Cox lambda.

    Parameters
    ----------
    values : array_like
        Positive observations (after ``shift``).
    search_interval : (float, float)
        Bounds of the search for lambda.
    tol : float
        Absolute tolerance on lambda.
    shift : float
        Constant added before transforming.
    auto_shift : bool
        When true and some value is non-positive, ``shift`` is replaced by
        ``1 - min(values)`` instead of raising.

    Raises
    ------
    NonPositiveInput
        Some ``value + shift`` is <= 0 and ``auto_shift`` is off.
    DegenerateInput
        Fewer than 3 values, or all values equal.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    if len(x) < 3:
        raise DegenerateInput(f"need at least 3 values to fit lambda, got {len(x)}")
    if auto_shift and (x + shift <= 0).any():
        shift = 1.0 - float(x.min())
    xs = _shifted(x, shift)
    if np.ptp(xs) == 0:
        raise DegenerateInput("all values are equal; the likelihood is undefined")
    lo, hi = search_interval
    res = optimize.minimize_scalar(
        lambda lam: -_profile_ll(xs, lam), bounds=(lo, hi), method="bounded", options={"xatol": tol}
    )
    lmbda = float(res.x)
    return BoxCoxParams(lmbda, shift, _profile_ll(xs, lmbda))


def forward(values, params: BoxCoxParams) -> np.ndarray:
    """``(x**lmbda - 1) / lmbda``, or ``log(x)`` when lmbda is ~0."""
    return _transform_logs(np.log(_shifted(values, params.shift)), params.lmbda)


def in_domain(transformed, params: BoxCoxParams) -> np.ndarray:
    """Mask of transformed values that have a finite preimage."""
    y = np.asarray(transformed, dtype=np.float64)
    if abs(params.lmbda) < LOG_BRANCH_EPS:
        return np.isfinite(y)
    return np.isfinite(y) & (params.lmbda * y + 1.0 > 0)


def inverse(transformed, params: BoxCoxParams, errors: str = "raise") -> np.ndarray:
    """Map transformed values back to the original scale.

    ``errors="raise"`` raises ``OutOfDomain`` when ``lmbda * y + 1 <= 0`` for
    some entry; ``errors="nan"`` returns NaN for those entries instead.
    """
    if errors not in ("raise", "nan"):
        raise ValueError(f"errors must be 'raise' or 'nan', got {errors!r}")
    y = np.asarray(transformed, dtype=np.float64)
    lam = params.lmbda
    if abs(lam) < LOG_BRANCH_EPS:
        return np.exp(y) - params.shift
    ok = in_domain(y, params)
    if not ok.all():
        bad = np.flatnonzero(~ok.reshape(-1))
        if errors == "raise":
            raise OutOfDomain(
                f"{len(bad)} transformed value(s) fall outside the image of the "
                f"transform (lambda={lam:.6g}); first at index {bad[0]}",
                indices=bad,
            )
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.exp(np.log1p(lam * y) / lam) - params.shift
    return np.where(ok, x, np.nan)
