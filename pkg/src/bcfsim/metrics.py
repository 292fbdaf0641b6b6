"""Per-replicate evaluation metrics for point estimates and credible intervals.

Pointwise error metrics (RMSE, MAE, MAPE) compare an estimate vector against
ground truth; interval metrics score equal-tailed credible intervals by
empirical coverage and mean length, plus squared and absolute deviation of
coverage from its nominal level. One ``ReplicateRecord`` gathers everything a
single (dgp, alpha, model, replicate) cell produces.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np


def pointwise_errors(estimate, truth) -> dict:
    """RMSE, MAE and MAPE of ``estimate`` against ``truth``.

    MAPE divides by |truth|, so any exactly-zero truth entry is an error
    rather than a silent skip (the synthetic designs make zeros a
    measure-zero event, so hitting one means something is wrong upstream).
    """
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {tru.shape}")
    if est.size == 0:
        raise ValueError("empty input")
    if np.any(tru == 0):
        raise ValueError("MAPE undefined: truth contains an exact zero")
    err = est - tru
    return {
        "rmse": float(np.sqrt(np.mean(err**2))),
        "mae": float(np.mean(np.abs(err))),
        "mape": float(np.mean(np.abs(err) / np.abs(tru))),
    }


def interval_metrics(lower, upper, truth, nominal: float) -> dict:
    """Coverage, mean length, and coverage error of credible intervals.

    cover     fraction of units with lower <= truth <= upper
    len       mean(upper - lower)
    se_cover  (cover - nominal)^2
    ae_cover  |cover - nominal|
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if not (lo.shape == hi.shape == tru.shape):
        raise ValueError("lower, upper and truth must share a shape")
    if lo.size == 0:
        raise ValueError("empty input")
    if not 0 < nominal < 1:
        raise ValueError(f"nominal level must be in (0, 1), got {nominal}")
    if np.any(lo > hi):
        raise ValueError("crossed interval: lower > upper")
    cover = float(np.mean((lo <= tru) & (tru <= hi)))
    return {
        "cover": cover,
        "len": float(np.mean(hi - lo)),
        "se_cover": (cover - nominal) ** 2,
        "ae_cover": abs(cover - nominal),
    }


@dataclass
class ReplicateRecord:
    """All metrics from fitting one model variant on one synthetic draw."""

    dgp_id: str
    alpha: float
    model: str
    replicate_index: int
    seed: int
    rmse_cate: float
    mae_cate: float
    mape_cate: float
    cover_cate: float
    len_cate: float
    rmse_ate: float
    mae_ate: float
    mape_ate: float
    cover_ate: float
    len_ate: float
    rmse_pi: float
    mae_pi: float
    se_cover_cate: float
    ae_cover_cate: float
    se_cover_ate: float
    ae_cover_ate: float
    fit_seconds: float

    def __post_init__(self):
        for name in ("cover_cate", "cover_ate"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        for name in ("len_cate", "len_ate", "rmse_cate", "mae_cate", "rmse_ate",
                     "mae_ate", "rmse_pi", "mae_pi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


# Field order is the contract for replicates.csv (fit_seconds is excluded
# there; wall-clock timing goes to timing.json so reruns stay byte-identical).
RECORD_FIELDS = tuple(f.name for f in fields(ReplicateRecord))

# The per-replicate metric columns the summary and p-value tables report.
METRIC_FIELDS = (
    "rmse_cate", "mae_cate", "mape_cate", "cover_cate", "len_cate",
    "rmse_ate", "mae_ate", "mape_ate", "cover_ate", "len_ate",
    "rmse_pi", "mae_pi",
    "se_cover_cate", "ae_cover_cate", "se_cover_ate", "ae_cover_ate",
)
