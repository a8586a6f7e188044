from typing import Dict, Sequence

import numpy as np
from scipy.stats import kurtosis, skew

from .toolbox import tprint


def compute_detailed_stats(series: Dict[str, Sequence[float]]) -> dict:
    """
    Compute statistical summaries for each named series.

    Non-finite values (for example +inf CAR sentinels of batches without
    accidentals) are left out. A series with fewer than two finite values gets
    NaN skewness and kurtosis.

    Parameters:
      series (Dict[str, Sequence[float]]): Name -> values, e.g. {"car": [...], "concurrence": [...]}.

    Returns:
      dict: Name -> {count, min, q1, median, q3, average, max, std, IQR, skewness, kurtosis}.
            kurtosis is excess kurtosis (normal = 0).

    Example:
      >>> compute_detailed_stats({"car": [2300.0, 2400.0, 2500.0]})["car"]["median"]
      2400.0
    """
    result = {}

    for key, values in series.items():
        values = np.asarray(values, dtype=float)
        values = values[np.isfinite(values)]
        if values.size == 0:
            result[key] = {"count": 0}
            continue

        q1 = np.percentile(values, 25)
        q3 = np.percentile(values, 75)
        spread = values.size > 1 and np.ptp(values) > 0

        result[key] = {
            "count": int(values.size),
            "min": float(np.min(values)),
            "q1": float(q1),
            "median": float(np.median(values)),
            "q3": float(q3),
            "average": float(np.average(values)),
            "max": float(np.max(values)),
            "std": float(np.std(values, ddof=0)),
            "IQR": float(q3 - q1),
            "skewness": float(skew(values)) if spread else float("nan"),
            "kurtosis": float(kurtosis(values)) if spread else float("nan"),
        }

    return result


def relative_std(values: Sequence[float]) -> float:
    """Population std over mean of the finite values."""
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0 or np.mean(values) == 0:
        return float("nan")
    return float(np.std(values, ddof=0) / np.mean(values))


def print_stats(detailed_stats: dict):
    """
    Print detailed statistics, one metric per line, through tprint.

    Parameters:
      detailed_stats (dict): Output of compute_detailed_stats.
    """
    for stat_key, stat_result_dict in detailed_stats.items():
        for result_key, result_value in stat_result_dict.items():
            tprint(f"{stat_key} {result_key}: {result_value:.3f}")
