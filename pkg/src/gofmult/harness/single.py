"""One goodness-of-fit test on a user data file."""

from __future__ import annotations

import json
from pathlib import Path

from ..estimation import FitConfig
from ..gof import gof_test
from ..registry import get_family
from .csvio import read_csv


def run_single(path, family_id, statistic="Sn*", method="MP", N=1000, seed=0, analytic=False,
               weights="normal", report=None):
    """Fit ``family_id`` to the CSV at ``path`` and test it.

    Writes the JSON report to ``report`` (default: ``<path>.gof.json``) and
    returns ``(result, report_path)``.
    """
    data = read_csv(path)
    family = get_family(family_id, data.shape[1])
    kwargs = {"seed": seed, "config": FitConfig(use_analytic_grads=analytic)}
    if method.upper() == "MP":
        kwargs["weights"] = weights
    result = gof_test(family, data, statistic, method, N, **kwargs)
    out = Path(report) if report else Path(str(path) + ".gof.json")
    payload = result.as_dict()
    payload.update({"data": str(path), "n": int(data.shape[0]), "dim": int(data.shape[1])})
    out.write_text(json.dumps(payload, indent=2))
    return result, out
