"""Switching linear decoding of finger flexion from ECoG.

Arrays are float64 NumPy arrays laid out samples x channels. Segments are
(start, end, state) tuples with end exclusive and states 1..5 for the moving
finger, 6 for rest.
"""

from __future__ import annotations

import json
from typing import Any

from . import _core
from ._core import fit_ar, labels_from_flexion, ridge_fit, savgol_smooth, ssa_fit, ssa_lambda_max, synth

__all__ = [
    "Decoder",
    "correlations",
    "default_config",
    "fit_ar",
    "labels_from_flexion",
    "ridge_fit",
    "savgol_smooth",
    "ssa_fit",
    "ssa_lambda_max",
    "synth",
]


def default_config() -> dict[str, Any]:
    return json.loads(_core.default_config())


def correlations(pred, truth, exclude_finger4: bool = True) -> dict[str, Any]:
    """Per-finger Pearson correlations and their average."""
    return json.loads(_core.correlations(pred, truth, exclude_finger4))


class Decoder:
    """A trained switching decoder: state classifier plus per-state regressors."""

    def __init__(self, impl: _core.Decoder):
        self._impl = impl

    @classmethod
    def train(cls, ecog, flex, rate_hz: float, segments=None, config: dict[str, Any] | None = None) -> "Decoder":
        """Train with validation sweeps. `config` keys override the defaults;
        without segments, states are labeled from the flexion record."""
        cfg = json.dumps(config) if config else ""
        return cls(_core.Decoder.train(ecog, flex, rate_hz, segments, cfg))

    @classmethod
    def load(cls, path) -> "Decoder":
        return cls(_core.Decoder.load(str(path)))

    def save(self, path) -> None:
        self._impl.save(str(path))

    def decode(self, ecog, rate_hz: float, mode: str = "estimated", flex=None, segments=None,
               use_global_model: bool = False) -> dict[str, Any]:
        """Returns flexion, states and a report; with `flex` the report holds
        correlations and `truth` the aligned working-rate flexion."""
        out = self._impl.decode(ecog, rate_hz, mode, flex, segments, use_global_model)
        out["report"] = json.loads(out["report"])
        return out

    @property
    def archive(self) -> dict[str, Any]:
        return json.loads(self._impl.archive_json())

    @property
    def report(self) -> dict[str, Any]:
        return json.loads(self._impl.report_json())
