from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from .._io import dumps, to_jsonable
from ..analysis import FringeFit, histogram_to_csv
from .config import config_echo


@dataclass(frozen=True, eq=False)
class Histogram:
    centers: np.ndarray  # m
    counts: np.ndarray

    def __post_init__(self):
        if len(self.centers) != len(self.counts):
            raise ValueError("histogram centers and counts differ in length")

    def to_csv(self) -> str:
        return histogram_to_csv(self.centers, self.counts)


@dataclass(eq=False)
class ExperimentResult:
    experiment: str
    config: object
    seed: int
    histograms: dict[str, Histogram] = field(default_factory=dict)
    fits: dict[str, FringeFit | None] = field(default_factory=dict)
    scalars: dict[str, float] = field(default_factory=dict)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def provenance(self) -> dict:
        return {"experiment": self.experiment, "config": config_echo(self.config),
                "seed": self.seed, "version": __version__}

    def add_histogram(self, name: str, centers, counts):
        self.histograms[name] = Histogram(np.asarray(centers, float), np.asarray(counts))

    def to_dict(self) -> dict:
        return {
            **self.provenance,
            "scalars": dict(self.scalars),
            "arrays": dict(self.arrays),
            "fits": {k: (f.to_dict() if f is not None else None) for k, f in self.fits.items()},
            "histograms": {k: {"bin_center_m": h.centers, "counts": h.counts}
                           for k, h in self.histograms.items()},
        }

    def to_json(self) -> str:
        return dumps(to_jsonable(self.to_dict()))
