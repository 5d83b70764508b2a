"""File formats, model artifacts, prediction, and the spectra loader.

Formats are deliberately plain: dense samples are CSV with the grid in the
first row and one curve per row with the response in the final column;
sparse samples are long-format (id, t, u) CSV plus a separate (id, y)
response file; fitted models and reports are JSON. Floats are written with
``repr``, the shortest representation that round-trips exactly, so artifacts
reload bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataFormatError, GridMismatchError
from .fpca import (
    Curve,
    DenseFunctionalSample,
    EigenSystem,
    ScoreMatrix,
    exact_scores,
)
from .funcbase import Grid
from .pipeline import FitResult
from .sdr import BasisEstimate, CoefficientMatrix, DimensionSelection, SolverConfig
from .simlab import MonteCarloReport
from .sparse import SparseFunctionalSample

__all__ = [
    "RunConfig",
    "PredictionModel",
    "read_dense_csv",
    "write_dense_csv",
    "read_sparse_csv",
    "write_sparse_csv",
    "save_model",
    "load_model",
    "write_simulation_csv",
    "write_simulation_summary",
    "write_selection_report",
    "load_tecator",
    "tecator_response",
]

_MODEL_FORMAT = "fsdr-model-v1"


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Validated command parameters, serializable to and from JSON.

    Unknown keys are rejected on load; every numeric field is range-checked
    at construction time so downstream code can trust it.
    """

    model: Optional[int] = None
    n: Optional[int] = None
    design: str = "dense"
    replicates: Optional[int] = None
    num_directions: Optional[int] = None
    fve_threshold: float = 0.99
    restarts: int = 10
    max_iter: int = 500
    search_dim: Optional[int] = None
    n_boot: int = 50
    max_candidates: int = 6
    k_nn: int = 5
    h_mu: Optional[float] = None
    h_sigma: Optional[float] = None
    seed: int = 0
    threads: int = 1
    grid_points: int = 100

    def __post_init__(self):
        if self.model is not None and self.model not in (1, 2, 3, 4, 5):
            raise DataFormatError("model must be in 1..5")
        if self.n is not None and self.n < 2:
            raise DataFormatError("n must be at least 2")
        if self.design not in ("dense", "sparse"):
            raise DataFormatError("design must be 'dense' or 'sparse'")
        if self.replicates is not None and self.replicates < 1:
            raise DataFormatError("replicates must be positive")
        if self.num_directions is not None and self.num_directions < 1:
            raise DataFormatError("num_directions must be positive")
        if not 0 < self.fve_threshold <= 1:
            raise DataFormatError("fve_threshold must be in (0, 1]")
        if self.restarts < 1:
            raise DataFormatError("restarts must be positive")
        if self.max_iter < 1:
            raise DataFormatError("max_iter must be positive")
        if self.n_boot < 10:
            raise DataFormatError("n_boot must be at least 10")
        if self.k_nn < 1:
            raise DataFormatError("k_nn must be positive")
        for name in ("h_mu", "h_sigma"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise DataFormatError(f"{name} must lie in (0, 1)")
        if self.threads < 1:
            raise DataFormatError("threads must be positive")
        if self.grid_points < 2:
            raise DataFormatError("grid_points must be at least 2")

    def solver(self) -> SolverConfig:
        return SolverConfig(
            restarts=self.restarts,
            max_iter=self.max_iter,
            search_dim=self.search_dim,
        )

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DataFormatError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# ---------------------------------------------------------------------------
# dense and sparse sample files
# ---------------------------------------------------------------------------


def _parse_floats(row: list[str], line_no: int, path) -> list[float]:
    try:
        return [float(x) for x in row]
    except ValueError as exc:
        raise DataFormatError(f"{path}:{line_no}: non-numeric field ({exc})") from exc


def read_dense_csv(path: str | Path) -> DenseFunctionalSample:
    """Dense sample file: first row grid points, then curves with a trailing
    response column. Rows without the extra column are rejected so files
    cannot silently mix labeled and unlabeled curves."""
    path = Path(path)
    try:
        rows = list(csv.reader(path.open(newline="")))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if len(rows) < 3:
        raise DataFormatError(f"{path}: need a grid row and at least two curves")
    grid_vals = _parse_floats(rows[0], 1, path)
    p = len(grid_vals)
    try:
        grid = Grid(np.asarray(grid_vals))
    except ValueError as exc:
        raise DataFormatError(f"{path}:1: bad grid row: {exc}") from exc
    curves, responses = [], []
    for i, row in enumerate(rows[1:], start=2):
        vals = _parse_floats(row, i, path)
        if len(vals) != p + 1:
            raise DataFormatError(
                f"{path}:{i}: expected {p + 1} fields (curve + response), "
                f"got {len(vals)}"
            )
        curves.append(vals[:p])
        responses.append(vals[p])
    try:
        return DenseFunctionalSample(
            grid=grid, curves=np.asarray(curves), responses=np.asarray(responses)
        )
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def write_dense_csv(sample: DenseFunctionalSample, path: str | Path) -> None:
    if sample.responses is None:
        raise ValueError("dense sample files require responses")
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow([repr(x) for x in sample.grid.points])
        for row, y in zip(sample.curves, sample.responses):
            out.writerow([repr(x) for x in row] + [repr(float(y))])


def read_sparse_csv(
    obs_path: str | Path, response_path: str | Path
) -> SparseFunctionalSample:
    """Long-format observations (id, t, u) plus per-subject responses (id, y).

    Subjects are ordered by first appearance in the observation file; the
    response file must cover exactly the same ids.
    """
    obs_path, response_path = Path(obs_path), Path(response_path)
    times: dict[str, list[float]] = {}
    values: dict[str, list[float]] = {}
    order: list[str] = []
    rows = list(csv.reader(obs_path.open(newline="")))
    start = 1 if rows and rows[0][:1] == ["id"] else 0
    for i, row in enumerate(rows[start:], start=start + 1):
        if not row:
            continue
        if len(row) != 3:
            raise DataFormatError(f"{obs_path}:{i}: expected 'id,t,u'")
        sid = row[0].strip()
        t, u = _parse_floats(row[1:], i, obs_path)
        if sid not in times:
            times[sid] = []
            values[sid] = []
            order.append(sid)
        times[sid].append(t)
        values[sid].append(u)
    if not order:
        raise DataFormatError(f"{obs_path}: no observations")

    responses: dict[str, float] = {}
    rrows = list(csv.reader(response_path.open(newline="")))
    rstart = 1 if rrows and rrows[0][:1] == ["id"] else 0
    for i, row in enumerate(rrows[rstart:], start=rstart + 1):
        if not row:
            continue
        if len(row) != 2:
            raise DataFormatError(f"{response_path}:{i}: expected 'id,y'")
        sid = row[0].strip()
        (y,) = _parse_floats(row[1:], i, response_path)
        if sid in responses:
            raise DataFormatError(f"{response_path}:{i}: duplicate id {sid!r}")
        responses[sid] = y
    missing = [sid for sid in order if sid not in responses]
    extra = sorted(set(responses) - set(order))
    if missing or extra:
        raise DataFormatError(
            f"response ids do not match observation ids "
            f"(missing {missing[:3]}, extra {extra[:3]})"
        )
    try:
        return SparseFunctionalSample(
            times=[np.asarray(times[sid]) for sid in order],
            values=[np.asarray(values[sid]) for sid in order],
            responses=np.asarray([responses[sid] for sid in order]),
        )
    except ValueError as exc:
        raise DataFormatError(f"{obs_path}: {exc}") from exc


def write_sparse_csv(
    sample: SparseFunctionalSample,
    obs_path: str | Path,
    response_path: str | Path,
) -> None:
    if sample.responses is None:
        raise ValueError("sparse sample files require responses")
    with Path(obs_path).open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["id", "t", "u"])
        for i, (t, u) in enumerate(zip(sample.times, sample.values)):
            for tj, uj in zip(t, u):
                out.writerow([str(i), repr(float(tj)), repr(float(uj))])
    with Path(response_path).open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["id", "y"])
        for i, y in enumerate(sample.responses):
            out.writerow([str(i), repr(float(y))])


# ---------------------------------------------------------------------------
# model artifact and prediction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionModel:
    """Fitted basis plus the training projections feeding the link estimate.

    Prediction is a k-nearest-neighbor average in the projection space with
    inverse-distance weights; an exact match (zero distance) short-circuits
    to the average of the coinciding training responses.
    """

    basis: BasisEstimate
    train_projections: np.ndarray
    train_responses: np.ndarray
    k_nn: int = 5
    score_source: str = "exact"
    seed: int = 0
    extra: dict = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.k_nn < 1 or self.k_nn > len(self.train_responses):
            raise ValueError("k_nn must lie in 1..n_train")
        if self.train_projections.shape != (
            len(self.train_responses),
            self.basis.num_directions,
        ):
            raise ValueError("training projections have the wrong shape")
        object.__setattr__(self, "extra", dict(self.extra or {}))

    @classmethod
    def from_fit(cls, fit: FitResult, k_nn: int = 5, seed: int = 0, **extra):
        proj = fit.scores.scores @ fit.basis.coefficients.matrix
        responses = extra.pop("responses")
        return cls(
            basis=fit.basis,
            train_projections=proj,
            train_responses=np.asarray(responses, dtype=float),
            k_nn=k_nn,
            score_source=fit.scores.source,
            seed=seed,
            extra=extra,
        )

    def project_dense(self, sample: DenseFunctionalSample) -> np.ndarray:
        """Project curves onto the fitted directions via training-basis scores."""
        es = self.basis.eigensystem
        if not sample.grid.same_as(es.grid):
            raise GridMismatchError("test grid differs from the training grid")
        theta = exact_scores(
            DenseFunctionalSample(sample.grid, sample.curves, None), es
        ).scores
        return theta @ self.basis.coefficients.matrix

    def predict_from_projections(self, xi: np.ndarray) -> np.ndarray:
        k = self.k_nn
        train = self.train_projections
        out = np.empty(len(xi))
        for i, x in enumerate(xi):
            d = np.sqrt(((train - x) ** 2).sum(axis=1))
            nn = np.argsort(d, kind="stable")[:k]
            dn = d[nn]
            if dn[0] == 0.0:
                out[i] = float(np.mean(self.train_responses[nn[dn == 0.0]]))
                continue
            w = 1.0 / dn
            out[i] = float(np.sum(w * self.train_responses[nn]) / np.sum(w))
        return out

    def predict_dense(self, sample: DenseFunctionalSample) -> np.ndarray:
        return self.predict_from_projections(self.project_dense(sample))


def rmse(y: np.ndarray, y_hat: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.size == 0:
        raise ValueError("need matching nonempty vectors")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def save_model(model: PredictionModel, path: str | Path) -> None:
    es = model.basis.eigensystem
    d = es.num_components
    payload = {
        "format": _MODEL_FORMAT,
        "score_source": model.score_source,
        "seed": model.seed,
        "k_nn": model.k_nn,
        "grid": es.grid.points.tolist(),
        "mean": es.mean.values.tolist(),
        "eigenvalues": es.eigenvalues[:d].tolist(),
        "eigenfunctions": [f.values.tolist() for f in es.eigenfunctions[:d]],
        "fve_threshold": es.fve_threshold,
        "coefficients": model.basis.coefficients.matrix.tolist(),
        "objective_values": model.basis.coefficients.objective_values.tolist(),
        "directions": [c.values.tolist() for c in model.basis.directions],
        "train_projections": model.train_projections.tolist(),
        "train_responses": model.train_responses.tolist(),
        "extra": model.extra,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_model(path: str | Path) -> PredictionModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read model {path}: {exc}") from exc
    if payload.get("format") != _MODEL_FORMAT:
        raise DataFormatError(f"{path}: not a {_MODEL_FORMAT} artifact")
    try:
        grid = Grid(np.asarray(payload["grid"]))
        mean = Curve(grid, np.asarray(payload["mean"]))
        lam = np.asarray(payload["eigenvalues"])
        funcs = [Curve(grid, np.asarray(v)) for v in payload["eigenfunctions"]]
        es = EigenSystem(
            grid=grid,
            eigenvalues=lam,
            eigenfunctions=funcs,
            mean=mean,
            num_components=len(lam),
            fve_threshold=payload["fve_threshold"],
        )
        coef = CoefficientMatrix(
            matrix=np.asarray(payload["coefficients"]),
            objective_values=np.asarray(payload["objective_values"]),
        )
        directions = [Curve(grid, np.asarray(v)) for v in payload["directions"]]
        basis = BasisEstimate(coefficients=coef, directions=directions, eigensystem=es)
        return PredictionModel(
            basis=basis,
            train_projections=np.asarray(payload["train_projections"]),
            train_responses=np.asarray(payload["train_responses"]),
            k_nn=int(payload["k_nn"]),
            score_source=payload["score_source"],
            seed=int(payload["seed"]),
            extra=payload.get("extra") or {},
        )
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed model artifact: {exc}") from exc


# ---------------------------------------------------------------------------
# simulation and selection reports
# ---------------------------------------------------------------------------


def write_simulation_csv(report: MonteCarloReport, path: str | Path) -> None:
    """One row per successful replicate, stable field order."""
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["model", "n", "design", "replicate", "seed", "error", "runtime"])
        for rep, err, rt in zip(
            report.replicate_ids, report.errors, report.runtimes
        ):
            out.writerow(
                [
                    report.model_id,
                    report.n,
                    report.design,
                    int(rep),
                    report.seed,
                    repr(float(err)),
                    repr(float(rt)),
                ]
            )


def write_simulation_summary(report: MonteCarloReport, path: str | Path) -> None:
    payload = {
        "mean_error": report.mean,
        "sd_error": report.sd,
        "se_error": report.se,
        "replicates_requested": report.replicates,
        "replicates_used": int(len(report.errors)),
        "failures": [{"replicate": int(r), "reason": m} for r, m in report.failures],
        "valid": report.valid,
        "config": report.config,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def write_selection_report(
    selection: DimensionSelection, path: str | Path, config: dict | None = None
) -> None:
    payload = {
        "chosen_k": int(selection.chosen_k),
        "candidate_ks": selection.candidate_ks.tolist(),
        "variability": selection.variability.tolist(),
        "valid_replicates": selection.valid_replicates.tolist(),
        "n_boot": selection.n_boot,
        "seed": selection.seed,
        "config": config or {},
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------------------
# near-infrared spectra
# ---------------------------------------------------------------------------


def tecator_response(fat_percent: float) -> float:
    """Logit-type transform of a fat percentage: log10(u / (1 - u)), u = fat/100."""
    u = fat_percent / 100.0
    if not 0.0 < u < 1.0:
        raise ValueError(f"fat percentage {fat_percent} outside (0, 100)")
    return math.log10(u / (1.0 - u))


def load_tecator(path: str | Path) -> DenseFunctionalSample:
    """Load spectra records: 100 absorbance channels plus a fat percentage.

    Channels map onto a uniform grid over [0, 1]; responses are the
    log10(u/(1-u)) transform of the fat fraction. Records with fat outside
    (0, 100) are rejected with their line number. An optional non-numeric
    header row is skipped.
    """
    path = Path(path)
    try:
        rows = list(csv.reader(path.open(newline="")))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    start = 0
    try:
        float(rows[0][0])
    except ValueError:
        start = 1
    curves, responses = [], []
    for i, row in enumerate(rows[start:], start=start + 1):
        vals = _parse_floats(row, i, path)
        if len(vals) != 101:
            raise DataFormatError(
                f"{path}:{i}: expected 101 columns (100 channels + fat), "
                f"got {len(vals)}"
            )
        try:
            responses.append(tecator_response(vals[100]))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{i}: {exc}") from exc
        curves.append(vals[:100])
    if len(curves) < 2:
        raise DataFormatError(f"{path}: need at least two records")
    return DenseFunctionalSample(
        grid=Grid.uniform(100),
        curves=np.asarray(curves),
        responses=np.asarray(responses),
    )
