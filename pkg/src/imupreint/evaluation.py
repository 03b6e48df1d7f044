"""Rigid alignment of an estimate onto ground truth and position error statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset_io import MATCH_TOL, associate, atomic_write_text, format_seconds
from .state import Trajectory

# singular-value ratio below which matched positions count as collinear
COLLINEAR_TOL = 1e-9


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    """Rigid map ``p -> rot @ p + trans`` applied to the estimate."""

    rot: np.ndarray
    trans: np.ndarray

    @classmethod
    def identity(cls) -> "AlignmentResult":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rot.T + self.trans


@dataclass(frozen=True, eq=False)
class ErrorReport:
    rmse: float
    per_axis_rmse: np.ndarray
    times: np.ndarray
    errors: np.ndarray
    count: int
    dropped: int = 0
    rotation_rmse: float | None = None

    @property
    def per_sample_errors(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.times.tolist(), self.errors))


def matched_positions(estimate: Trajectory, truth: Trajectory, tol: float = MATCH_TOL):
    pairs, dropped = associate(estimate.times, truth.times, tol)
    ie = [i for i, _ in pairs]
    it = [j for _, j in pairs]
    return ie, it, dropped


def fit_rigid(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares ``rot, trans`` with ``rot @ src_k + trans ~ dst_k``, det(rot) = +1."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if len(src) < 3:
        raise AlignmentError(f"need at least 3 matched positions, got {len(src)}")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    S = src - mu_s
    D = dst - mu_d
    for pts, name in ((S, "estimate"), (D, "truth")):
        sv = np.linalg.svd(pts, compute_uv=False)
        if sv[0] == 0 or sv[1] <= COLLINEAR_TOL * sv[0]:
            raise AlignmentError(f"degenerate geometry: {name} positions are collinear")
    U, _, Vt = np.linalg.svd(D.T @ S)
    M = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    rot = U @ M @ Vt
    return rot, mu_d - rot @ mu_s


def align_rigid(estimate: Trajectory, truth: Trajectory, tol: float = MATCH_TOL) -> AlignmentResult:
    """SE(3) alignment (no scale) of matched estimate positions onto truth."""
    ie, it, _ = matched_positions(estimate, truth, tol)
    rot, trans = fit_rigid(estimate.positions[ie], truth.positions[it])
    return AlignmentResult(rot, trans)


def _rotation_angles(Ra: np.ndarray, Rb: np.ndarray) -> np.ndarray:
    rel = np.einsum("nji,njk->nik", Ra, Rb)
    c = np.clip((np.trace(rel, axis1=1, axis2=2) - 1.0) / 2.0, -1.0, 1.0)
    return np.arccos(c)


def compute_errors(estimate: Trajectory, truth: Trajectory,
                   alignment: AlignmentResult | None = None,
                   tol: float = MATCH_TOL) -> ErrorReport:
    """Per-sample position errors of the aligned estimate against truth."""
    alignment = alignment or AlignmentResult.identity()
    ie, it, dropped = matched_positions(estimate, truth, tol)
    if not ie:
        raise AlignmentError("no estimate stamps match the truth within tolerance")
    est = alignment.apply(estimate.positions[ie])
    err = est - truth.positions[it]
    sq = np.sum(err * err, axis=1)
    Re = np.einsum("ij,njk->nik", alignment.rot, estimate.rotations[ie])
    ang = _rotation_angles(Re, truth.rotations[it])
    return ErrorReport(
        rmse=float(np.sqrt(np.mean(sq))),
        per_axis_rmse=np.sqrt(np.mean(err * err, axis=0)),
        times=estimate.times[ie],
        errors=err,
        count=len(ie),
        dropped=dropped,
        rotation_rmse=float(np.sqrt(np.mean(ang * ang))),
    )


def improvement_percent(base_rmse: float, new_rmse: float) -> float:
    """Relative RMSE reduction of ``new`` over ``base`` in percent."""
    if base_rmse <= 0:
        raise ValueError("base RMSE must be positive")
    return 100.0 * (base_rmse - new_rmse) / base_rmse


def error_rows(report: ErrorReport, origin_ns: int = 0) -> str:
    lines = ["# t, ex, ey, ez, norm"]
    for t, e in zip(report.times, report.errors):
        lines.append(", ".join([format_seconds(t, origin_ns)]
                               + [repr(float(x)) for x in (*e, np.linalg.norm(e))]))
    return "\n".join(lines) + "\n"


def summary_items(report: ErrorReport, prefix: str = "") -> list[tuple[str, object]]:
    items = [
        ("rmse", report.rmse),
        ("rmse_x", report.per_axis_rmse[0]),
        ("rmse_y", report.per_axis_rmse[1]),
        ("rmse_z", report.per_axis_rmse[2]),
        ("count", report.count),
        ("dropped", report.dropped),
    ]
    if report.rotation_rmse is not None:
        items.append(("rotation_rmse_rad", report.rotation_rmse))
    return [(prefix + k, v) for k, v in items]


def format_summary(items) -> str:
    out = []
    for k, v in items:
        if isinstance(v, (float, np.floating)):
            v = repr(float(v))
        out.append(f"{k}={v}")
    return "\n".join(out) + "\n"


def write_error_report(path, report: ErrorReport, origin_ns: int = 0) -> None:
    atomic_write_text(path, error_rows(report, origin_ns))


def read_summary(path) -> dict[str, str]:
    out = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                k, _, v = line.partition("=")
                out[k.strip()] = v.strip()
    return out
