"""CSV dataset ingestion, cleaning, and truth-panel scoring.

The cleaning pipeline mirrors the drug-resistance workflow: drop samples
with a missing response, then drop variables with too few mutations in the
culled sample, then insist the remaining design is full-rank (rank
deficiency is an error naming the offending columns, never a silent drop).
"""

from dataclasses import dataclass
import warnings

import numpy as np
import pandas as pd
from scipy.linalg import qr as scipy_qr

from .errors import (
    DimensionError,
    EmptyDataset,
    KfkoError,
    MissingGenotype,
    RankDeficientAfterCleaning,
    UnknownLabel,
)

RANK_TOL_FACTOR = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Raw labelled design plus a response with a missingness mask."""

    design: np.ndarray       # n x p, may contain NaN for missing cells
    response: np.ndarray     # length n, NaN marks missing
    labels: tuple            # column identifiers

    def __post_init__(self):
        if self.design.ndim != 2:
            raise DimensionError("design must be 2-d")
        n, p = self.design.shape
        if len(self.labels) != p:
            raise DimensionError("label count must equal column count")
        if self.response.shape != (n,):
            raise DimensionError("response length must equal row count")

    @property
    def n(self):
        return self.design.shape[0]

    @property
    def p(self):
        return self.design.shape[1]


@dataclass(frozen=True)
class TruthPanel:
    """Column labels treated as true signals when scoring discoveries."""

    labels: frozenset
    universe: frozenset = None

    def __post_init__(self):
        if self.universe is not None:
            unknown = self.labels - self.universe
            if unknown:
                warnings.warn(
                    f"panel labels not in the declared universe: {sorted(unknown)}",
                    stacklevel=2,
                )


def read_dataset(path, response_col):
    """Load a headered CSV; empty cells become NaN."""
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, OSError, UnicodeDecodeError) as exc:
        raise KfkoError(f"cannot parse {path}: {exc}") from exc
    if response_col not in frame.columns:
        raise KfkoError(f"response column {response_col!r} not found in {path}")
    labels = tuple(c for c in frame.columns if c != response_col)
    if not labels:
        raise EmptyDataset(f"{path} has no design columns")
    try:
        design = frame[list(labels)].to_numpy(dtype=float)
        response = frame[response_col].to_numpy(dtype=float)
    except (TypeError, ValueError) as exc:
        raise KfkoError(f"non-numeric cell in {path}: {exc}") from exc
    return Dataset(design=design, response=response, labels=labels)


def read_design(path):
    """Load a design-only CSV (no response column)."""
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, OSError, UnicodeDecodeError) as exc:
        raise KfkoError(f"cannot parse {path}: {exc}") from exc
    if frame.shape[1] == 0:
        raise EmptyDataset(f"{path} has no columns")
    try:
        values = frame.to_numpy(dtype=float)
    except (TypeError, ValueError) as exc:
        raise KfkoError(f"non-numeric cell in {path}: {exc}") from exc
    return values, tuple(frame.columns)


def clean_dataset(ds, min_mutations):
    """Rows with a missing response go first, then sparse columns, then a
    full-rank check on what is left.

    A column survives when it has at least `min_mutations` nonzero entries
    counted on the culled sample.  Missing design cells in retained rows are
    an input error (impute upstream).
    """
    if min_mutations < 1:
        raise ValueError("min_mutations must be >= 1")
    keep_rows = ~np.isnan(ds.response)
    design = ds.design[keep_rows]
    response = ds.response[keep_rows]
    if design.shape[0] == 0:
        raise EmptyDataset("no samples with an observed response")
    if np.isnan(design).any():
        rows, cols = np.nonzero(np.isnan(design))
        raise MissingGenotype(
            f"missing design cell at row {rows[0]}, column {ds.labels[cols[0]]!r}"
        )
    counts = np.count_nonzero(design, axis=0)
    keep_cols = counts >= min_mutations
    if not keep_cols.any():
        raise EmptyDataset("no columns meet the mutation threshold")
    design = design[:, keep_cols]
    labels = tuple(l for l, keep in zip(ds.labels, keep_cols) if keep)
    _check_full_rank(design, labels)
    return Dataset(design=design, response=response, labels=labels)


def _check_full_rank(design, labels):
    sv = np.linalg.svd(design, compute_uv=False)
    rank_tol = RANK_TOL_FACTOR * sv[0]
    rank = int(np.sum(sv > rank_tol))
    if rank < design.shape[1]:
        # pivoted QR points at the columns beyond the numerical rank
        _, _, piv = scipy_qr(design, mode="economic", pivoting=True)
        offenders = sorted(labels[j] for j in piv[rank:])
        raise RankDeficientAfterCleaning(offenders)


def load_panel(path, universe=None):
    """One label per line; blank lines and '#' comments ignored."""
    labels = set()
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                labels.add(line)
    return TruthPanel(
        labels=frozenset(labels),
        universe=frozenset(universe) if universe is not None else None,
    )


def score_against_panel(result, labels, panel):
    """(true_count, total_count) of rejections against the truth panel."""
    total = len(result.rejected)
    true_count = 0
    for j in result.rejected:
        if j >= len(labels):
            raise UnknownLabel(f"rejected index {j} has no label")
        if labels[j] in panel.labels:
            true_count += 1
    return true_count, total
