"""Tabular dataset ingestion and preprocessing for the real-data experiments."""

import io
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg
from sklearn import model_selection
from sklearn.preprocessing import MinMaxScaler, StandardScaler

from ..shared.errors import ConfigError, ParseError, ShapeError
from ..shared.utils import fraction_to_count
from .rff import Dataset

logger = logging.getLogger(__name__)

_LINE = re.compile(r"line (\d+)")


def load_table(source: Union[str, Path, bytes], filename: Optional[str] = None) -> pd.DataFrame:
    """Read a CSV or XLSX table from a path or from uploaded bytes"""
    name = filename or str(source)
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"dataset file not found: {path}")
        content = path.read_bytes()
    else:
        content = source
    try:
        if name.endswith(".csv"):
            return pd.read_csv(io.BytesIO(content))
        if name.endswith(".xlsx"):
            return pd.read_excel(io.BytesIO(content))
    except pd.errors.ParserError as e:
        match = _LINE.search(str(e))
        raise ParseError(f"malformed table {name}: {e}", row=int(match.group(1)) if match else None) from e
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"empty table {name}") from e
    raise ConfigError(f"unsupported file format: {name}")


def clean_table(df: pd.DataFrame) -> pd.DataFrame:
    """Drop empty rows/columns and duplicates, require numeric cells, median-fill gaps"""
    df_clean = df.copy()

    # Remove completely empty rows and columns
    df_clean = df_clean.dropna(how="all")
    df_clean = df_clean.dropna(axis=1, how="all")
    df_clean = df_clean.drop_duplicates()
    if df_clean.empty:
        raise ParseError("table has no data rows")

    for col in df_clean.columns:
        numeric = pd.to_numeric(df_clean[col], errors="coerce")
        bad = numeric.isna() & df_clean[col].notna()
        if bad.any():
            index = bad.idxmax()
            # Header is line 1 of the file.
            raise ParseError(f"non-numeric value {df_clean[col][index]!r}",
                             row=int(df.index.get_loc(index)) + 2, column=str(col))
        missing = int(numeric.isna().sum())
        if missing:
            logger.warning("Filled %d missing values in column %r with the median", missing, col)
            numeric = numeric.fillna(numeric.median())
        df_clean[col] = numeric.astype(float)
    return df_clean


def summarize_table(df: pd.DataFrame) -> Dict[str, Any]:
    return {
        "rows": len(df),
        "columns": len(df.columns),
        "column_names": [str(c) for c in df.columns],
        "numeric_columns": [str(c) for c in df.select_dtypes(include=["number"]).columns],
        "missing_values": {str(k): int(v) for k, v in df.isnull().sum().items()},
    }


def drop_constant_columns(X: np.ndarray, columns: Optional[Sequence[str]] = None) -> Tuple[np.ndarray, List[str]]:
    X = np.asarray(X, dtype=float)
    columns = list(columns) if columns is not None else [f"x{k + 1}" for k in range(X.shape[1])]
    keep = np.std(X, axis=0) > 0
    for name, kept in zip(columns, keep):
        if not kept:
            logger.warning("Dropping zero-variance column %r", name)
    if not keep.any():
        raise ShapeError("every feature column has zero variance")
    return X[:, keep], [c for c, k in zip(columns, keep) if k]


def standardize(X: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance per column; columns must not be constant"""
    X = np.asarray(X, dtype=float)
    if np.any(np.ptp(X, axis=0) == 0):
        raise ShapeError("cannot standardize a zero-variance column")
    return StandardScaler().fit_transform(X)


def pca(X: np.ndarray, n_components: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Principal components from the covariance eigendecomposition.

    Returns (scores, components, explained variance), components as columns
    sorted by decreasing variance, each signed so its largest-magnitude entry
    is positive.
    """
    X = np.asarray(X, dtype=float)
    if not 1 <= n_components <= X.shape[1]:
        raise ConfigError(f"n_components must lie in [1, {X.shape[1]}], got {n_components}")
    if X.shape[0] < 2:
        raise ShapeError("PCA needs at least two rows")
    centered = X - X.mean(axis=0)
    covariance = np.atleast_2d(np.cov(centered, rowvar=False))
    eigenvalues, eigenvectors = linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1][:n_components]
    components = eigenvectors[:, order]
    lead = np.argmax(np.abs(components), axis=0)
    components = components * np.sign(components[lead, np.arange(n_components)])
    return centered @ components, components, eigenvalues[order]


def rescale_features(X: np.ndarray, low: float = -math.pi, high: float = math.pi) -> np.ndarray:
    """Affine map of each column onto [low, high]; constant columns go to the midpoint"""
    X = np.asarray(X, dtype=float)
    if not low < high:
        raise ConfigError(f"rescale interval must satisfy low < high, got ({low}, {high})")
    scaled = MinMaxScaler(feature_range=(low, high)).fit_transform(X)
    return np.where(np.ptp(X, axis=0) > 0, scaled, (low + high) / 2)


def train_test_split(data: Dataset, train_fraction: float = 0.9, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Seeded row split; both parts keep the original row order"""
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train fraction must lie in (0, 1), got {train_fraction}")
    if data.M < 2:
        raise ShapeError("splitting needs at least two rows")
    n_train = min(fraction_to_count(train_fraction, data.M), data.M - 1)
    train_rows, test_rows = model_selection.train_test_split(
        np.arange(data.M), train_size=n_train, random_state=seed % 2 ** 32, shuffle=True
    )
    return data.subset(np.sort(train_rows)), data.subset(np.sort(test_rows))


def signed_labels(y: np.ndarray) -> np.ndarray:
    """Two-class labels to ±1, the larger label mapping to +1"""
    y = np.asarray(y, dtype=float)
    classes = np.unique(y)
    if classes.shape[0] != 2:
        raise ConfigError(f"classification needs exactly two classes, found {classes.shape[0]}")
    return np.where(y == classes[1], 1.0, -1.0)


def prepare_dataset(
    frame: pd.DataFrame,
    n_components: Optional[int] = 5,
    interval: Tuple[float, float] = (-math.pi, math.pi),
    classification: bool = False,
    target: Optional[str] = None,
) -> Dataset:
    """Clean table to model-ready inputs: standardize, PCA, rescale; ±1 targets for classification"""
    raw = Dataset.from_frame(frame, target)
    feature_names = [str(c) for c in frame.columns if c != (target or frame.columns[-1])]
    X, kept = drop_constant_columns(raw.inputs, feature_names)
    X = standardize(X)
    if n_components is not None and n_components < X.shape[1]:
        X, _, explained = pca(X, n_components)
        logger.info("PCA kept %d of %d components (variance %s)", n_components, len(kept), np.round(explained, 4))
    X = rescale_features(X, *interval)
    y = signed_labels(raw.targets) if classification else raw.targets
    return Dataset(X, y)
