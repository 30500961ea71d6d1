"""Plain-text matrix and vector formats."""

from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from app.utils.errors import MatrixFormatError
from app.utils.logger import logger

PathLike = Union[str, Path]

# 17 significant digits reproduce doubles exactly
FLOAT_FORMAT = "%.17g"


def read_matrix_csv(path: PathLike) -> np.ndarray:
    """Read a comma-separated numeric matrix.

    A single header row is skipped when its first token is not numeric.
    Ragged rows and non-numeric cells raise MatrixFormatError with the
    0-based location of the first problem.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Matrix file not found: {path}")

    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise MatrixFormatError(f"No numeric rows in {path}")
    except pd.errors.ParserError as e:
        raise MatrixFormatError(f"Ragged rows in {path}: {e}")

    cells = frame.apply(lambda column: column.str.strip())
    cells = cells[~cells.fillna("").eq("").all(axis=1)].reset_index(drop=True)
    if not cells.empty and pd.isna(pd.to_numeric(cells.iat[0, 0], errors="coerce")):
        logger.debug(f"Skipping header row in {path}")
        cells = cells.iloc[1:].dropna(axis=1, how="all").reset_index(drop=True)
    if cells.empty:
        raise MatrixFormatError(f"No numeric rows in {path}")

    short = cells.isna().any(axis=1)
    if short.any():
        i = int(np.flatnonzero(short.to_numpy())[0])
        fields = int(cells.iloc[i].notna().sum())
        raise MatrixFormatError(f"Ragged row with {fields} fields (expected {cells.shape[1]})", row=i)

    bad = cells.apply(pd.to_numeric, errors="coerce").isna().to_numpy()
    if bad.any():
        i, j = (int(k) for k in np.argwhere(bad)[0])
        raise MatrixFormatError(f"Non-numeric cell '{cells.iat[i, j]}'", row=i, column=j)
    # Parsed with float() so written doubles come back bit-exact
    return cells.to_numpy(dtype=object).astype(float)


def write_matrix_csv(path: PathLike, m: np.ndarray) -> Path:
    """Write a 2-D array as comma-separated rows without header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.atleast_2d(m), fmt=FLOAT_FORMAT, delimiter=",")
    return path


def read_vector(path: PathLike) -> np.ndarray:
    """Read a newline-delimited vector (one value per line, blank lines ignored)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Vector file not found: {path}")

    values = []
    with open(path, "r") as f:
        for line_no, line in enumerate(f):
            token = line.strip()
            if not token:
                continue
            try:
                values.append(float(token))
            except ValueError:
                raise MatrixFormatError(f"Non-numeric value '{token}'", row=line_no)
    if not values:
        raise MatrixFormatError(f"No values in {path}")
    return np.array(values)


def write_vector(path: PathLike, v: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.ravel(v), fmt=FLOAT_FORMAT)
    return path


def read_response(path: PathLike) -> np.ndarray:
    """Response vectors may come as one column, one row, or one value per line."""
    m = read_matrix_csv(path)
    if 1 not in m.shape:
        raise MatrixFormatError(f"Response file must hold a single row or column, got shape {m.shape}")
    return m.ravel()
