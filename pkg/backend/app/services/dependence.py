"""Dependence service: correlation structure generators, ingestion and MAC."""

from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import linalg

from app.models.dependence import CorrelationMatrix, MacLevel, StructureSpec
from app.utils.errors import DomainError, MatrixFormatError
from app.utils.logger import logger
from app.utils.matrix_io import read_matrix_csv, write_matrix_csv
from app.utils.numerics import NS_STRUCTURE, RngStream

LOAD_TOL = 1e-6
SPARSE_SHIFT = 0.05


class DependenceService:
    """Service for building and summarizing correlation structures."""

    def make_autoregressive(self, p: int, r: float) -> CorrelationMatrix:
        """Autoregressive structure Sigma_ij = r^|i-j|."""
        self._check_dim(p)
        if not -1.0 < r < 1.0:
            raise DomainError(f"Autoregressive coefficient must lie in (-1, 1), got {r}")
        lags = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
        entries = np.power(float(r), lags)
        return CorrelationMatrix(p=p, entries=entries, label=f"autoregressive(r={r})")

    def make_equal(self, p: int, rho: float) -> CorrelationMatrix:
        """Equal correlation rho between every pair."""
        self._check_dim(p)
        if not 0.0 <= rho < 1.0:
            raise DomainError(f"Equal correlation must lie in [0, 1), got {rho}")
        entries = np.full((p, p), float(rho))
        np.fill_diagonal(entries, 1.0)
        return CorrelationMatrix(p=p, entries=entries, label=f"equal(rho={rho})")

    def make_block(self, p: int, block: int, rho: float) -> CorrelationMatrix:
        """
        Block diagonal structure with within-block correlation rho.

        When block does not divide p the last block is truncated.
        """
        self._check_dim(p)
        if block < 1:
            raise DomainError(f"Block size must be positive, got {block}")
        if not 0.0 <= rho < 1.0:
            raise DomainError(f"Block correlation must lie in [0, 1), got {rho}")
        if p % block:
            logger.warning(f"Block size {block} does not divide p={p}; last block truncated")

        membership = np.arange(p) // block
        entries = np.where(np.equal.outer(membership, membership), float(rho), 0.0)
        np.fill_diagonal(entries, 1.0)
        return CorrelationMatrix(p=p, entries=entries, label=f"block(size={block},rho={rho})")

    def make_sparse_random(self, p: int, prob: float, value: float, rng: RngStream) -> CorrelationMatrix:
        """
        Sparse random structure shifted to be positive definite.

        Upper-triangle entries are value * Bernoulli(prob), mirrored below the
        diagonal; the result is (S + delta I) / (1 + delta) with
        delta = |lambda_min(S)| + 0.05.
        """
        self._check_dim(p)
        if not 0.0 < prob < 1.0:
            raise DomainError(f"Bernoulli probability must lie in (0, 1), got {prob}")
        if not abs(value) < 1.0:
            raise DomainError(f"Sparse correlation value must satisfy |value| < 1, got {value}")

        hits = rng.generator().random((p, p)) < prob
        upper = np.triu(np.where(hits, float(value), 0.0), k=1)
        raw = upper + upper.T
        np.fill_diagonal(raw, 1.0)

        lambda_min = float(linalg.eigh(raw, eigvals_only=True, subset_by_index=[0, 0])[0])
        delta = abs(lambda_min) + SPARSE_SHIFT
        entries = (raw + delta * np.eye(p)) / (1.0 + delta)
        np.fill_diagonal(entries, 1.0)
        logger.debug(f"Sparse structure p={p}: lambda_min={lambda_min:.4f}, delta={delta:.4f}")
        return CorrelationMatrix(
            p=p, entries=entries, label=f"sparse(prob={prob},value={value},seed={rng.seed})"
        )

    def mac(self, m: CorrelationMatrix) -> MacLevel:
        """Mean absolute correlation over all p^2 entries, diagonal included."""
        value = float(np.abs(m.entries).sum() / (m.p * m.p))
        return MacLevel(value=value, p=m.p)

    def load_correlation(self, path: Union[str, Path]) -> CorrelationMatrix:
        """
        Load and validate a dense CSV correlation matrix.

        Args:
            path: CSV file, optional single header row

        Returns:
            Validated CorrelationMatrix, symmetrized by averaging with its
            transpose when the asymmetry is within tolerance.
        """
        m = read_matrix_csv(path)
        if m.shape[0] != m.shape[1]:
            raise MatrixFormatError(f"Correlation matrix must be square, got shape {m.shape}")

        bad_diag = np.flatnonzero(np.abs(np.diag(m) - 1.0) > LOAD_TOL)
        if bad_diag.size:
            i = int(bad_diag[0])
            raise MatrixFormatError(f"Diagonal entry {m[i, i]} is not 1", row=i, column=i)

        bad_range = np.argwhere(np.abs(m) > 1.0 + LOAD_TOL)
        if bad_range.size:
            i, j = (int(k) for k in bad_range[0])
            raise MatrixFormatError(f"Entry {m[i, j]} lies outside [-1, 1]", row=i, column=j)

        bad_sym = np.argwhere(np.abs(m - m.T) > LOAD_TOL)
        if bad_sym.size:
            i, j = (int(k) for k in bad_sym[0])
            raise MatrixFormatError(f"Matrix is not symmetric ({m[i, j]} vs {m[j, i]})", row=i, column=j)

        entries = np.clip((m + m.T) / 2.0, -1.0, 1.0)
        np.fill_diagonal(entries, 1.0)
        logger.info(f"Loaded {m.shape[0]} x {m.shape[0]} correlation matrix from {path}")
        return CorrelationMatrix(p=m.shape[0], entries=entries, label=f"file({Path(path).name})")

    def save_correlation(self, m: CorrelationMatrix, path: Union[str, Path]) -> Path:
        return write_matrix_csv(path, m.entries)

    def sample_correlation_from_data(self, X: np.ndarray, label: Optional[str] = None) -> CorrelationMatrix:
        """Pearson sample correlation of the columns of an n x p data matrix."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 2:
            raise DomainError(f"Data matrix needs at least 2 rows, got shape {X.shape}")
        constant = np.flatnonzero(np.all(X == X[0], axis=0))
        if constant.size:
            raise DomainError(f"Column {int(constant[0])} has zero sample variance")

        centered = X - X.mean(axis=0)
        scaled = centered / np.sqrt((centered * centered).sum(axis=0))
        entries = scaled.T @ scaled
        entries = np.clip((entries + entries.T) / 2.0, -1.0, 1.0)
        np.fill_diagonal(entries, 1.0)
        return CorrelationMatrix(p=X.shape[1], entries=entries, label=label or f"sample(n={X.shape[0]})")

    def build(self, spec: StructureSpec) -> CorrelationMatrix:
        """Build the structure a StructureSpec describes."""
        params = spec.params
        if spec.kind == "ar":
            return self.make_autoregressive(params["p"], params["r"])
        if spec.kind == "equal":
            return self.make_equal(params["p"], params["rho"])
        if spec.kind == "block":
            return self.make_block(params["p"], params["size"], params["rho"])
        if spec.kind == "sparse":
            stream = RngStream(seed=params["seed"], namespace=NS_STRUCTURE)
            return self.make_sparse_random(params["p"], params["prob"], params["value"], stream)
        if spec.kind == "identity":
            return self.make_equal(params["p"], 0.0).model_copy(update={"label": "identity"})
        return self.load_correlation(params["path"])

    def build_from_text(self, text: str) -> CorrelationMatrix:
        return self.build(StructureSpec.parse(text))

    @staticmethod
    def _check_dim(p: int) -> None:
        if p < 1:
            raise DomainError(f"Dimension must be positive, got {p}")


dependence_service = DependenceService()
