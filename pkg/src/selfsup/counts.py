"""Count matrices: molecule splitting, normalisation and rank selection.

Rows are cells (samples), columns genes (features).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class DegenerateRows(ValueError):
    def __init__(self, rows):
        self.rows = list(rows)
        super().__init__(f"rows with zero total count: {self.rows}")


@dataclass
class CountMatrix:
    counts: np.ndarray
    cells: list | None = None
    genes: list | None = None

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2:
            raise ValueError("counts must be 2-D")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.isfinite(c)) or np.any(c != np.round(c)):
                raise ValueError("counts must be integers")
            c = c.astype(np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        self.counts = c.astype(np.int64, copy=False)
        n, g = c.shape
        if self.cells is None:
            self.cells = [f"cell{i}" for i in range(n)]
        if self.genes is None:
            self.genes = [f"gene{j}" for j in range(g)]
        if len(self.cells) != n or len(self.genes) != g:
            raise ValueError("label count does not match matrix shape")

    @property
    def shape(self):
        return self.counts.shape


def split_counts(c: CountMatrix, p: float = 0.5, seed: int = 0) -> tuple[CountMatrix, CountMatrix]:
    """Binomial thinning: each molecule goes to the first half with probability *p*."""
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    k1 = rng.binomial(c.counts, p)
    return (CountMatrix(k1, list(c.cells), list(c.genes)),
            CountMatrix(c.counts - k1, list(c.cells), list(c.genes)))


@dataclass(frozen=True)
class NormalizationSpec:
    n0: float | None = None   # None: median row total
    rho: str = "sqrt"

    def __post_init__(self):
        if self.n0 is not None and not self.n0 > 0:
            raise ValueError("n0 must be > 0")
        if self.rho not in _RHO:
            raise ValueError(f"rho must be one of {sorted(_RHO)}")


_RHO = {"sqrt": np.sqrt, "log1p": np.log1p}


def normalize(c: CountMatrix, spec: NormalizationSpec = NormalizationSpec()) -> np.ndarray:
    """``rho(n0 * count / N_cell)`` with ``N_cell`` the row total."""
    totals = c.counts.sum(axis=1)
    bad = np.flatnonzero(totals == 0)
    if bad.size:
        raise DegenerateRows(bad.tolist())
    n0 = float(np.median(totals)) if spec.n0 is None else spec.n0
    return _RHO[spec.rho](n0 * c.counts / totals[:, None])


# -- principal component regression --------------------------------------------

@dataclass(frozen=True)
class PcrModel:
    k: int
    source_mean: np.ndarray
    components: np.ndarray      # (k, source features), orthonormal rows
    regression: np.ndarray      # (k, target features)
    target_mean: np.ndarray


def _fix_signs(vt: np.ndarray) -> np.ndarray:
    # first clearly non-zero loading of every direction made positive
    tol = 1e-12 * np.abs(vt).max(axis=1, keepdims=True)
    first = np.argmax(np.abs(vt) > tol, axis=1)
    s = np.sign(vt[np.arange(vt.shape[0]), first])
    s[s == 0] = 1
    return vt * s[:, None]


def pcr_fit(source, target, k: int) -> PcrModel:
    """Regress centred *target* on the top-*k* principal component scores of centred *source*."""
    X = np.asarray(source, dtype=np.float64)
    Y = np.asarray(target, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("source and target need the same number of rows")
    if not 1 <= k <= min(X.shape):
        raise ValueError(f"k must lie in 1..{min(X.shape)}, got {k}")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    _, _, vt = np.linalg.svd(X - mx, full_matrices=False)
    V = _fix_signs(vt[:k])
    scores = (X - mx) @ V.T
    B, *_ = np.linalg.lstsq(scores, Y - my, rcond=None)
    return PcrModel(k, mx, V, B, my)


def pcr_predict(model: PcrModel, source) -> np.ndarray:
    X = np.asarray(source, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.components.shape[1]:
        raise ValueError("source has the wrong number of columns")
    return model.target_mean + ((X - model.source_mean) @ model.components.T) @ model.regression


def low_rank_reconstruction(X, k: int) -> np.ndarray:
    """Projection of centred *X* onto its top-*k* principal directions, mean restored."""
    return pcr_predict(pcr_fit(X, X, k), X)


def self_supervised_rank_curve(x1, x2, k_range) -> list[tuple[int, float]]:
    """Rank-*k* denoising of each half scored against the other half.

    The two halves carry independent noise, so reconstructing ``x1`` from its
    top-*k* components and comparing with ``x2`` (and vice versa) is a
    self-supervised loss.  Returns ``(k, loss)`` with the loss the sum of both
    directions' per-entry mean squared errors.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise ValueError("halves must have the same shape")
    ks = [int(k) for k in k_range]
    if not ks or min(ks) < 1 or max(ks) > min(x1.shape):
        raise ValueError(f"ranks must lie in 1..{min(x1.shape)}")
    # one SVD per half serves every k
    parts = []
    for src, tgt in ((x1, x2), (x2, x1)):
        mu = src.mean(axis=0)
        u, s, vt = np.linalg.svd(src - mu, full_matrices=False)
        parts.append((u * s, vt, tgt - mu))
    out = []
    for k in ks:
        loss = sum(np.mean(((us[:, :k] @ vt[:k]) - resid) ** 2) for us, vt, resid in parts)
        out.append((k, float(loss)))
    return out


def bicv(x, k_range, row_folds: int = 2, col_split=None, seed: int = 0) -> list[tuple[int, float]]:
    """Bi-cross-validation of PCR rank.

    Rows are shuffled into *row_folds* folds and columns split into two
    blocks.  For each validation fold and each block direction, a rank-*k*
    PCR from one block to the other is fitted on the remaining rows and
    scored on the held-out ones.  The per-entry errors of both directions are
    summed and averaged over folds.
    """
    X = np.asarray(x, dtype=np.float64)
    n, p = X.shape
    if row_folds < 2:
        raise ValueError("row_folds must be >= 2")
    rng = np.random.default_rng(seed)
    if col_split is None:
        perm = rng.permutation(p)
        J1, J2 = np.sort(perm[: p // 2]), np.sort(perm[p // 2:])
    else:
        J1, J2 = (np.asarray(b, dtype=np.intp) for b in col_split)
    if J1.size == 0 or J2.size == 0:
        raise ValueError("both column blocks must be non-empty")
    folds = np.array_split(rng.permutation(n), row_folds)
    ks = [int(k) for k in k_range]
    kmax = max(ks)
    for f in folds:
        if n - f.size < kmax or min(J1.size, J2.size) < kmax:
            raise ValueError(f"k={kmax} exceeds the rows or columns available for training")
    out = []
    for k in ks:
        total = 0.0
        for f in folds:
            train = np.setdiff1d(np.arange(n), f)
            for a, b in ((J1, J2), (J2, J1)):
                model = pcr_fit(X[np.ix_(train, a)], X[np.ix_(train, b)], k)
                pred = pcr_predict(model, X[np.ix_(f, a)])
                total += np.mean((pred - X[np.ix_(f, b)]) ** 2)
        out.append((k, float(total / row_folds)))
    return out


def argmin_k(curve) -> int:
    """Rank with the smallest loss; ties go to the smaller rank."""
    return min(curve, key=lambda kl: (kl[1], kl[0]))[0]


# -- CSV ---------------------------------------------------------------------

class CsvFormatError(ValueError):
    pass


def read_matrix_csv(path, integer: bool = False):
    """Read a labelled matrix: header of column names, first column row labels."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2:
        raise CsvFormatError(f"{path}: header needs a label column and at least one data column")
    cols = header[1:]
    labels, data = [], []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
        labels.append(row[0])
        vals = []
        for j, cell in enumerate(row[1:]):
            try:
                v = int(cell) if integer else float(cell)
            except ValueError:
                raise CsvFormatError(f"{path}: row {i}, column {cols[j]!r}: bad value {cell!r}") from None
            if integer and v < 0:
                raise CsvFormatError(f"{path}: row {i}, column {cols[j]!r}: negative count")
            vals.append(v)
        data.append(vals)
    if not data:
        raise CsvFormatError(f"{path}: no data rows")
    arr = np.array(data, dtype=np.int64 if integer else np.float64)
    return arr, labels, cols


def read_counts_csv(path) -> CountMatrix:
    arr, cells, genes = read_matrix_csv(path, integer=True)
    return CountMatrix(arr, cells, genes)


def write_matrix_csv(path, values, rows, cols, index_name: str = "cell") -> None:
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([index_name, *cols])
        integer = np.issubdtype(values.dtype, np.integer)
        for label, vals in zip(rows, values):
            w.writerow([label, *(str(int(v)) if integer else repr(float(v)) for v in vals)])


def write_counts_csv(path, c: CountMatrix) -> None:
    write_matrix_csv(path, c.counts, c.cells, c.genes)


def write_curve_csv(path, curve, header=("k", "loss")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in curve:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_curve_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [tuple(int(v) if i == 0 and header[0] == "k" else float(v) for i, v in enumerate(row))
                for row in r if row]
    return header, rows


# -- simulations --------------------------------------------------------------

def simulate_low_rank_counts(n_cells: int = 500, n_genes: int = 200, rank: int = 10,
                             depth: float = 2000.0, seed: int = 0) -> tuple[CountMatrix, np.ndarray]:
    """Poisson counts around non-negative rank-*rank* rates.

    Cell loadings are Gamma, gene programs sparse exponential; each cell's
    rates are scaled to an expected *depth* molecules.  Returns the counts
    and the rate matrix.
    """
    rng = np.random.default_rng(seed)
    W = rng.gamma(0.6, 1.0, size=(n_cells, rank))
    H = rng.exponential(1.0, size=(rank, n_genes)) * (rng.random((rank, n_genes)) < 0.3)
    H += 1e-3
    rates = W @ H
    rates *= depth / rates.sum(axis=1, keepdims=True)
    return CountMatrix(rng.poisson(rates)), rates


def simulate_low_rank_gaussian(n: int = 200, p: int = 100, rank: int = 5, strength: float = 1.0,
                               noise: float = 1.0, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Low-rank signal plus i.i.d. Gaussian noise.

    The signal's singular values are spaced between 1x and 2x ``strength``
    times the noise bulk edge ``noise * (sqrt(n) + sqrt(p))``.
    """
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, rank)))
    V, _ = np.linalg.qr(rng.standard_normal((p, rank)))
    edge = noise * (np.sqrt(n) + np.sqrt(p))
    s = strength * edge * np.linspace(2.0, 1.0, rank)
    signal = (U * s) @ V.T
    return signal + noise * rng.standard_normal((n, p)), signal
