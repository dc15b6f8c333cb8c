"""Plain-text matrix and vector files.

Line 1 holds the dimension ``d``.  A matrix file then has ``d`` lines of ``d``
whitespace-separated complex entries; a vector file has ``d`` lines with one
entry each.  Entries are written as ``re+imj`` with 17 significant digits,
which round-trips IEEE doubles exactly.
"""

from pathlib import Path

import numpy as np

from .errors import ParseError


def format_complex(z):
    z = complex(z)
    return f"{z.real:.17g}{z.imag:+.17g}j"


def _parse_entry(tok, path, lineno):
    try:
        return complex(tok)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: cannot parse complex entry {tok!r}") from None


def _read_lines(path):
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    try:
        d = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"{path}:1: expected dimension, got {lines[0]!r}") from None
    if d < 1:
        raise ParseError(f"{path}:1: dimension must be positive, got {d}")
    return d, lines[1:]


def write_matrix(path, M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    rows = [" ".join(format_complex(z) for z in row) for row in M]
    Path(path).write_text("\n".join([str(M.shape[0]), *rows]) + "\n")


def read_matrix(path):
    d, body = _read_lines(path)
    if len(body) != d:
        raise ParseError(f"{path}: expected {d} rows, found {len(body)}")
    M = np.empty((d, d), dtype=complex)
    for i, line in enumerate(body):
        toks = line.split()
        if len(toks) != d:
            raise ParseError(f"{path}:{i + 2}: expected {d} entries, found {len(toks)}")
        M[i] = [_parse_entry(t, path, i + 2) for t in toks]
    return M


def write_vector(path, v):
    v = np.asarray(v).reshape(-1)
    Path(path).write_text("\n".join([str(v.shape[0]), *map(format_complex, v)]) + "\n")


def read_vector(path):
    d, body = _read_lines(path)
    if len(body) != d:
        raise ParseError(f"{path}: expected {d} entries, found {len(body)}")
    out = np.empty(d, dtype=complex)
    for i, line in enumerate(body):
        toks = line.split()
        if len(toks) != 1:
            raise ParseError(f"{path}:{i + 2}: expected one entry per line")
        out[i] = _parse_entry(toks[0], path, i + 2)
    return out
