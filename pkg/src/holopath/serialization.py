"""CSV and JSON round-tripping of kernels, amplitudes, spectra and cell bases.

CSV files start with one ``#`` header line of ``key=value`` pairs followed by
the matrix, row-major. Floats are written with ``repr`` so reading back is
exact; complex entries use Python's ``(re+imj)`` literal form.
"""

import csv
import io
import json

import numpy as np

from .spectral import Amplitude, Kernel, SpatialGrid, SpectralDecomposition, _frozen
from .superselection import PlanckCellBasis, build_planck_basis


def _grid_meta(grid):
    return {
        "N": grid.points_per_axis,
        "extent": grid.extent,
        "dims": grid.dims,
        "boundary": grid.boundary,
        "dq": grid.spacing,
    }


def _grid_from_meta(meta):
    return SpatialGrid(int(meta["N"]), float(meta["extent"]), int(meta["dims"]), meta["boundary"])


def _format(x):
    if isinstance(x, (complex, np.complexfloating)):
        return repr(complex(x))
    return repr(float(x))


def _parse_value(text):
    text = text.strip()
    if text.endswith("j") or text.endswith("j)"):
        return complex(text)
    return float(text)


def _parse_meta_value(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def write_matrix_csv(target, matrix, metadata):
    """Write ``matrix`` with a ``# key=value,...`` header to a path or file object."""
    matrix = np.atleast_2d(np.asarray(matrix))
    header = "# " + ",".join(f"{k}={_format(v) if isinstance(v, float) else v}" for k, v in metadata.items())
    lines = [header]
    lines.extend(",".join(_format(x) for x in row) for row in matrix)
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)


def read_matrix_csv(source):
    """Inverse of :func:`write_matrix_csv`; returns ``(matrix, metadata)``."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing '# key=value' header line")
    metadata = {}
    for item in lines[0][1:].strip().split(","):
        if item:
            key, _, value = item.partition("=")
            metadata[key.strip()] = _parse_meta_value(value.strip())
    rows = [[_parse_value(x) for x in line.split(",")] for line in lines[1:] if line.strip()]
    return np.array(rows), metadata


def kernel_to_csv(target, kernel):
    meta = _grid_meta(kernel.grid)
    if isinstance(kernel, Amplitude):
        meta.update(kind="amplitude", delta_t=kernel.delta_t)
    else:
        meta.update(kind="kernel", delta_tau=kernel.delta_tau)
    write_matrix_csv(target, kernel.matrix, meta)


def kernel_from_csv(source):
    matrix, meta = read_matrix_csv(source)
    grid = _grid_from_meta(meta)
    if meta.get("kind") == "amplitude":
        return Amplitude(float(meta["delta_t"]), _frozen(matrix.astype(complex)), grid)
    return Kernel(float(meta["delta_tau"]), _frozen(matrix.astype(float)), grid)


def spectrum_to_csv(target, spec):
    """Row n holds ``E_n`` followed by ``phi_n`` at every grid point."""
    meta = _grid_meta(spec.grid)
    meta.update(kind="spectrum", hbar=spec.hbar)
    table = np.column_stack([spec.eigenvalues, spec.eigenvectors.T])
    write_matrix_csv(target, table, meta)


def spectrum_from_csv(source):
    table, meta = read_matrix_csv(source)
    grid = _grid_from_meta(meta)
    return SpectralDecomposition(
        _frozen(table[:, 0].real.astype(float)),
        _frozen(table[:, 1:].T.copy()),
        grid,
        float(meta["hbar"]),
    )


def _encode_array(a):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return [[float(z.real), float(z.imag)] for z in a.ravel()]
    return [float(x) for x in a.ravel()]


def _decode_array(data, shape, complex_):
    arr = np.asarray(data, dtype=float)
    if complex_:
        arr = arr[:, 0] + 1j * arr[:, 1]
    return arr.reshape(shape)


def to_dict(obj):
    """JSON-ready dict (metadata + flat row-major arrays) for package objects."""
    if isinstance(obj, (Kernel, Amplitude)):
        meta = _grid_meta(obj.grid)
        if isinstance(obj, Amplitude):
            meta.update(kind="amplitude", delta_t=obj.delta_t)
        else:
            meta.update(kind="kernel", delta_tau=obj.delta_tau)
        return {
            "metadata": meta,
            "shape": list(obj.matrix.shape),
            "complex": bool(np.iscomplexobj(obj.matrix)),
            "data": _encode_array(obj.matrix),
        }
    if isinstance(obj, SpectralDecomposition):
        meta = _grid_meta(obj.grid)
        meta.update(kind="spectrum", hbar=obj.hbar)
        return {
            "metadata": meta,
            "eigenvalues": _encode_array(obj.eigenvalues),
            "shape": list(obj.eigenvectors.shape),
            "complex": bool(np.iscomplexobj(obj.eigenvectors)),
            "data": _encode_array(obj.eigenvectors),
        }
    if isinstance(obj, PlanckCellBasis):
        return {
            "metadata": {
                "kind": "planck_basis",
                "n": obj.n,
                "s_q": obj.s_q,
                "hbar": obj.hbar,
                "delta_q": obj.delta_q,
                "cell_width_q": obj.cell_width_q,
                "cell_width_p": obj.cell_width_p,
            },
            "labels": [list(label) for label in obj.labels],
            "shape": list(obj.vectors.shape),
            "complex": True,
            "data": _encode_array(obj.vectors),
        }
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_dict(data):
    meta = data["metadata"]
    kind = meta["kind"]
    if kind == "planck_basis":
        return build_planck_basis(meta["n"], meta["s_q"], meta["hbar"], meta["delta_q"])
    grid = _grid_from_meta(meta)
    matrix = _decode_array(data["data"], data["shape"], data["complex"])
    if kind == "kernel":
        return Kernel(float(meta["delta_tau"]), _frozen(matrix), grid)
    if kind == "amplitude":
        return Amplitude(float(meta["delta_t"]), _frozen(matrix), grid)
    if kind == "spectrum":
        E = np.asarray(data["eigenvalues"], dtype=float)
        return SpectralDecomposition(_frozen(E), _frozen(matrix), grid, float(meta["hbar"]))
    raise ValueError(f"unknown object kind {kind!r}")


def dumps(obj, **kwargs):
    return json.dumps(to_dict(obj), **kwargs)


def loads(text):
    return from_dict(json.loads(text))


def mixture_to_dict(probabilities, basis):
    return {
        "metadata": {"kind": "phase_space_mixture", "n": basis.n, "s_q": basis.s_q},
        "cells": [
            {"label": list(label), "probability": float(p)}
            for label, p in zip(basis.labels, probabilities)
        ],
    }


def write_table_csv(target, rows, fieldnames):
    """Plain CSV table (used for reports); floats use ``repr`` for exactness."""

    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        return v

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: fmt(row.get(k, "")) for k in fieldnames})
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)
