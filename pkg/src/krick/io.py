"""Deterministic CSV/JSON writers shared by the CLI and the test harness."""

import dataclasses
import json
import os


def fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return "%.17g" % x
    if isinstance(x, complex):
        raise TypeError("split complex values into _re/_im columns")
    return str(x)


def write_csv(path, header, rows):
    """rows: iterable of sequences aligned with header."""
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) for v in row) + "\n")


def rows_from_dataclasses(items, fields=None):
    if not items:
        return [], []
    fields = fields or [f.name for f in dataclasses.fields(items[0])]
    header = []
    for name in fields:
        v = getattr(items[0], name)
        if isinstance(v, complex):
            header += [f"{name}_re", f"{name}_im"]
        else:
            header.append(name)
    rows = []
    for it in items:
        row = []
        for name in fields:
            v = getattr(it, name)
            if isinstance(v, complex):
                row += [v.real, v.imag]
            else:
                row.append(v)
        rows.append(row)
    return header, rows


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=_default)
        f.write("\n")


def _default(obj):
    import numpy as np
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
