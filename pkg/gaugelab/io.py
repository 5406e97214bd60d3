import json
import os
import tempfile

import numpy as np

from .config import ExperimentConfig, merge_dicts
from .errors import ConfigInvalid
from .packet import MomentumPacket


def _read_config_tree(path, seen):
    path = os.path.abspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"File not found: {path}")
    if path in seen:
        raise ConfigInvalid("include", f"circular include of {path}")
    with open(path, 'r', encoding='utf-8') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid("<root>", f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid("<root>", f"{path} does not hold a JSON object")

    merged = {}
    includes = data.pop("include", [])
    if isinstance(includes, str):
        includes = [includes]
    for include in includes:
        target = os.path.join(os.path.dirname(path), include)
        merged = merge_dicts(merged, _read_config_tree(target, seen | {path}))
    return merge_dicts(merged, data)


def load_config(path):
    """
    Load an experiment config file.

    Files listed under "include" are read first, depth first and relative to
    the including file; keys of the including file win.

    Args:
        path (str): Path to the JSON config.

    Returns:
        ExperimentConfig: The resolved configuration.
    """
    return ExperimentConfig.from_dict(_read_config_tree(path, frozenset()))


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def save_json(record, path):
    """
    Save a result record as canonical JSON (sorted keys, fixed indent), so
    identical records give identical bytes.

    Args:
        record (dict): JSON-compatible record.
        path (str): Destination file.
    """
    _atomic_write(path, json.dumps(record, indent=2, sort_keys=True, allow_nan=False) + "\n")


def save_columns(columns, path):
    """
    Save equal-length series as tab-separated columns with a header line.
    Values are written with 17 significant digits.

    Args:
        columns (dict): Column name -> sequence of numbers.
        path (str): Destination file.
    """
    names = list(columns)
    lengths = {len(columns[name]) for name in names}
    if len(lengths) > 1:
        raise ValueError(f"columns have different lengths: {sorted(lengths)}")
    rows = ["\t".join(names)]
    for i in range(lengths.pop() if lengths else 0):
        rows.append("\t".join(format(float(columns[name][i]), ".17g") for name in names))
    _atomic_write(path, "\n".join(rows) + "\n")


def load_columns(path):
    """
    Load a file written by save_columns (or any tab/whitespace separated
    table with a header line).

    Returns:
        dict: Column name -> numpy array.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"File not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        header = f.readline().split()
        table = np.loadtxt(f, ndmin=2)
    if table.size and table.shape[1] != len(header):
        raise ValueError(f"{path}: header names {len(header)} columns, rows have {table.shape[1]}")
    return {name: table[:, j] if table.size else np.zeros(0) for j, name in enumerate(header)}


def save_amplitudes(packet, path):
    """Write k components, Re alpha and Im alpha per node in C order."""
    columns = {f"k{i + 1}": packet.grid.k_vectors[i].ravel() for i in range(packet.grid.dim)}
    columns["re_alpha"] = packet.alpha.real.ravel()
    columns["im_alpha"] = packet.alpha.imag.ravel()
    save_columns(columns, path)


def load_amplitudes(path, grid, constants):
    """
    Read amplitudes saved by save_amplitudes onto `grid`.

    The k columns must match the grid nodes; the amplitudes must already be
    normalized.
    """
    columns = load_columns(path)
    for i in range(grid.dim):
        k = columns.get(f"k{i + 1}")
        if k is None or k.size != grid.size or not np.allclose(k, grid.k_vectors[i].ravel(), atol=1e-12):
            raise ValueError(f"{path}: k{i + 1} column does not match the configured grid")
    alpha = (columns["re_alpha"] + 1j * columns["im_alpha"]).reshape(grid.shape)
    return MomentumPacket(grid, alpha, constants)


PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Plot {title} from {data}. Generated by gaugelab."""
import os

import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "{data}")) as f:
    names = f.readline().split()
table = np.loadtxt(os.path.join(here, "{data}"), skiprows=1, ndmin=2)
columns = dict(zip(names, table.T))

fig, ax = plt.subplots()
for name in {series!r}:
    if name in columns:
        ax.plot(columns["{x}"], columns[name], label=name)
ax.set_xlabel("{x}")
ax.set_yscale("{yscale}")
ax.set_title("{title}")
ax.legend()
fig.savefig(os.path.join(here, "{image}"), dpi=150)
'''


def write_plot_script(path, data_file, x, series, title, yscale="linear"):
    """Standalone matplotlib script that plots `series` against `x` from a columnar file."""
    image = os.path.splitext(os.path.basename(path))[0] + ".png"
    _atomic_write(path, PLOT_TEMPLATE.format(title=title, data=os.path.basename(data_file), x=x,
                                            series=list(series), yscale=yscale, image=image))


def save_text(text, path):
    _atomic_write(path, text)
