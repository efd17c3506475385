"""
Tabular results written as CSV with a '#' provenance header.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy

import tripling
from tripling.utils import make_dir

logger = logging.getLogger(__name__)

FORMAT = '%.12g'


@dataclass(frozen=True)
class Dataset:
    name: str
    columns: Sequence[str]
    rows: np.ndarray
    units: str = 'scaled units'
    provenance: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        rows = np.atleast_2d(rows) if rows.size else np.zeros((0, len(self.columns)))
        if rows.ndim != 2 or rows.shape[1] != len(self.columns):
            raise ValueError(f"dataset {self.name}: rows of shape {rows.shape} do not match "
                             f"{len(self.columns)} columns")
        object.__setattr__(self, 'rows', rows)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, list(self.columns).index(name)]


def provenance(command: str, config: Optional[Dict[str, object]] = None) -> Dict[str, object]:
    """Everything needed to re-run a dataset: versions, command and configuration."""
    header = {'tripling': tripling.__version__,
              'numpy': np.__version__,
              'scipy': scipy.__version__,
              'command': command}
    for key, value in sorted((config or {}).items()):
        header[key] = ','.join(repr(float(v)) for v in value) if isinstance(value, (list, tuple)) else value
    return header


def header_lines(ds: Dataset) -> List[str]:
    lines = [f"{key}={value}" for key, value in ds.provenance.items()]
    lines.append(f"units: {ds.units}")
    lines.append(','.join(ds.columns))
    return lines


def write_csv(ds: Dataset, out_dir: str) -> str:
    path = os.path.join(make_dir(out_dir), f"{ds.name}.csv")
    np.savetxt(path, ds.rows, fmt=FORMAT, delimiter=',', header='\n'.join(header_lines(ds)), comments='# ')
    logger.info(f"wrote {len(ds.rows)} rows to {path}")
    return path


def read_csv(path: str) -> Dataset:
    """Inverse of write_csv()."""
    info = {}
    lines = []
    with open(path) as fh:
        for line in fh:
            if not line.startswith('#'):
                break
            lines.append(line[2:].rstrip('\n'))
    for line in lines[:-2]:
        key, _, value = line.partition('=')
        info[key] = value
    units = lines[-2][len('units: '):] if len(lines) >= 2 else ''
    columns = lines[-1].split(',') if lines else []
    rows = np.loadtxt(path, delimiter=',', comments='#', ndmin=2)
    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(name=name, columns=columns, rows=rows, units=units, provenance=info)
