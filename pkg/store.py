"""Flat-file persistence: model, sample, pair and result files (JSON and CSV)."""
import csv
import io
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from marshmallow import ValidationError

from models.mixture import FamilyId, MixtureModel
from models.schemas import HardInstanceFileSchema, MixtureModelSchema

logger = logging.getLogger(__name__)


def _default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=False, default=_default)


def read_json(path: str) -> Any:
    with open(path, 'r', encoding='utf-8') as handle:
        return json.load(handle)


def write_text(path: Optional[str], text: str):
    """Write to ``path``, or to stdout when no path is given."""
    if not path:
        print(text)
        return
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(text if text.endswith('\n') else text + '\n')
    logger.info(f"Wrote {path}")


def write_json(path: Optional[str], payload: Any):
    write_text(path, dumps(payload))


def load_model(path: str, pair_side: str = 'p') -> MixtureModel:
    """
    Read a mixture model file.

    Hard-instance pair files are accepted too: side ``p`` or ``q`` becomes a
    one-dimensional Gaussian mixture.

    Raises:
        ValidationError: the file is neither a model nor a pair file
    """
    data = read_json(path)
    if isinstance(data, dict) and isinstance(data.get('model'), dict):
        # output of the generate command
        data = data['model']
    if isinstance(data, dict) and 'mu_p' in data:
        pair = HardInstanceFileSchema().load(data)
        points = pair['mu_p'] if pair_side == 'p' else pair['mu_q']
        logger.debug(f"Loaded side {pair_side} of hard-instance pair {path} ({len(points)} points)")
        return MixtureModel(FamilyId.GAUSSIAN, np.asarray(points, dtype=float).reshape(-1, 1))
    return MixtureModelSchema().load(data)


def save_model(path: Optional[str], model: MixtureModel):
    write_json(path, model.to_dict())


def load_samples(path: str) -> np.ndarray:
    """Samples from a CSV (one row per sample, optional header) or a JSON list of rows."""
    if path.endswith('.json'):
        data = read_json(path)
        if isinstance(data, dict):
            data = data.get('samples')
        if data is None:
            raise ValidationError(f"{path} holds no 'samples' array", 'samples')
        return np.atleast_2d(np.asarray(data, dtype=float).T).T
    with open(path, 'r', encoding='utf-8') as handle:
        first = handle.readline()
    skip = 0 if _is_numeric_row(first) else 1
    arr = np.loadtxt(path, delimiter=',', skiprows=skip, ndmin=2)
    logger.debug(f"Loaded {arr.shape[0]} samples of dimension {arr.shape[1]} from {path}")
    return arr


def _is_numeric_row(line: str) -> bool:
    try:
        [float(cell) for cell in line.strip().split(',') if cell]
        return True
    except ValueError:
        return False


def samples_csv(samples: np.ndarray, header: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in np.atleast_2d(samples):
        writer.writerow([repr(float(v)) for v in row])
    return buffer.getvalue()


def rows_csv(rows: Iterable[Dict[str, Any]], fieldnames: List[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator='\n', extrasaction='ignore')
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ('' if row.get(k) is None else row.get(k)) for k in fieldnames})
    return buffer.getvalue()
