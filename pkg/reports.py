"""
JSON reports and CSV plot data written by the command line
A report embeds the resolved config and seed so a run can be repeated.
"""

import csv
import datetime
import json
import logging
import sys
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _to_builtin(value):
    """json.dump fallback for numpy scalars, arrays and complex numbers"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {'real': float(value.real), 'imag': float(value.imag)}
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def build_report(command: str, config: Dict, seed: Optional[int], result: Dict,
                 generated_at: Optional[str] = None) -> Dict:
    if generated_at is None:
        generated_at = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec='seconds')
    return {
        'schema_version': SCHEMA_VERSION,
        'command': command,
        'config': config,
        'seed': seed,
        'result': result,
        'generated_at': generated_at,
    }


def dumps(report: Dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_to_builtin)


def write_report(report: Dict, path: Optional[str] = None):
    """Write to `path`, or to stdout when no path is given"""
    text = dumps(report)
    if path is None:
        sys.stdout.write(text + '\n')
        return
    with open(path, 'w') as f:
        f.write(text + '\n')
    logger.info("Wrote report: %s", path)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow([repr(float(item)) if isinstance(item, (float, np.floating)) else item
                             for item in row])
            count += 1
    logger.info("Wrote plot data: %s (%d rows)", path, count)
