"""
Postselected photon counts, the interchange format between the shot simulator
and the analyses. A table is stored as a CSV (input, setting, outcome, count)
plus a sidecar JSON carrying invocations per cell and the producing config.

Labels:
    input    polarization labels, control first, e.g. 'HD' or 'DDD'
    setting  comma-joined per-photon analysis tokens, e.g. 'HV,DA';
             a '~' prefix marks a target read after the GHZ target rotation
    outcome  one '+' or '-' per detected photon, control first
"""

import csv
import json
import logging
import os
from typing import Dict, Iterator, List, Optional, Tuple

from errors import ConfigError, MissingSettingError, ValidationError

logger = logging.getLogger(__name__)

Cell = Tuple[str, str]

OUTCOME_SYMBOLS = ('+', '-')


def split_setting(setting: str) -> List[str]:
    return setting.split(',')


def join_setting(tokens) -> str:
    return ','.join(tokens)


def outcome_parity(outcome: str) -> int:
    """Product of +1 / -1 over the photons of an outcome string"""
    parity = 1
    for symbol in outcome:
        if symbol not in OUTCOME_SYMBOLS:
            raise ValidationError(f"bad outcome symbol {symbol!r} in {outcome!r}")
        if symbol == '-':
            parity = -parity
    return parity


class CountsTable:
    """Counts of postselected detection events per (input, setting) cell"""

    def __init__(self, metadata: Optional[Dict] = None):
        self.counts: Dict[Cell, Dict[str, int]] = {}
        self.invocations: Dict[Cell, int] = {}
        self.metadata: Dict = dict(metadata or {})

    def add(self, input_label: str, setting: str, outcome: str, count: int = 1):
        if count < 0:
            raise ValidationError("counts must be non-negative")
        cell = self.counts.setdefault((input_label, setting), {})
        cell[outcome] = cell.get(outcome, 0) + int(count)

    def add_invocations(self, input_label: str, setting: str, invocations: int):
        key = (input_label, setting)
        self.invocations[key] = self.invocations.get(key, 0) + int(invocations)
        self.counts.setdefault(key, {})

    def merge(self, other: 'CountsTable') -> 'CountsTable':
        """Sum of two tables; associative and commutative"""
        merged = CountsTable(self.metadata)
        for table in (self, other):
            for (input_label, setting), outcomes in table.counts.items():
                merged.counts.setdefault((input_label, setting), {})
                for outcome, count in outcomes.items():
                    merged.add(input_label, setting, outcome, count)
            for (input_label, setting), invocations in table.invocations.items():
                merged.add_invocations(input_label, setting, invocations)
        return merged

    def cells(self) -> List[Cell]:
        return sorted(self.counts)

    def inputs(self) -> List[str]:
        return sorted({input_label for input_label, _ in self.counts})

    def settings(self, input_label: str) -> List[str]:
        return sorted(setting for label, setting in self.counts if label == input_label)

    def has_cell(self, input_label: str, setting: str) -> bool:
        return (input_label, setting) in self.counts

    def outcomes(self, input_label: str, setting: str) -> Dict[str, int]:
        try:
            return dict(self.counts[(input_label, setting)])
        except KeyError:
            raise MissingSettingError(f"no counts for input {input_label!r}, setting {setting!r}")

    def total(self, input_label: str, setting: str) -> int:
        return sum(self.outcomes(input_label, setting).values())

    def invocations_for(self, input_label: str, setting: str) -> int:
        return self.invocations.get((input_label, setting), 0)

    def rows(self) -> Iterator[Tuple[str, str, str, int]]:
        for input_label, setting in self.cells():
            for outcome in sorted(self.counts[(input_label, setting)]):
                yield input_label, setting, outcome, self.counts[(input_label, setting)][outcome]

    def save(self, csv_path: str):
        """Write the CSV and its sidecar JSON (same path with .json)"""
        with open(csv_path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['input', 'setting', 'outcome', 'count'])
            for row in self.rows():
                writer.writerow(row)

        sidecar = {
            'invocations': [
                {'input': label, 'setting': setting, 'invocations': self.invocations[(label, setting)]}
                for label, setting in sorted(self.invocations)
            ],
            'metadata': self.metadata,
        }
        with open(sidecar_path(csv_path), 'w') as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
        logger.info("Saved counts table: %s (%d cells)", csv_path, len(self.counts))

    @classmethod
    def load(cls, csv_path: str) -> 'CountsTable':
        if not os.path.exists(csv_path):
            raise ConfigError(f"counts file '{csv_path}' not found")
        table = cls()
        with open(csv_path, 'r', newline='') as f:
            reader = csv.DictReader(f)
            for row in reader:
                table.add(row['input'], row['setting'], row['outcome'], int(row['count']))

        sidecar = sidecar_path(csv_path)
        if os.path.exists(sidecar):
            with open(sidecar, 'r') as f:
                data = json.load(f)
            for entry in data.get('invocations', []):
                table.add_invocations(entry['input'], entry['setting'], entry['invocations'])
            table.metadata = data.get('metadata', {})
        else:
            logger.warning("No sidecar for %s: invocations unknown", csv_path)
        logger.info("Loaded counts table: %s (%d cells)", csv_path, len(table.counts))
        return table


def sidecar_path(csv_path: str) -> str:
    root, _ = os.path.splitext(csv_path)
    return root + '.json'
