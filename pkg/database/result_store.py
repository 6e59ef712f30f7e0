"""
Result store for the scheduling simulator.
Reads and writes instances, runs, verification reports, adversary transcripts
and experiment tables as JSON and CSV files.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import pandas as pd

from model.instance_model import Instance, ScheduleTrace, parse_instance
from utils.errors import InstanceError
from utils.helpers import load_from_csv, load_json, save_json, save_to_csv

RESULT_COLUMNS = [
    'instance_id', 'engine', 'eps', 'alpha', 'n', 'm', 'alg_cost', 'dual_lb', 'opt',
    'ratio_vs_opt', 'ratio_vs_duallb', 'rejected_frac', 'runtime_ms',
]

ADVERSARY_COLUMNS = [
    'adversary', 'engine', 'eps', 'alpha', 'L', 'jobs', 'alg_cost', 'adversary_cost', 'ratio',
]


class ResultStore:
    """
    File-backed store rooted at the configured output directory.

    Relative paths are resolved against the root; absolute paths are used as given.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None, root: Optional[str] = None):
        """
        Initialize result store.

        Args:
            config: System configuration (uses output.directory)
            root: Explicit root directory, overriding the config
        """
        config = config or {}
        self.root = Path(root or config.get('output', {}).get('directory', 'results'))
        self.logger = logging.getLogger(__name__)

    def path(self, name: str) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.root / path

    def save_instance(self, instance: Instance, name: str) -> Path:
        target = self.path(name)
        save_json(instance.to_dict(), str(target))
        self.logger.debug(f"Saved instance with {instance.n} jobs to {target}")
        return target

    def load_instance(self, name: str) -> Instance:
        """
        Load an instance file.

        Raises:
            InstanceError: If the file cannot be read or parsed
        """
        target = self.path(name)
        try:
            text = target.read_text(encoding='utf-8')
        except OSError as e:
            raise InstanceError(f"cannot read instance file {target}: {e}") from e
        return parse_instance(text)

    def save_run(self, payload: Dict[str, Any], name: str) -> Path:
        """Save a run document: engine parameters, instance, trace and dual summary."""
        target = self.path(name)
        save_json(payload, str(target))
        self.logger.info(f"Saved run to {target}")
        return target

    def load_run(self, name: str) -> Dict[str, Any]:
        target = self.path(name)
        try:
            data = load_json(str(target))
        except (OSError, ValueError) as e:
            raise InstanceError(f"cannot read run file {target}: {e}") from e
        if not isinstance(data, dict) or 'instance' not in data or 'trace' not in data:
            raise InstanceError(f"run file {target} lacks instance or trace")
        return data

    @staticmethod
    def trace_of(run: Dict[str, Any]) -> ScheduleTrace:
        return ScheduleTrace.from_dict(run['trace'])

    def save_document(self, data: Dict[str, Any], name: str) -> Path:
        """Save a report or transcript document."""
        target = self.path(name)
        save_json(data, str(target))
        return target

    def save_table(self, rows: Iterable[Dict[str, Any]], name: str,
                   columns: Sequence[str] = RESULT_COLUMNS) -> Path:
        """Write rows as CSV with a fixed column order."""
        target = self.path(name)
        frame = pd.DataFrame(list(rows), columns=list(columns))
        save_to_csv(frame, str(target), columns=columns)
        self.logger.info(f"Saved {len(frame)} rows to {target}")
        return target

    def load_table(self, name: str) -> pd.DataFrame:
        return load_from_csv(str(self.path(name)))

    def save_trace_csv(self, trace: ScheduleTrace, name: str) -> Path:
        target = self.path(name)
        save_to_csv(trace.to_frame(), str(target))
        return target

    def list_instances(self, directory: str = '.') -> List[Path]:
        return sorted(self.path(directory).glob('*.json'))
