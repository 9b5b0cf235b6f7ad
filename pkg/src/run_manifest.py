"""
Run Manifest
Records everything needed to replay an experiment and writes CSV outputs
"""

import csv
import json
import logging
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy

from src import __version__

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA = 1


def component_versions() -> Dict[str, str]:
    return {
        'qite_toolkit': __version__,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'python': platform.python_version(),
    }


def write_csv(path: Path, rows: Sequence[Dict], fieldnames: Optional[List[str]] = None) -> Path:
    """
    Write rows to CSV with a stable column order

    Args:
        path: Output file
        rows: Dict rows
        fieldnames: Column order (keys of the first row by default)

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format(row.get(k)) for k in fieldnames})
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def _format(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


@dataclass
class RunManifest:
    """Config snapshot, seed, versions, outputs and timing of one run"""

    experiment: str
    config: Dict
    seed: int
    preset: Optional[str] = None
    versions: Dict[str, str] = field(default_factory=component_versions)
    outputs: List[str] = field(default_factory=list)
    rc_plans: List[Dict] = field(default_factory=list)
    started_at: str = field(default_factory=lambda: datetime.now().isoformat())
    finished_at: Optional[str] = None
    elapsed_seconds: Optional[float] = None
    manifest_schema: int = MANIFEST_SCHEMA

    def add_output(self, path: Path):
        self.outputs.append(str(path))

    def add_rc_plan(self, task: Dict, plan: Dict):
        """
        Record one randomized-compiling plan

        Args:
            task: Keys locating the plan in the run (unitary, setting, ...)
            plan: RcPlan.to_dict() output with the full twirl list
        """
        self.rc_plans.append({'task': dict(task), **plan})

    def find_rc_plan(self, **task) -> Optional[Dict]:
        for entry in self.rc_plans:
            if entry['task'] == task:
                return entry
        return None

    def finish(self, elapsed_seconds: float):
        self.finished_at = datetime.now().isoformat()
        self.elapsed_seconds = round(elapsed_seconds, 3)

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(path, 'w') as f:
                json.dump(asdict(self), f, indent=2, default=str)
        except IOError as e:
            logger.error(f"Error saving run manifest: {e}")
            raise
        return path

    @classmethod
    def load(cls, path: Path) -> 'RunManifest':
        with open(path, 'r') as f:
            data = json.load(f)
        if data.get('manifest_schema') != MANIFEST_SCHEMA:
            raise ValueError(f"Unsupported manifest schema {data.get('manifest_schema')} in {path}")
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)
