"""
Experiment reports and their JSON outputs
"""
import glob
import json
import logging
import math
import os
from dataclasses import dataclass, field, asdict, replace
from typing import Any, Dict, List, Optional

import numpy as np

from utils.error_handlers import OutputError

logger = logging.getLogger(__name__)

SUMMARY_NAME = 'summary.json'


def _plain(value: Any) -> Any:
    """Convert numpy scalars and non-finite floats into JSON-safe values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return value


@dataclass(frozen=True)
class ExperimentReport:
    """Structured record of one claim verification; passed follows from the numbers"""
    claim: str
    anchor: str
    fitted: Dict[str, Any]
    floor: Optional[float]
    tolerance: Optional[float]
    passed: bool
    runtime: float = 0.0
    deviations: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    config_hash: str = ''

    def with_hash(self, config_hash: str) -> 'ExperimentReport':
        return replace(self, config_hash=config_hash)

    def to_dict(self) -> Dict[str, Any]:
        data = _plain(asdict(self))
        data['pass'] = bool(self.passed)
        return data

    def write_json(self, path: str) -> None:
        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, 'w', encoding='utf-8') as handle:
                json.dump(self.to_dict(), handle, indent=2, ensure_ascii=False)
        except OSError as e:
            raise OutputError(f"Cannot write report {path}: {str(e)}") from e
        logger.info(f"Report '{self.claim}' written to {path} (pass={self.passed})")


def write_json(data: Dict[str, Any], path: str) -> None:
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(_plain(data), handle, indent=2, ensure_ascii=False)
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {str(e)}") from e


def summarize(out_dir: str) -> Dict[str, Any]:
    """
    Merge every report JSON under out_dir into summary.json

    Args:
        out_dir: Output directory of earlier runs

    Returns:
        Summary dictionary with per-report pass flags and the overall flag
    """
    paths = sorted(
        p for p in glob.glob(os.path.join(out_dir, '**', '*.json'), recursive=True)
        if os.path.basename(p) not in (SUMMARY_NAME, 'manifest.json')
    )
    reports = []
    for path in paths:
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                data = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            raise OutputError(f"Cannot read report {path}: {str(e)}") from e
        if 'claim' not in data or 'pass' not in data:
            logger.debug(f"Skipping non-report JSON {path}")
            continue
        reports.append({'path': os.path.relpath(path, out_dir), 'claim': data['claim'], 'pass': bool(data['pass'])})

    summary = {
        'reports': reports,
        'count': len(reports),
        'failed': [r['path'] for r in reports if not r['pass']],
        'pass': bool(reports) and all(r['pass'] for r in reports),
    }
    write_json(summary, os.path.join(out_dir, SUMMARY_NAME))
    logger.info(f"Summarized {len(reports)} report(s) in {out_dir}: pass={summary['pass']}")
    return summary
