"""
Configuration loading for besovflow experiments
"""
import configparser
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, asdict, fields, replace
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from utils.error_handlers import OutputError

load_dotenv()

logger = logging.getLogger(__name__)

CLAIMS = (
    'molli', 'interp-ineq', 'kfun-bilinear', 'kfun-trilinear',
    'pressure-double', 'time-reg', 'dtp-identity', 'besov-equiv',
)

# Config file section each key is read from; other keys are ignored.
SECTIONS = {
    'experiment': ('claim', 'time_claim', 'theta', 'gamma', 'beta', 'epsilon',
                   'r', 's', 'corpus_size', 'seed', 'project', 'out'),
    'grid': ('grid', 'period', 'dt', 't_end', 'stride'),
    'field': ('kind', 'jmax', 'amplitude', 'kernel', 'divergence_free'),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Immutable parameter set for one experiment run"""
    claim: str = 'molli'
    time_claim: str = 'iii'
    grid: str = '256x256'
    period: float = 1.0
    kind: str = 'lacunary'
    jmax: Optional[int] = None
    amplitude: float = 1.0
    divergence_free: bool = True
    kernel: str = 'gaussian_truncated'
    theta: float = 0.5
    gamma: float = 0.3
    beta: float = 0.0
    epsilon: float = 0.0
    r: float = 2.0
    s: float = math.inf
    corpus_size: int = 10
    seed: int = 0
    project: bool = False
    dt: float = 1e-3
    t_end: float = 0.1
    stride: int = 1
    out: str = os.getenv('BESOVFLOW_OUT', 'results')

    def config_hash(self) -> str:
        """Short SHA-256 of the canonical JSON form of this config"""
        payload = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:12]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, float) and math.isinf(value):
                data[key] = 'inf'
        return data

    def with_overrides(self, **overrides: Any) -> 'ExperimentConfig':
        """Return a copy with the non-None overrides applied"""
        present = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **present)


def _coerce(name: str, raw: str) -> Any:
    """Convert a raw config string into the type of the matching field"""
    default = ExperimentConfig.__dataclass_fields__[name].default
    text = raw.strip()
    if name == 'jmax':
        return None if text.lower() in ('', 'none', 'auto') else int(text)
    if isinstance(default, bool):
        return text.lower() in ('1', 'true', 'yes', 'on')
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return math.inf if text.lower() in ('inf', 'infinity') else float(text)
    return text


def load_config(path: Optional[str]) -> ExperimentConfig:
    """
    Load an INI-style experiment config file

    Args:
        path: Path to the config file, or None for defaults

    Returns:
        ExperimentConfig with file values applied over the defaults
    """
    if not path:
        return ExperimentConfig()

    parser = configparser.ConfigParser()
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            parser.read_file(handle)
    except OSError as e:
        raise OutputError(f"Cannot read config file {path}: {str(e)}") from e

    known = {f.name for f in fields(ExperimentConfig)}
    values: Dict[str, Any] = {}
    for section in parser.sections():
        allowed = SECTIONS.get(section, ())
        for key, raw in parser.items(section):
            if key not in known or key not in allowed:
                logger.warning(f"Ignoring unknown config key [{section}] {key}")
                continue
            values[key] = _coerce(key, raw)

    logger.info(f"Loaded {len(values)} config values from {path}")
    return ExperimentConfig(**values)


def get_workers() -> int:
    """Parallelism cap from BESOVFLOW_THREADS (at least 1)"""
    try:
        return max(1, int(os.getenv('BESOVFLOW_THREADS', '1')))
    except ValueError:
        logger.warning("BESOVFLOW_THREADS is not an integer, using 1")
        return 1
