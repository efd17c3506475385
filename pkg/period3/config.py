"""
Run configuration: defaults < key = value file < TRIPLING_<KEY> environment < command-line flags.
"""
import configparser
import logging
import os
from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Optional, Sequence

from tripling.errors import ConfigError, ParameterError
from tripling.model import ModelParams
from tripling.utils import parse_grid

logger = logging.getLogger(__name__)

ENV_PREFIX = 'TRIPLING_'
SECTION = 'run'
DEFAULT_KAPPA = 0.01


def get_default_value(value, env_var: str, default_value):
    if value is not None:
        return value
    if env_var in os.environ:
        return os.environ[env_var]
    return default_value


def _float(text):
    return float(text)


def _int(text):
    as_float = float(text)
    if as_float != int(as_float):
        raise ValueError(f"{text} is not an integer")
    return int(as_float)


def _grid(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    values = parse_grid(str(text))
    if not values:
        raise ValueError("empty grid")
    return values


def _text(text):
    return str(text)


# key -> (converter, check, description of the valid range)
SCHEMA = {
    'f': (_float, lambda v: v >= 0, '>= 0'),
    'lambda': (_float, lambda v: v > 0, '> 0'),
    'kappa': (_float, lambda v: v >= 0, '>= 0'),
    'nbar': (_float, lambda v: v >= 0, '>= 0'),
    'sign_delta': (_int, lambda v: v in (1, -1), '+1 or -1'),
    'n_max': (_int, lambda v: v >= 30, '>= 30'),
    'g_points': (_int, lambda v: v >= 2, '>= 2'),
    'f_grid': (_grid, lambda v: all(x >= 0 for x in v), 'values >= 0'),
    'nbar_grid': (_grid, lambda v: all(x >= 0 for x in v), 'values >= 0'),
    'kappa_grid': (_grid, lambda v: all(x > 0 for x in v), 'values > 0'),
    'seed': (_int, lambda v: v >= 0, '>= 0'),
    'n_traj': (_int, lambda v: v >= 1, '>= 1'),
    'dt': (_float, lambda v: v > 0, '> 0'),
    'out': (_text, lambda v: bool(v), 'a directory'),
    'figure': (_text, lambda v: bool(v), 'a figure id'),
    'operation': (_text, lambda v: bool(v), 'a sweep operation'),
}


@dataclass(frozen=True)
class RunConfig:
    f: Optional[float] = None
    lam: Optional[float] = None
    kappa: Optional[float] = None
    nbar: Optional[float] = None
    sign_delta: int = 1
    n_max: Optional[int] = None
    g_points: Optional[int] = None
    f_grid: Optional[List[float]] = None
    nbar_grid: Optional[List[float]] = None
    kappa_grid: Optional[List[float]] = None
    seed: int = 0
    n_traj: int = 1000
    dt: float = 0.01
    out: str = 'out'
    figure: Optional[str] = None
    operation: Optional[str] = None

    def model(self) -> ModelParams:
        """ModelParams of the single point described by f, lambda, kappa, nbar and sign_delta."""
        missing = [key for key, value in (('f', self.f), ('lambda', self.lam)) if value is None]
        if missing:
            raise ConfigError(ConfigError.MISSING, f"required key(s) not set: {', '.join(missing)}")
        kappa = self.kappa if self.kappa is not None else DEFAULT_KAPPA
        nbar = self.nbar if self.nbar is not None else 0.0
        try:
            return ModelParams(f=self.f, lam=self.lam, kappa=kappa, nbar=nbar, sign_delta=self.sign_delta)
        except ParameterError as e:
            raise ConfigError(ConfigError.RANGE, str(e)) from e

    def as_dict(self) -> Dict[str, object]:
        fields = asdict(self)
        fields['lambda'] = fields.pop('lam')
        return fields


def _field(key: str) -> str:
    return 'lam' if key == 'lambda' else key


def read_config_file(path: str) -> Dict[str, str]:
    """
    Flat key = value file; '#' starts a comment.
    """
    parser = configparser.ConfigParser(comment_prefixes=('#',), inline_comment_prefixes=('#',),
                                       interpolation=None)
    try:
        with open(path) as fh:
            parser.read_string(f"[{SECTION}]\n" + fh.read())
    except OSError as e:
        raise ConfigError(ConfigError.PARSE, f"unable to read config file {path}: {e}") from e
    except configparser.Error as e:
        raise ConfigError(ConfigError.PARSE, f"malformed config file {path}: {e}") from e
    return dict(parser.items(SECTION))


def _convert(key: str, raw) -> object:
    if key not in SCHEMA:
        raise ConfigError(ConfigError.UNKNOWN_KEY, f"unknown key '{key}'")
    converter, check, valid = SCHEMA[key]
    try:
        value = converter(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(ConfigError.PARSE, f"{key}: cannot parse '{raw}': {e}") from e
    if not check(value):
        raise ConfigError(ConfigError.RANGE, f"{key}={value} out of range, must be {valid}")
    return value


def parse_config(path: Optional[str] = None, flags: Optional[Mapping[str, object]] = None,
                 required: Sequence[str] = ()) -> RunConfig:
    """
    Merge the configuration sources into a validated RunConfig.

    :param path: optional key = value file
    :param flags: command-line values by key, None for flags not given
    :param required: keys that must end up set
    """
    flags = dict(flags or {})
    for key in flags:
        if key not in SCHEMA:
            raise ConfigError(ConfigError.UNKNOWN_KEY, f"unknown flag '{key}'")
    file_values = read_config_file(path) if path else {}
    for key in file_values:
        if key not in SCHEMA:
            raise ConfigError(ConfigError.UNKNOWN_KEY, f"unknown key '{key}' in {path}")

    values = {}
    for key in SCHEMA:
        raw = get_default_value(flags.get(key), ENV_PREFIX + key.upper(), file_values.get(key))
        if raw is None:
            continue
        values[_field(key)] = _convert(key, raw)

    missing = [key for key in required if _field(key) not in values]
    if missing:
        raise ConfigError(ConfigError.MISSING, f"required key(s) not set: {', '.join(missing)}")
    cfg = RunConfig(**values)
    logger.debug(f"configuration: {cfg}")
    return cfg
