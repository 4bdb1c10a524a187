""" Lab-wide settings (memory guards, retry caps, logging) and logger set-up

    Settings are read once, at import, from the TOML file named by the environment variable
    ``PERCLAB_SETTINGS`` (default: *perclab.toml* in the working directory). Any key missing
    from the file keeps its built-in default. For example::

        Example contents of file *perclab.toml*
        ---------------------------------------
        max_explicit_order = 1048576
        log_to_file = true
        log_level_file = 'DEBUG'

    Here is the list of all settings and their default values:

    ==========================  ==========  ==============================================================
    Setting                     Defaults    Meaning
    ==========================  ==========  ==============================================================
    max_hypercube_dim           30          Largest hypercube dimension accepted
    max_implicit_order          2**26       Largest vertex count of an implicit (hypercube) host
    max_explicit_order          2**22       Largest vertex count of an explicit or product host
    random_regular_retries      1000        Attempts before the configuration model gives up
    exhaustive_component_limit  20          Largest component the exhaustive matcher accepts
    log_enable                  true        Enable/disable logging
    log_to_file                 false       Also log to '<log_dir>/perclab.log'
    log_dir                     'logs'      Directory for log files (created if necessary)
    log_level_console           'WARNING'   Console logger level: DEBUG, INFO, WARNING, ERROR, CRITICAL
    log_level_file              'INFO'      File logger level: DEBUG, INFO, WARNING, ERROR, CRITICAL
    ==========================  ==========  ==============================================================
"""

from dataclasses import dataclass, fields
import logging
import os
from pathlib import Path
import tomllib


SETTINGS_ENV = 'PERCLAB_SETTINGS'
SETTINGS_FILENM = 'perclab.toml'
LOG_FORMAT = "%(asctime)s - %(levelname)7s - %(message)s"


@dataclass(frozen=True)
class Settings:
    """ Frozen container of the lab settings (see module documentation for meanings). """

    max_hypercube_dim: int = 30
    max_implicit_order: int = 2 ** 26
    max_explicit_order: int = 2 ** 22
    random_regular_retries: int = 1000
    exhaustive_component_limit: int = 20
    log_enable: bool = True
    log_to_file: bool = False
    log_dir: str = 'logs'
    log_level_console: str = 'WARNING'
    log_level_file: str = 'INFO'


def load_settings(filename: str | os.PathLike | None = None) -> Settings:
    """ Read settings from a TOML file, keeping the defaults for anything not specified.

        :param filename: TOML file to read. Defaults to ``$PERCLAB_SETTINGS`` or *perclab.toml*.
        :type filename: str | os.PathLike | None
        :return: the merged settings
        :rtype: Settings
    """
    filenm = filename or os.environ.get(SETTINGS_ENV, SETTINGS_FILENM)
    _params = {}
    try:
        with open(filenm, 'rb') as fp:
            _params = tomllib.load(fp)
    except FileNotFoundError:
        if filename:
            print(f"perclab: using default settings: file '{filenm}' not found")
    except tomllib.TOMLDecodeError as e:
        print(f"perclab: using default settings: invalid TOML syntax in '{filenm}':\n{e}")
    known = {f.name for f in fields(Settings)}
    unknown = sorted(set(_params) - known)
    if unknown:
        print(f"perclab: ignoring unknown settings in '{filenm}': {', '.join(unknown)}")
    return Settings(**{k: v for k, v in _params.items() if k in known})


#: Settings in force for this process
SETTINGS = load_settings()


def get_logger(name: str, settings: Settings | None = None) -> logging.Logger:
    """ Return logger `name`, attaching a console handler (and optionally a file handler) the first time.

        :param name: logger name, typically ``__name__`` of the calling module
        :type name: str
        :param settings: settings to honour (default: :data:`SETTINGS`)
        :type settings: Settings | None
        :return: the configured logger
        :rtype: logging.Logger
    """
    settings = settings or SETTINGS
    logger = logging.getLogger(name)
    if not settings.log_enable:
        logger.disabled = True
        return logger
    if logger.handlers:
        return logger
    logger.setLevel(logging.DEBUG)
    formatter = logging.Formatter(LOG_FORMAT)
    ch = logging.StreamHandler()
    ch.setLevel(settings.log_level_console)
    ch.setFormatter(formatter)
    logger.addHandler(ch)
    if settings.log_to_file:
        log_dir = Path(settings.log_dir)
        if log_dir.exists() and not log_dir.is_dir():
            raise OSError(f"Directory '{log_dir}' exists as a file")
        log_dir.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(log_dir / 'perclab.log')
        fh.setLevel(settings.log_level_file)
        fh.setFormatter(formatter)
        logger.addHandler(fh)
    return logger
