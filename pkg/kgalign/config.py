import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

import toml
from dotenv import load_dotenv

from kgalign.logging import logger


class ConfigError(ValueError):
    pass


@dataclass
class Project:
    """
    Directory whose `pyproject.toml` may carry a `[tool.kgalign]`
    table of per-command defaults, and which may hold a `.env`
    file of environment variables
    """

    path: str

    def __post_init__(self):
        self.path = Path(self.path).resolve()
        if not self.path.is_dir():
            raise ConfigError(f"Project {self.path} does not exist")

        config_path = self.path / "pyproject.toml"
        try:
            with open(config_path, "r") as f:
                self._config = toml.load(f)
        except FileNotFoundError:
            self._config = {}
        except toml.TomlDecodeError as e:
            raise ConfigError(f"Malformed config file {config_path}: {e}")

    @property
    def config(self) -> Dict:
        return self._config.copy()

    @property
    def kgalign_config(self) -> Dict:
        """
        Settings as defined in the `[tool.kgalign]`
        table of the project's `pyproject.toml`
        """

        try:
            return self.config["tool"]["kgalign"].copy()
        except KeyError:
            return {}

    def section(self, name: str) -> Dict[str, Any]:
        table = self.kgalign_config.get(name, {})
        if not isinstance(table, dict):
            raise ConfigError(
                f"Entry 'tool.kgalign.{name}' in {self.path} must be a table"
            )
        return table.copy()

    def load_dotenv(self, env: Optional[str] = None) -> None:
        if env is None or not os.path.isabs(env):
            env = env or ".env"
            env = self.path / env

        if os.path.exists(env):
            logger.debug(f"Loading environment variables from {env}")
            load_dotenv(env)


def layer(
    flags: Dict[str, Any],
    tables: Iterable[Dict[str, Any]],
    defaults: Dict[str, Any],
) -> Dict[str, Any]:
    """
    Resolve every option in `defaults` from, in order of
    precedence, an explicitly passed flag, the first table
    that sets it, and its default. Flags are keyed by
    attribute name, table keys are spelled like the long flag.
    """

    tables = list(tables)
    resolved = {}
    for name, default in defaults.items():
        value = flags.get(name)
        if value is None:
            key = name.replace("_", "-")
            for table in tables:
                if key in table:
                    value = table[key]
                    break
            else:
                value = default
        resolved[name] = value
    return resolved
