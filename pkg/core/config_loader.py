#! /usr/bin/env python
# -*- coding: utf-8 -*-

import logging
from dataclasses import fields
from typing import Any, Dict, Optional, Type, TypeVar

import yaml

from core.exceptions import InvalidInputError
from core.models import FullConfig, LogLevel, RunParameters, SegmentationParameters, SolverConfig

logger = logging.getLogger(__name__)

T = TypeVar("T")


def _coerce(value: Any, default: Any) -> Any:
    """YAML reads 1e-6 as a string; numeric fields are converted by their default's type."""
    if isinstance(default, bool) or value is None:
        return value
    try:
        if isinstance(default, float):
            return float(value)
        if isinstance(default, int):
            return int(value)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"Expected a number, got {value!r}") from e
    return value


class ConfigLoader:
    """YAML run configuration with sections solver, segmentation and run; missing keys keep their defaults."""

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path
        self.raw_config: Dict[str, Any] = self._load_raw_config() if config_path else {}
        self.full_config: FullConfig = self._parse_full_config()

    def _load_raw_config(self) -> Dict[str, Any]:
        try:
            with open(self.config_path, "r") as f:
                config_data = yaml.safe_load(f)
            logger.info(f"Raw configuration loaded successfully from {self.config_path}")
        except FileNotFoundError:
            logger.error(f"Configuration file not found: {self.config_path}")
            raise
        except yaml.YAMLError as e:
            logger.error(f"Error parsing YAML configuration file {self.config_path}: {e}")
            raise InvalidInputError(f"Malformed YAML in {self.config_path}") from e
        if config_data is None:
            return {}
        if not isinstance(config_data, dict):
            raise InvalidInputError(f"Configuration {self.config_path} must be a mapping of sections")
        return config_data

    def _section(self, name: str) -> Dict[str, Any]:
        data = self.raw_config.get(name) or {}
        if not isinstance(data, dict):
            raise InvalidInputError(f"Configuration section '{name}' must be a mapping")
        return dict(data)

    def _build(self, cls: Type[T], data: Dict[str, Any], section: str) -> T:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            logger.warning(f"Ignoring unknown keys in section '{section}': {', '.join(unknown)}")
        kwargs = {f.name: _coerce(data[f.name], f.default) for f in fields(cls) if f.name in data}
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise InvalidInputError(f"Invalid values in section '{section}': {e}") from e

    def _parse_solver_config(self, data: Dict[str, Any]) -> SolverConfig:
        return self._build(SolverConfig, data, "solver")

    def _parse_segmentation_parameters(self, data: Dict[str, Any]) -> SegmentationParameters:
        # 'lambda' is a keyword in Python
        if "lambda" in data:
            data["lambda_"] = data.pop("lambda")
        return self._build(SegmentationParameters, data, "segmentation")

    def _parse_run_parameters(self, data: Dict[str, Any]) -> RunParameters:
        log_level_str = str(data.get("log_level", "INFO")).upper()
        try:
            data["log_level"] = LogLevel[log_level_str]
        except KeyError:
            logger.warning(f"Invalid log level '{log_level_str}'. Defaulting to INFO.")
            data["log_level"] = LogLevel.INFO
        return self._build(RunParameters, data, "run")

    def _parse_full_config(self) -> FullConfig:
        return FullConfig(
            solver=self._parse_solver_config(self._section("solver")),
            segmentation=self._parse_segmentation_parameters(self._section("segmentation")),
            run=self._parse_run_parameters(self._section("run")),
        )

    def get_config(self) -> FullConfig:
        return self.full_config
