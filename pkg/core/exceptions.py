#! /usr/bin/env python
# -*- coding: utf-8 -*-

from typing import Optional

import numpy as np


class SubmodularError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidInputError(SubmodularError, ValueError):
    """Non-finite vectors, shape mismatches, malformed specs."""


class EnumerationLimitError(SubmodularError, ValueError):
    """Exhaustive enumeration refused because the ground set is too large."""


class InvalidBlockError(SubmodularError, ValueError):
    """A block could not be constructed (overlapping matching, bad weights, ...)."""


class ImageFormatError(SubmodularError, ValueError):
    """Malformed or unsupported PPM/PGM file."""


class ProjectionConvergenceError(SubmodularError, RuntimeError):
    """Iterative projection hit its iteration cap before certifying its tolerance."""

    def __init__(self, message: str, best_iterate: Optional[np.ndarray] = None, gap: float = float("inf")):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.gap = gap
