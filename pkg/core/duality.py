#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""Optimality certificates for the proximal and the discrete problem."""

import logging
from dataclasses import dataclass
from typing import FrozenSet

import numpy as np

from core.decomposition import Decomposition, DualIterate
from core.set_functions import best_level_set

logger = logging.getLogger(__name__)


@dataclass
class DiscreteCertificate:
    subset: FrozenSet[int] # best level set S_x of x = -sum(y)
    value: float # F(S_x)
    lower_bound: float # (z)_-(V), z = sum(y)
    gap: float


def lovasz_value(decomposition: Decomposition, x: np.ndarray) -> float:
    """f(x) = sum_i f_i(x), each block evaluated in closed form on its support."""
    return float(sum(block.lovasz_local(x[block.support]) for block in decomposition.blocks))


def primal_value(decomposition: Decomposition, x: np.ndarray) -> float:
    """f(x) + ||x||^2 / 2."""
    return lovasz_value(decomposition, x) + 0.5 * float(x @ x)


def dual_value(y: DualIterate) -> float:
    """-||sum_i y_i||^2 / 2."""
    return -0.5 * y.g()


def smooth_gap(decomposition: Decomposition, y: DualIterate) -> float:
    """nu_s = primal(x) - dual(y) at x = -sum(y), which reduces to f(x) + ||x||^2."""
    x = y.primal()
    return lovasz_value(decomposition, x) + float(x @ x)


def discrete_certificate(decomposition: Decomposition, y: DualIterate) -> DiscreteCertificate:
    x = y.primal()
    subset, value = best_level_set(decomposition.oracle, x)
    lower_bound = float(np.minimum(y.total, 0.0).sum())
    return DiscreteCertificate(subset=subset, value=value, lower_bound=lower_bound, gap=value - lower_bound)


def discrete_gap(decomposition: Decomposition, y: DualIterate) -> float:
    """nu_d = F(S_x) - sum_v min(z_v, 0) with z = sum(y)."""
    return discrete_certificate(decomposition, y).gap
