"""Shared test fields."""

import numpy as np


def smooth_bump(x, center=(0.0, 0.0, 0.0), width=0.3):
    c = np.reshape(center, (3, 1, 1, 1))
    return np.exp(-np.sum((x - c) ** 2, axis=0) / (2 * width**2))
