"""Shared test helpers."""

import math

import numpy as np


def smooth_u(x, y, z):
    return np.sin(1.3 * x + 0.7 * y) * np.cos(0.9 * z) + 0.5 * np.cos(0.6 * x - 1.1 * y + 0.4 * z) + 0.3 * x * y * z


def orders(errors):
    return [math.log2(a / b) for a, b in zip(errors[:-1], errors[1:])]
