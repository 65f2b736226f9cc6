"""Shared helpers for statistical assertions."""

import numpy as np
import pytest


def assert_within_stderr(observed, expected, stderr, n_sigma=4.0, label=""):
    """Assert |observed - expected| <= n_sigma * stderr (Monte Carlo bound)."""
    bound = n_sigma * stderr
    assert abs(observed - expected) <= bound, (
        f"{label}: |{observed} - {expected}| = {abs(observed - expected):.4g} "
        f"exceeds {n_sigma} * {stderr:.4g}"
    )


def replicate_mean_bound(samples):
    """Mean and its standard error from replicate estimates."""
    samples = np.asarray(samples, dtype=np.float64)
    return samples.mean(), samples.std(ddof=1) / np.sqrt(samples.size)
