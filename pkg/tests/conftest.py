"""Shared pytest configuration.

The numba kernels compile on first call, which can dwarf any single
hypothesis example's runtime, so wall-clock deadlines are disabled.
"""

from hypothesis import HealthCheck, settings

settings.register_profile(
    "iclseg",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("iclseg")
