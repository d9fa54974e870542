from __future__ import annotations

import pytest

from switchsim.workloads import write_driving_scenario


@pytest.fixture(scope="session")
def driving_dir(tmp_path_factory):
    """Calibrated five-task driving scenario, built once per session."""
    root = tmp_path_factory.mktemp("driving")
    write_driving_scenario(root, mode="full_method")
    return root
