import json
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import _acceptance_setup as setup  # noqa: E402


@pytest.fixture(scope="session")
def ref_dir():
    """Reference-distribution tables (cached on disk across sessions)."""
    return setup.ensure_reference_tables()


@pytest.fixture(scope="session")
def experiments():
    """Accessor for the acceptance-scale cached experiments."""

    class Access:
        def config(self, name):
            return setup.experiment_configs()[name]

        def run(self, name):
            return setup.ensure_experiment(name, quiet=True)

        def report(self, name):
            setup.ensure_reference_tables()
            setup.ensure_experiment(name, quiet=True)
            return setup.ensure_report(name)

        def raw(self, name):
            import numpy as np

            cfg = self.run(name)
            return cfg, np.genfromtxt(os.path.join(cfg.out_dir, "raw.csv"),
                                      delimiter=",", names=True)

    return Access()
