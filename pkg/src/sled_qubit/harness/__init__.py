"""Run configuration, experiment commands, result files and the CLI."""

from sled_qubit.harness.config import RunConfig
from sled_qubit.harness.manifest import ResultWriter, RunManifest

__all__ = ["RunConfig", "ResultWriter", "RunManifest"]
