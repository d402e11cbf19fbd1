"""kernbench: dense linear algebra performance experiments.

Pipeline: describe an :class:`~kernbench.experiment.Experiment`, run it on
the command-stream sampler, and analyze the resulting
:class:`~kernbench.report.Report` with metrics, statistics, and plots.
"""

from .experiment import Experiment, RangeSpec, SymbolicCall, VarySpec, validate
from .kernels import lookup_signature
from .report import MachineSpec, Report, load_report, parse_report
from .submit import run_local, submit

__version__ = "0.1.0"

__all__ = [
    "Experiment",
    "RangeSpec",
    "SymbolicCall",
    "VarySpec",
    "validate",
    "lookup_signature",
    "MachineSpec",
    "Report",
    "load_report",
    "parse_report",
    "run_local",
    "submit",
    "__version__",
]
