"""Student-teacher unsupervised concept drift detection.

A deployed random forest (the teacher) is shadowed by a second forest (the
student) trained to reproduce the teacher's outputs. Their disagreement rate
is monitored with Page-Hinkley; a rise means the input distribution has moved
into regions the pair never saw. The package also contains the supervised and
window-based detectors it is compared against, a label-availability simulator
and an experiment harness with a CLI.
"""

from ._util import ParseError, SchemaError, StuddError, ValidationError, mix, name_key
from .drift import (DriftStatus, KsResult, PageHinkley, WindowMode, WindowMonitor, ks_pvalue,
                    ks_statistic, ks_test, monitor_update, ph_reset, ph_update)
from .harness import (ExperimentConfig, RunReport, RunResult, audit_labels, rank_reports,
                      run_detailed, run_experiment, run_many, sensitivity_grid)
from .learners import DecisionTree, RandomForest, TreeConfig, fit_forest, fit_tree
from .metrics import (RankTable, average_ranks, cohen_kappa, confusion_matrix,
                      label_cost_ratio, sliding_kappa)
from .stream import (Concept, DataStream, Instance, StreamSchema, SyntheticDriftSpec,
                     boundary_concentration_spec, generate_synthetic, load_csv, write_csv)
from .student_teacher import StuddModel, fit_student_teacher, studd_adapt, studd_step
from .supervision import LabelAccess, LabelOracle, MethodKind, label_availability

__version__ = "0.1.0"
