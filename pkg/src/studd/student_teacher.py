"""Student-teacher unsupervised drift detection.

The teacher is the deployed classifier. The student is a second forest fit on
the same inputs but with the teacher's predictions as targets. At run time
the 0/1 disagreement between the two (the mimicking error) is fed to a
Page-Hinkley detector; no true label is consumed after training.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._util import ValidationError, mix, name_key
from .drift import DriftStatus, PageHinkley
from .learners import RandomForest, TreeConfig, fit_forest
from .stream import StreamSchema

log = logging.getLogger(__name__)

STUDENT_KEY = name_key("student")


@dataclass
class StuddModel:
    teacher: RandomForest
    student: RandomForest
    detector: PageHinkley
    schema: StreamSchema

    def predict(self, x):
        return self.teacher.predict(x)

    def mimicking_errors(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Teacher label indices and student mimicking errors for a batch.

        Pure function of the models; does not touch the detector.
        """
        t = self.teacher.predict_index_batch(X)
        s = self.student.predict_index_batch(X)
        return t, (t != s).astype(np.float64)


def fit_student_teacher(X, y, schema: StreamSchema, n_trees: int = 100, seed: int = 0,
                        config: TreeConfig = TreeConfig(),
                        detector: PageHinkley | None = None) -> StuddModel:
    """Fit the teacher on ``(X, y)`` and the student on ``(X, teacher(X))``.

    ``y`` holds label indices into ``schema.class_labels``. Both forests use
    the same configuration; the student draws from the sub-seed
    ``mix(seed, STUDENT_KEY)``. ``detector`` supplies Page-Hinkley parameters;
    the model always gets a fresh copy.
    """
    teacher = fit_forest(X, y, schema, n_trees=n_trees, config=config, seed=seed)
    relabeled = teacher.predict_index_batch(X)
    if np.unique(relabeled).size < 2:
        log.warning("teacher predicts a single class on the training batch; "
                    "the student will be a constant predictor")
    student = fit_forest(X, relabeled, schema, n_trees=n_trees, config=config,
                         seed=mix(seed, STUDENT_KEY))
    ph = detector.fresh() if detector is not None else PageHinkley()
    return StuddModel(teacher, student, ph, schema)


def mimicking_error(y_teacher, y_student) -> float:
    return 0.0 if y_teacher == y_student else 1.0


def studd_step(model: StuddModel, x):
    """Deploy the teacher on ``x`` and update the detector with the student's error.

    Returns ``(teacher prediction, DriftStatus)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.schema.n_features,):
        raise ValidationError(f"expected {model.schema.n_features} features, got shape {x.shape}")
    y_t = model.teacher.predict(x)
    y_s = model.student.predict(x)
    status = model.detector.update(mimicking_error(y_t, y_s))
    return y_t, status


def studd_adapt(model: StuddModel, X, y, seed: int = 0, n_trees: int | None = None,
                config: TreeConfig = TreeConfig()) -> StuddModel:
    """Refit teacher and student on a recent labeled batch, with a fresh detector."""
    return fit_student_teacher(
        X, y, model.schema,
        n_trees=len(model.teacher.trees) if n_trees is None else n_trees,
        seed=seed, config=config, detector=model.detector)

