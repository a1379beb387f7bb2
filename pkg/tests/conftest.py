import numpy as np
import pytest

from mta.estimators import TaskSummary


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_summary(rng, T, spread=1.0):
    return TaskSummary(
        rng.normal(0.0, spread, T),
        rng.uniform(0.1, 3.0, T),
        rng.integers(1, 50, T),
    )


def unit_summary(means):
    """Summary whose sample-mean covariance is the identity."""
    means = np.asarray(means, dtype=float)
    return TaskSummary(means, np.ones_like(means), np.ones(means.size, dtype=int))


EXPERT_LABELS = ("AAMB", "Hamas", "PIJ", "PFLP", "Fatah", "Force17", "Unknown")
EXPERT_MATRIX = np.array(
    [
        [0, 0.2, 0.2, 0.6, 0.8, 0.8, 0.6],
        [0.2, 0, 0.8, 0.2, 0.2, 0.2, 0.4],
        [0.2, 0.8, 0, 0.2, 0.2, 0.2, 0.4],
        [0.6, 0.2, 0.2, 0, 0.6, 0.6, 0.5],
        [0.8, 0.2, 0.2, 0.6, 0, 1.0, 0.6],
        [0.8, 0.2, 0.2, 0.6, 1.0, 0, 0.6],
        [0.6, 0.4, 0.4, 0.5, 0.6, 0.6, 0],
    ]
)


def write_expert_csv(path):
    lines = ["," + ",".join(EXPERT_LABELS)]
    for label, row in zip(EXPERT_LABELS, EXPERT_MATRIX):
        lines.append(label + "," + ",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def synthetic_density_tasks(seed, labels=EXPERT_LABELS, n=(5, 25), dim=2, snap=None):
    """Clustered 2-d point sets; ``snap`` rounds coordinates onto a lattice."""
    from mta.mtkde import DensityTask

    r = np.random.default_rng(seed)
    out = []
    for label in labels:
        centre = r.uniform(-3, 3, dim)
        pts = centre + r.normal(0, 1.0, (int(r.integers(*n)), dim))
        if snap is not None:
            pts = np.round(pts / snap) * snap
        out.append(DensityTask(label, pts))
    return out
