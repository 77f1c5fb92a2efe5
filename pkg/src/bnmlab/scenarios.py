"""Seeded synthetic scenarios with scarce labels.

Three regimes, all two-dimensional Gaussian blobs around class means placed
evenly on a circle:

* SSL      - labelled and unlabelled data share the distribution; the class
             priors may still be imbalanced.
* UDA      - the unlabelled domain's means are rotated and translated, so a
             model fit on labelled data faces dense regions near its
             decision boundary.
* OPEN_SET - the unlabelled domain additionally contains categories never
             seen in the labelled data.

Generation consumes a splitmix64-seeded xoshiro256++ stream in a fixed
order (per sample: one class draw, then one Box-Muller pair), which makes
every dataset reproducible bit-for-bit from its spec alone.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import Xoshiro256pp, stream

CIRCLE_RADIUS = 3.0


class ScenarioKind(enum.Enum):
    SSL = "ssl"
    UDA = "uda"
    OPEN_SET = "openset"

    @classmethod
    def parse(cls, text: str) -> "ScenarioKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown scenario kind {text!r} (expected one of: {names})") from None


@dataclass(frozen=True)
class DomainShift:
    """Rigid motion applied to the unlabelled domain's class means."""

    dx: float = 0.0
    dy: float = 0.0
    angle: float = 0.0  # radians, applied about the origin before translating

    def apply(self, points: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        rot = np.array([[c, -s], [s, c]])
        return points @ rot.T + np.array([self.dx, self.dy])


NO_SHIFT = DomainShift()


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    n_labeled: int
    n_unlabeled: int
    n_classes: int
    n_known: int
    class_priors: tuple[float, ...]
    shift: DomainShift = NO_SHIFT
    cluster_std: float = 0.8
    seed: int = 1

    def __post_init__(self):
        if self.n_classes < 1 or not 1 <= self.n_known <= self.n_classes:
            raise ValueError("need 1 <= n_known <= n_classes")
        if self.kind is ScenarioKind.OPEN_SET and self.n_known >= self.n_classes:
            raise ValueError("open-set scenarios need n_known < n_classes")
        if self.kind is not ScenarioKind.OPEN_SET and self.n_known != self.n_classes:
            raise ValueError(f"{self.kind.value} scenarios need n_known == n_classes")
        if len(self.class_priors) != self.n_classes:
            raise ValueError("class_priors length must equal n_classes")
        if any(p < 0.0 for p in self.class_priors):
            raise ValueError("class priors must be non-negative")
        if abs(math.fsum(self.class_priors) - 1.0) > 1e-12:
            raise ValueError("class priors must sum to 1 within 1e-12")
        if self.n_labeled > 0 and any(
            self.class_priors[j] == 0.0 for j in range(self.n_known)
        ):
            raise ValueError("every known class needs a positive prior to draw labelled data")
        if self.kind is ScenarioKind.SSL and self.shift != NO_SHIFT:
            raise ValueError("SSL scenarios have no domain shift")
        if self.cluster_std <= 0.0:
            raise ValueError("cluster_std must be positive")

    @property
    def known_classes(self) -> tuple[int, ...]:
        return tuple(range(self.n_known))

    @property
    def unknown_classes(self) -> tuple[int, ...]:
        return tuple(range(self.n_known, self.n_classes))

    @property
    def minority_classes(self) -> tuple[int, ...]:
        """Classes whose prior sits strictly below the uniform share."""
        cut = 1.0 / self.n_classes
        return tuple(j for j, p in enumerate(self.class_priors) if p < cut)


@dataclass(frozen=True)
class Dataset:
    spec: ScenarioSpec
    labeled_x: np.ndarray
    labeled_y: np.ndarray  # one-hot over all classes; only known columns used
    unlabeled_x: np.ndarray
    unlabeled_y: np.ndarray  # ground truth, for evaluation only

    def __post_init__(self):
        for a in (self.labeled_x, self.labeled_y, self.unlabeled_x, self.unlabeled_y):
            a.flags.writeable = False


def class_means(spec: ScenarioSpec) -> tuple[np.ndarray, np.ndarray]:
    """(labelled-domain means, unlabelled-domain means), one row per class."""
    angles = 2.0 * math.pi * np.arange(spec.n_classes) / spec.n_classes
    base = CIRCLE_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return base, spec.shift.apply(base)


def _draw_class(rng: Xoshiro256pp, cum_priors: list[float]) -> int:
    u = rng.next_float()
    for j, edge in enumerate(cum_priors):
        if u < edge:
            return j
    return len(cum_priors) - 1  # cumulative rounding leaves u just below 1


def _one_hot(labels: list[int], n_classes: int) -> np.ndarray:
    y = np.zeros((len(labels), n_classes))
    y[np.arange(len(labels)), labels] = 1.0
    return y


def generate(spec: ScenarioSpec) -> Dataset:
    """Sample a dataset; deterministic in the spec (including its seed)."""
    means_l, means_u = class_means(spec)
    rng = stream(spec.seed, 0)

    known_mass = math.fsum(spec.class_priors[: spec.n_known])
    cum_known = list(np.cumsum([p / known_mass for p in spec.class_priors[: spec.n_known]]))
    cum_all = list(np.cumsum(spec.class_priors))

    def draw_block(n, cum, means):
        xs = np.empty((n, 2))
        labels = []
        for i in range(n):
            cls = _draw_class(rng, cum)
            g0, g1 = rng.next_gauss_pair()
            xs[i, 0] = means[cls, 0] + spec.cluster_std * g0
            xs[i, 1] = means[cls, 1] + spec.cluster_std * g1
            labels.append(cls)
        return xs, labels

    lx, ll = draw_block(spec.n_labeled, cum_known, means_l)
    ux, ul = draw_block(spec.n_unlabeled, cum_all, means_u)
    return Dataset(
        spec=spec,
        labeled_x=lx,
        labeled_y=_one_hot(ll, spec.n_classes),
        unlabeled_x=ux,
        unlabeled_y=_one_hot(ul, spec.n_classes),
    )


@dataclass(frozen=True)
class PrototypeInit:
    """Per-unknown-class mean features plus the held-out indices they used."""

    means: dict[int, np.ndarray]
    flagged: tuple[int, ...] = field(default_factory=tuple)


def prototype_init(d: Dataset, k: int = 5) -> PrototypeInit:
    """Average k held-out unlabelled examples per unknown class.

    The first k dataset-order occurrences of each unknown class are used and
    flagged; callers must keep flagged indices out of training batches and
    out of evaluation, or the initialisation would leak ground truth.
    """
    if d.spec.kind is not ScenarioKind.OPEN_SET:
        raise ValueError("prototypes are only defined for open-set datasets")
    if k < 1:
        raise ValueError("k must be >= 1")
    truth = d.unlabeled_y.argmax(axis=1)
    means: dict[int, np.ndarray] = {}
    flagged: list[int] = []
    for cls in d.spec.unknown_classes:
        idx = np.flatnonzero(truth == cls)[:k]
        if idx.size < k:
            raise ValueError(f"class {cls} has only {idx.size} unlabelled examples, need {k}")
        means[cls] = d.unlabeled_x[idx].mean(axis=0)
        flagged.extend(int(i) for i in idx)
    return PrototypeInit(means=means, flagged=tuple(sorted(flagged)))


def known_class_means(d: Dataset) -> dict[int, np.ndarray]:
    """Empirical mean of the labelled examples of each known class.

    The open-set harness uses these to seed the known output heads, the
    counterpart of initialising the unknown heads from prototypes; only
    labelled information is touched.
    """
    labels = d.labeled_y.argmax(axis=1)
    means = {}
    for cls in d.spec.known_classes:
        mask = labels == cls
        if mask.any():
            means[cls] = d.labeled_x[mask].mean(axis=0)
    return means


def eligible_indices(d: Dataset, domain: str, exclude: tuple[int, ...] = ()) -> np.ndarray:
    n = d.labeled_x.shape[0] if domain == "labeled" else d.unlabeled_x.shape[0]
    if not exclude:
        return np.arange(n)
    mask = np.ones(n, dtype=bool)
    mask[list(exclude)] = False
    return np.flatnonzero(mask)


def sample_indices(pool: np.ndarray, b: int, rng: Xoshiro256pp, replace: bool = True) -> np.ndarray:
    """Draw b indices from pool; uniform with replacement by default.

    Without replacement, a Fisher-Yates shuffle of the pool is taken and the
    first b entries returned (b == len(pool) yields a full permutation).
    """
    n = pool.shape[0]
    if n == 0:
        raise ValueError("cannot sample from an empty domain")
    if b < 1:
        raise ValueError("batch size must be >= 1")
    if replace:
        return pool[[rng.next_below(n) for _ in range(b)]]
    if b > n:
        raise ValueError("cannot draw more than the domain size without replacement")
    perm = list(pool)
    for i in range(n - 1, 0, -1):
        j = rng.next_below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(perm[:b])


def sample_batch(
    d: Dataset,
    domain: str,
    b: int,
    rng: Xoshiro256pp,
    exclude: tuple[int, ...] = (),
    replace: bool = True,
    return_indices: bool = False,
):
    """One batch from the chosen domain; unlabelled batches carry no labels."""
    if domain not in ("labeled", "unlabeled"):
        raise ValueError("domain must be 'labeled' or 'unlabeled'")
    idx = sample_indices(eligible_indices(d, domain, exclude), b, rng, replace)
    if domain == "labeled":
        out = (d.labeled_x[idx], d.labeled_y[idx])
    else:
        out = (d.unlabeled_x[idx], None)
    return out + (idx,) if return_indices else out


def export_csv(d: Dataset, path, flagged: tuple[int, ...] = ()) -> None:
    """Write the dataset as rows of (domain, split_flag, x1, x2, label).

    split_flag is 1 for prototype-held-out unlabelled rows, else 0. Floats
    use 17 significant digits so a re-import is bit-exact.
    """
    flagged_set = set(flagged)
    with open(path, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain", "split_flag", "x1", "x2", "label"])
        for i in range(d.labeled_x.shape[0]):
            w.writerow(
                ["labeled", 0, f"{d.labeled_x[i, 0]:.17g}", f"{d.labeled_x[i, 1]:.17g}",
                 int(d.labeled_y[i].argmax())]
            )
        for i in range(d.unlabeled_x.shape[0]):
            w.writerow(
                ["unlabeled", int(i in flagged_set), f"{d.unlabeled_x[i, 0]:.17g}",
                 f"{d.unlabeled_x[i, 1]:.17g}", int(d.unlabeled_y[i].argmax())]
            )


def import_csv(path, spec: ScenarioSpec) -> tuple[Dataset, tuple[int, ...]]:
    """Rebuild (Dataset, flagged indices) from an export_csv file."""
    lx, ll, ux, ul, flagged = [], [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["domain", "split_flag", "x1", "x2", "label"]:
            raise ValueError(f"unexpected dataset CSV header: {header}")
        for row in reader:
            domain, flag, x1, x2, label = row
            if domain == "labeled":
                lx.append((float(x1), float(x2)))
                ll.append(int(label))
            else:
                if int(flag):
                    flagged.append(len(ux))
                ux.append((float(x1), float(x2)))
                ul.append(int(label))
    return (
        Dataset(
            spec=spec,
            labeled_x=np.array(lx).reshape(len(lx), 2),
            labeled_y=_one_hot(ll, spec.n_classes),
            unlabeled_x=np.array(ux).reshape(len(ux), 2),
            unlabeled_y=_one_hot(ul, spec.n_classes),
        ),
        tuple(flagged),
    )


DEFAULT_UDA_SHIFT = DomainShift(dx=1.0, dy=0.5, angle=math.radians(15.0))
DEFAULT_PRIORS_4 = (0.5, 0.3, 0.1, 0.1)
DEFAULT_PRIORS_5 = (0.3, 0.25, 0.2, 0.1, 0.15)  # last class is the unknown one
DEFAULT_PROTOTYPE_K = 5


def default_spec(kind: ScenarioKind, seed: int = 1) -> ScenarioSpec:
    """The stock scenario for each regime; see the comparison CLI defaults."""
    if kind is ScenarioKind.SSL:
        return ScenarioSpec(
            kind=kind, n_labeled=200, n_unlabeled=1000, n_classes=4, n_known=4,
            class_priors=DEFAULT_PRIORS_4, shift=NO_SHIFT, cluster_std=0.8, seed=seed,
        )
    if kind is ScenarioKind.UDA:
        return ScenarioSpec(
            kind=kind, n_labeled=200, n_unlabeled=1000, n_classes=4, n_known=4,
            class_priors=DEFAULT_PRIORS_4, shift=DEFAULT_UDA_SHIFT, cluster_std=0.8, seed=seed,
        )
    return ScenarioSpec(
        kind=kind, n_labeled=200, n_unlabeled=1000, n_classes=5, n_known=4,
        class_priors=DEFAULT_PRIORS_5, shift=DEFAULT_UDA_SHIFT, cluster_std=0.8, seed=seed,
    )
