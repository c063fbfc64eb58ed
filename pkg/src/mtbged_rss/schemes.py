"""Ranked set sampling protocols.

``draw`` simulates a scheme physically: every set is a fresh batch of MTBGED
pairs, ranked on X, and the prescribed unit's Y is measured.  ``draw_direct``
skips set construction and inverts each observation's concomitant law; the
two paths are meant to agree in distribution and are tested against each
other.

Each physical set is generated from its own child stream spawned from the
caller's generator, so observations with different ``set_index`` never share
random numbers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .concomitants import ConcomitantLaw, stage_ratio
from .model import ModelParams

__all__ = [
    "CSV_COLUMNS",
    "KINDS",
    "UNBALANCED",
    "RankedSample",
    "SampleBatch",
    "SchemeSpec",
    "draw",
    "draw_batch",
    "draw_direct",
    "draw_direct_batch",
]

KINDS = ("rss", "crss", "lrss", "erss1", "erss2", "erss3", "merss", "urss", "msrss", "ussrss")
UNBALANCED = frozenset({"urss", "msrss", "ussrss"})

# fixed column order of the CSV form; x is written only when present
CSV_COLUMNS = ("set_index", "rank_label", "y", "x")

# literal stage-by-stage MSRSS is only allowed for n**(l+1) raw units up to this
LITERAL_STAGE_LIMIT = 10**5


@dataclass(frozen=True)
class SchemeSpec:
    """A sampling scheme and its configuration.

    Build instances through the named constructors (``SchemeSpec.rss(5)``,
    ``SchemeSpec.lrss(7, gamma=0.2)``, ...); ``__post_init__`` enforces the
    per-scheme constraints.
    """

    kind: str
    n: int
    retained: tuple[int, ...] | None = None
    k: int | None = None
    l: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {', '.join(KINDS)}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"set size n must be an integer >= 2, got {self.n!r}")
        n = self.n
        if self.kind == "crss":
            ranks = self.retained
            if not ranks:
                raise ValueError("crss needs a non-empty list of retained ranks")
            if any(b <= a for a, b in zip(ranks, ranks[1:])):
                raise ValueError(f"retained ranks must be strictly increasing, got {list(ranks)}")
            if ranks[0] < 1 or ranks[-1] > n:
                raise ValueError(f"retained ranks must lie in 1..{n}, got {list(ranks)}")
        elif self.retained is not None:
            raise ValueError("retained ranks only apply to crss")
        if self.kind == "lrss":
            if self.k is None or int(self.k) != self.k or not 0 <= 2 * self.k < n:
                raise ValueError(f"lrss coefficient k must satisfy 0 <= k < n/2, got k={self.k!r}, n={n}")
        elif self.k is not None:
            raise ValueError("coefficient k only applies to lrss")
        if self.kind == "erss1" and n % 2:
            raise ValueError(f"erss1 requires an even set size n, got n={n}")
        if self.kind in ("erss2", "erss3") and not n % 2:
            raise ValueError(f"{self.kind} requires an odd set size n, got n={n}")
        if self.kind == "msrss":
            if self.l is None or int(self.l) != self.l or self.l < 1:
                raise ValueError(f"msrss stage count l must be an integer >= 1, got {self.l!r}")
        elif self.kind == "urss":
            if self.l not in (None, 1):
                raise ValueError("urss is the single-stage scheme; l must be 1")
        elif self.l is not None:
            raise ValueError("stage count l only applies to msrss")

    # named constructors

    @classmethod
    def rss(cls, n: int) -> SchemeSpec:
        return cls("rss", n)

    @classmethod
    def crss(cls, n: int, retained) -> SchemeSpec:
        return cls("crss", n, retained=tuple(int(r) for r in retained))

    @classmethod
    def lrss(cls, n: int, k: int | None = None, gamma: float | None = None) -> SchemeSpec:
        if (k is None) == (gamma is None):
            raise ValueError("give exactly one of k or gamma")
        if gamma is not None:
            if not 0.0 <= gamma < 0.5:
                raise ValueError(f"gamma must satisfy 0 <= gamma < 0.5, got {gamma!r}")
            k = math.floor(n * gamma)
        return cls("lrss", n, k=k)

    @classmethod
    def erss1(cls, n: int) -> SchemeSpec:
        return cls("erss1", n)

    @classmethod
    def erss2(cls, n: int) -> SchemeSpec:
        return cls("erss2", n)

    @classmethod
    def erss3(cls, n: int) -> SchemeSpec:
        return cls("erss3", n)

    @classmethod
    def merss(cls, n: int) -> SchemeSpec:
        return cls("merss", n)

    @classmethod
    def urss(cls, n: int) -> SchemeSpec:
        return cls("urss", n)

    @classmethod
    def msrss(cls, n: int, l: int) -> SchemeSpec:
        return cls("msrss", n, l=l)

    @classmethod
    def ussrss(cls, n: int) -> SchemeSpec:
        return cls("ussrss", n)

    @property
    def stages(self) -> int | None:
        """Number of selection stages (1 for urss, None when not applicable)."""
        return 1 if self.kind == "urss" else self.l

    def layout(self) -> list[tuple[int, int]]:
        """(set_index, rank) of every observation, in estimator order.

        For the unbalanced schemes the rank is n: the unit is the largest X
        of its group.
        """
        n, kind = self.n, self.kind
        if kind == "rss":
            return [(r, r) for r in range(1, n + 1)]
        if kind == "crss":
            return [(m, m) for m in self.retained]
        if kind == "lrss":
            k = self.k
            return [(i, min(max(i, k + 1), n - k)) for i in range(1, n + 1)]
        if kind == "erss1":
            return [(i, 1 if i % 2 else n) for i in range(1, n + 1)]
        if kind in ("erss2", "erss3"):
            head = [(i, 1 if i % 2 else n) for i in range(1, n)]
            if kind == "erss2":
                return head + [(n, 1), (n, n)]
            return head + [(n, (n + 1) // 2)]
        if kind == "merss":
            return [(i, 1) for i in range(1, n + 1)] + [(n + i, n) for i in range(1, n + 1)]
        # urss, msrss, ussrss
        return [(i, n) for i in range(1, n + 1)]

    @property
    def n_observations(self) -> int:
        return len(self.layout())

    @property
    def n_sets(self) -> int:
        return len({s for s, _ in self.layout()})

    def raw_units(self) -> int | None:
        """Pairs generated per sample; None for the steady-state limit."""
        if self.kind == "ussrss":
            return None
        if self.kind in ("urss", "msrss"):
            return self.n ** (self.stages + 1)
        return self.n_sets * self.n

    def observation_laws(self, alpha2: float, theta2: float, lam: float) -> list[ConcomitantLaw]:
        """Marginal law of each observation, aligned with ``layout``."""
        if self.kind in ("urss", "msrss"):
            d = -lam * stage_ratio(self.n, self.stages)
            return [ConcomitantLaw(alpha2, theta2, d)] * self.n
        if self.kind == "ussrss":
            return [ConcomitantLaw.steady_state(alpha2, theta2, lam)] * self.n
        return [ConcomitantLaw.for_rank(alpha2, theta2, self.n, r, lam) for _, r in self.layout()]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "n": self.n}
        if self.retained is not None:
            out["retained"] = list(self.retained)
        if self.k is not None:
            out["k"] = self.k
        if self.l is not None:
            out["l"] = self.l
        return out

    @classmethod
    def from_dict(cls, d: dict) -> SchemeSpec:
        retained = d.get("retained")
        return cls(
            d["kind"],
            int(d["n"]),
            retained=None if retained is None else tuple(int(r) for r in retained),
            k=d.get("k"),
            l=d.get("l"),
        )


@dataclass
class RankedSample:
    """Measured study-variate values with their rank provenance.

    Columns are parallel arrays aligned with ``scheme.layout()``.  For erss2
    the last two entries are the min and max concomitants of set n, which
    the estimator averages.
    """

    scheme: SchemeSpec
    y: np.ndarray
    rank_label: np.ndarray
    set_index: np.ndarray
    x: np.ndarray | None = None
    raw_sets: dict[int, tuple[np.ndarray, np.ndarray]] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.rank_label = np.asarray(self.rank_label, dtype=int)
        self.set_index = np.asarray(self.set_index, dtype=int)
        if self.x is not None:
            self.x = np.asarray(self.x, dtype=float)
        m = len(self.y)
        if not (len(self.rank_label) == len(self.set_index) == m) or (self.x is not None and len(self.x) != m):
            raise ValueError("sample columns have different lengths")

    def __len__(self):
        return len(self.y)

    def check_layout(self) -> None:
        """Raise ValueError unless the rows match the scheme's layout."""
        expected = self.scheme.layout()
        got = list(zip(self.set_index.tolist(), self.rank_label.tolist()))
        if got != expected:
            raise ValueError(
                f"sample rows (set_index, rank_label) = {got} do not match the "
                f"{self.scheme.kind} layout {expected}"
            )

    def records(self) -> list[dict]:
        rows = []
        for i in range(len(self)):
            row = {"set_index": int(self.set_index[i]), "rank_label": int(self.rank_label[i]), "y": float(self.y[i])}
            if self.x is not None:
                row["x"] = float(self.x[i])
            rows.append(row)
        return rows

    def to_csv(self, digits: int | None = None) -> str:
        fmt = repr if digits is None else (lambda v: f"{v:.{digits}g}")
        cols = CSV_COLUMNS if self.x is not None else CSV_COLUMNS[:3]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in self.records():
            writer.writerow([fmt(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, scheme: SchemeSpec) -> RankedSample:
        reader = csv.DictReader(io.StringIO(text))
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS[:3] if c not in header]
        if missing:
            raise ValueError(f"CSV is missing required column(s): {', '.join(missing)}")
        unknown = [c for c in header if c not in CSV_COLUMNS]
        if unknown:
            raise ValueError(f"CSV has unknown column(s): {', '.join(unknown)}")
        rows = list(reader)
        if not rows:
            raise ValueError("CSV has no observations")
        try:
            y = [float(r["y"]) for r in rows]
            ranks = [int(r["rank_label"]) for r in rows]
            sets = [int(r["set_index"]) for r in rows]
            x = [float(r["x"]) for r in rows] if "x" in header else None
        except (TypeError, ValueError) as exc:
            raise ValueError(f"malformed CSV value: {exc}") from None
        return cls(scheme, y, ranks, sets, x)

    def to_json(self) -> str:
        return json.dumps({"scheme": self.scheme.to_dict(), "observations": self.records()}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> RankedSample:
        doc = json.loads(text)
        obs = doc["observations"]
        has_x = all("x" in o for o in obs)
        return cls(
            SchemeSpec.from_dict(doc["scheme"]),
            [o["y"] for o in obs],
            [o["rank_label"] for o in obs],
            [o["set_index"] for o in obs],
            [o["x"] for o in obs] if has_x else None,
        )


@dataclass
class SampleBatch:
    """``reps`` independent samples of one scheme as (reps, m) arrays."""

    scheme: SchemeSpec
    y: np.ndarray
    x: np.ndarray | None

    def sample(self, i: int) -> RankedSample:
        sets, ranks = zip(*self.scheme.layout())
        return RankedSample(self.scheme, self.y[i], ranks, sets, None if self.x is None else self.x[i])


def _check_lambda_for(spec: SchemeSpec, p: ModelParams) -> None:
    if spec.kind in UNBALANCED and not p.lam > 0:
        raise ValueError(f"λ must be positive for unbalanced schemes ({spec.kind}), got {p.lam}")


def _staged_argmax(u: np.ndarray, n: int, l: int) -> np.ndarray:
    """Select the max of n**l units by l rounds of max-of-n, returning column indices."""
    reps = u.shape[0]
    idx = np.broadcast_to(np.arange(u.shape[1]), u.shape)
    vals = u
    for _ in range(l):
        groups = vals.reshape(reps, -1, n)
        pick = groups.argmax(axis=2)
        vals = np.take_along_axis(groups, pick[..., None], axis=2)[..., 0]
        idx = np.take_along_axis(idx.reshape(reps, -1, n), pick[..., None], axis=2)[..., 0]
    return idx[:, 0]


def draw_batch(
    spec: SchemeSpec,
    p: ModelParams,
    rng: np.random.Generator,
    reps: int,
    *,
    keep_sets: bool = False,
    literal_stages: bool = False,
) -> SampleBatch | tuple[SampleBatch, dict]:
    """Physically simulate ``reps`` samples of ``spec``.

    With ``keep_sets`` the raw (x, y) arrays of every set are returned as a
    second value, keyed by set_index.  ``literal_stages`` makes msrss/urss
    select the maximum stage by stage instead of in one step.
    """
    _check_lambda_for(spec, p)
    if spec.kind == "ussrss":
        # no finite physical protocol exists for the steady-state limit
        batch = draw_direct_batch(spec, p, rng, reps)
        return (batch, {}) if keep_sets else batch
    layout = spec.layout()
    set_ids = sorted({s for s, _ in layout})
    children = dict(zip(set_ids, rng.spawn(len(set_ids))))
    m = len(layout)
    ys = np.empty((reps, m))
    xs = np.empty((reps, m))
    raw = {}
    cols_by_set: dict[int, list[tuple[int, int]]] = {}
    for col, (s, r) in enumerate(layout):
        cols_by_set.setdefault(s, []).append((col, r))

    unbalanced = spec.kind in ("urss", "msrss")
    if unbalanced:
        stages = spec.stages
        group = spec.n**stages
        if literal_stages and spec.n ** (stages + 1) > LITERAL_STAGE_LIMIT:
            raise ValueError(f"literal staging is limited to n**(l+1) <= {LITERAL_STAGE_LIMIT}")
    else:
        group = spec.n

    for s in set_ids:
        u, v = model.copula_uniforms(p.lam, children[s], (reps, group))
        if unbalanced:
            if literal_stages:
                picks = {spec.n: _staged_argmax(u, spec.n, stages)}
            else:
                picks = {spec.n: u.argmax(axis=1)}
        else:
            order = np.argsort(u, axis=1)
            picks = {r: order[:, r - 1] for _, r in cols_by_set[s]}
        for col, r in cols_by_set[s]:
            j = picks[r][:, None]
            xs[:, col] = model.marginal_quantile(p.alpha1, p.theta1, np.take_along_axis(u, j, axis=1)[:, 0])
            ys[:, col] = model.marginal_quantile(p.alpha2, p.theta2, np.take_along_axis(v, j, axis=1)[:, 0])
        if keep_sets:
            raw[s] = (
                np.asarray(model.marginal_quantile(p.alpha1, p.theta1, u)),
                np.asarray(model.marginal_quantile(p.alpha2, p.theta2, v)),
            )
    batch = SampleBatch(spec, ys, xs)
    return (batch, raw) if keep_sets else batch


def draw(
    spec: SchemeSpec,
    p: ModelParams,
    rng: np.random.Generator,
    *,
    keep_sets: bool = False,
    literal_stages: bool = False,
) -> RankedSample:
    """Draw one ranked sample by building and ranking every set.

    With ``keep_sets`` the sample's ``raw_sets`` holds the generated (x, y)
    arrays of each set, for structural checks.
    """
    batch, raw = draw_batch(spec, p, rng, 1, keep_sets=True, literal_stages=literal_stages)
    sample = batch.sample(0)
    if keep_sets:
        sample.raw_sets = {s: (x[0], y[0]) for s, (x, y) in raw.items()}
    return sample


def draw_direct_batch(spec: SchemeSpec, p: ModelParams, rng: np.random.Generator, reps: int) -> SampleBatch:
    if spec.kind == "erss2":
        raise ValueError("erss2 cannot be sampled directly: its min and max units come from one set and are dependent")
    _check_lambda_for(spec, p)
    laws = spec.observation_laws(p.alpha2, p.theta2, p.lam)
    children = rng.spawn(len(laws))
    ys = np.column_stack([law.rvs(child, reps) for law, child in zip(laws, children)])
    return SampleBatch(spec, ys, None)


def draw_direct(spec: SchemeSpec, p: ModelParams, rng: np.random.Generator) -> RankedSample:
    """Draw one sample by inverting each observation's concomitant law (no x values)."""
    return draw_direct_batch(spec, p, rng, 1).sample(0)
