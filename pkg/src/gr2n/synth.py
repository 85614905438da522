"""Synthetic social scenes with logically constrained relations.

A scene is assembled from group templates (one group per template), each fixing
how many people of each role it holds. Relations follow a rule table keyed by
``(role_i, role_j, same_group)``. Person features are a scaled role one-hot, a
group one-hot and Gaussian noise; an occluded person loses the role part
entirely (only noise remains there) while keeping the group cue, so its role
can only be recovered from the rest of the scene.

The default scenario is one nuclear family (father, mother, 1-3 children) and
a group of 1-3 guests who are friends with each other and with the parents.
An occluded family member's role is pinned down by which roles are visible
among the other family members, which a pairwise classifier cannot see.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .data import Scene


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class GroupTemplate:
    name: str
    roles: tuple[tuple[str, int, int], ...]  # (role, min count, max count)

    def role_ranges(self) -> dict[str, tuple[int, int]]:
        return {r: (lo, hi) for r, lo, hi in self.roles}


@dataclass(frozen=True)
class ScenarioSpec:
    roles: tuple[str, ...]
    groups: tuple[GroupTemplate, ...]
    class_names: tuple[str, ...]
    rules: tuple[tuple[str, str, bool, str], ...]  # (role_i, role_j, same_group, class name)
    min_people: int = 4
    max_people: int = 8
    sigma: float = 0.3
    p_occ: float = 0.3
    role_scale: float = 1.5
    group_scale: float = 1.0
    feature_dim: int = 16

    def __post_init__(self):
        if len(set(self.roles)) != len(self.roles):
            raise ScenarioError("duplicate role names")
        if len(set(self.class_names)) != len(self.class_names):
            raise ScenarioError("duplicate class names")
        table = {}
        for ri, rj, same, cls in self.rules:
            if ri not in self.roles or rj not in self.roles:
                raise ScenarioError(f"rule ({ri}, {rj}, {same}) uses an unknown role")
            if cls not in self.class_names:
                raise ScenarioError(f"rule ({ri}, {rj}, {same}) maps to unknown class {cls!r}")
            key = (ri, rj, bool(same))
            if key in table:
                raise ScenarioError(f"duplicate rule for {key}")
            table[key] = self.class_names.index(cls)
        for ri, rj, same in itertools.product(self.roles, self.roles, (True, False)):
            if (ri, rj, same) not in table:
                raise ScenarioError(f"rule table is not total: missing ({ri}, {rj}, same_group={same})")
        object.__setattr__(self, "_table", table)
        for g in self.groups:
            for r, lo, hi in g.roles:
                if r not in self.roles:
                    raise ScenarioError(f"group {g.name!r} uses unknown role {r!r}")
                if not 0 <= lo <= hi:
                    raise ScenarioError(f"group {g.name!r}: bad count range for {r!r}")
        if not 0.0 <= self.p_occ <= 1.0:
            raise ScenarioError(f"p_occ={self.p_occ} outside [0, 1]")
        if self.sigma < 0:
            raise ScenarioError("sigma must be non-negative")
        if self.feature_dim < len(self.roles) + len(self.groups):
            raise ScenarioError(
                f"feature_dim={self.feature_dim} too small for {len(self.roles)} role and "
                f"{len(self.groups)} group cue dimensions"
            )
        if not 1 <= self.min_people <= self.max_people:
            raise ScenarioError("need 1 <= min_people <= max_people")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def relation(self, role_i: str, role_j: str, same_group: bool) -> int:
        return self._table[(role_i, role_j, bool(same_group))]

    def with_(self, **changes) -> "ScenarioSpec":
        fields = self.to_dict()
        fields.update(changes)
        return ScenarioSpec.from_dict(fields)

    # serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "roles": list(self.roles),
            "groups": [
                {"name": g.name, "roles": [{"role": r, "min": lo, "max": hi} for r, lo, hi in g.roles]}
                for g in self.groups
            ],
            "class_names": list(self.class_names),
            "rules": [{"role_i": a, "role_j": b, "same_group": s, "class": c} for a, b, s, c in self.rules],
            "min_people": self.min_people,
            "max_people": self.max_people,
            "sigma": self.sigma,
            "p_occ": self.p_occ,
            "role_scale": self.role_scale,
            "group_scale": self.group_scale,
            "feature_dim": self.feature_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        groups = d.pop("groups")
        rules = d.pop("rules")
        try:
            return cls(
                roles=tuple(d.pop("roles")),
                groups=tuple(
                    GroupTemplate(g["name"], tuple((r["role"], int(r["min"]), int(r["max"])) for r in g["roles"]))
                    for g in groups
                ),
                class_names=tuple(d.pop("class_names")),
                rules=tuple((r["role_i"], r["role_j"], bool(r["same_group"]), r["class"]) for r in rules),
                **d,
            )
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed scenario document: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        return cls.from_dict(json.loads(text))


def default_scenario(**overrides) -> ScenarioSpec:
    classes = ("parent-child", "spouses", "siblings", "friends", "no-relation")
    roles = ("father", "mother", "child", "guest")
    parents = ("father", "mother")
    same = {
        ("father", "mother"): "spouses",
        ("mother", "father"): "spouses",
        ("child", "child"): "siblings",
        ("guest", "guest"): "friends",
    }
    for p in parents:
        same[(p, "child")] = same[("child", p)] = "parent-child"
    cross = {}
    for p in parents:
        cross[(p, "guest")] = cross[("guest", p)] = "friends"
    rules = []
    for ri, rj in itertools.product(roles, roles):
        rules.append((ri, rj, True, same.get((ri, rj), "no-relation")))
        rules.append((ri, rj, False, cross.get((ri, rj), "no-relation")))
    spec = ScenarioSpec(
        roles=roles,
        groups=(
            GroupTemplate("family", (("father", 1, 1), ("mother", 1, 1), ("child", 1, 3))),
            GroupTemplate("guests", (("guest", 1, 3),)),
        ),
        class_names=classes,
        rules=tuple(rules),
    )
    return spec.with_(**overrides) if overrides else spec


# --------------------------------------------------------------------------
# assignments and relations


@dataclass(frozen=True)
class RoleAssignment:
    roles: tuple[str, ...]
    groups: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.roles)


Composition = tuple[tuple[tuple[str, int], ...], ...]  # per group: ((role, count), ...)


@lru_cache(maxsize=None)
def compositions(spec: ScenarioSpec, n_people: int) -> tuple[Composition, ...]:
    """Every way to fill the group templates with exactly ``n_people`` people."""
    per_group = []
    for g in spec.groups:
        names = [r for r, _, _ in g.roles]
        ranges = [range(lo, hi + 1) for _, lo, hi in g.roles]
        per_group.append([tuple(zip(names, counts)) for counts in itertools.product(*ranges)])
    out = []
    for combo in itertools.product(*per_group):
        if sum(c for grp in combo for _, c in grp) == n_people:
            out.append(combo)
    return tuple(out)


def check_assignment(assignment: RoleAssignment, spec: ScenarioSpec) -> None:
    for gi, g in enumerate(spec.groups):
        for role, lo, hi in g.roles:
            c = sum(1 for r, grp in zip(assignment.roles, assignment.groups) if grp == gi and r == role)
            if not lo <= c <= hi:
                raise ScenarioError(f"group {g.name!r} holds {c} x {role!r}, template allows {lo}..{hi}")
        allowed = {r for r, _, _ in g.roles}
        extra = {r for r, grp in zip(assignment.roles, assignment.groups) if grp == gi} - allowed
        if extra:
            raise ScenarioError(f"group {g.name!r} holds roles outside its template: {sorted(extra)}")
    if any(not 0 <= grp < len(spec.groups) for grp in assignment.groups):
        raise ScenarioError("group index outside the scenario's templates")


def derive_relations(assignment: RoleAssignment, spec: ScenarioSpec) -> dict[tuple[int, int], int]:
    """Label every ordered pair of distinct people from the rule table."""
    check_assignment(assignment, spec)
    n = len(assignment)
    return {
        (i, j): spec.relation(assignment.roles[i], assignment.roles[j], assignment.groups[i] == assignment.groups[j])
        for i in range(n)
        for j in range(n)
        if i != j
    }


def render_features(
    assignment: RoleAssignment, spec: ScenarioSpec, noise: np.ndarray, occluded: np.ndarray
) -> np.ndarray:
    """Role cue (zeroed when occluded) + group cue + the given noise rows."""
    n, R = len(assignment), len(spec.roles)
    x = np.array(noise, dtype=np.float64, copy=True)
    if x.shape != (n, spec.feature_dim):
        raise ValueError(f"noise shape {x.shape} != ({n}, {spec.feature_dim})")
    for i, (role, grp) in enumerate(zip(assignment.roles, assignment.groups)):
        if not occluded[i]:
            x[i, spec.roles.index(role)] += spec.role_scale
        x[i, R + grp] += spec.group_scale
    return x


class GeneratedScene(NamedTuple):
    scene: Scene
    assignment: RoleAssignment
    occluded: np.ndarray


def sample_scene(spec: ScenarioSpec, n_people: int, seed, scene_id: str | None = None) -> GeneratedScene:
    """:func:`generate_scene` plus the hidden roles, groups and occlusion flags."""
    options = compositions(spec, n_people)
    if not options:
        raise ScenarioError(f"no group composition holds exactly {n_people} people")
    rng = np.random.default_rng(seed)
    combo = options[rng.integers(len(options))]
    roles, groups = [], []
    for gi, grp in enumerate(combo):
        for role, count in grp:
            roles += [role] * count
            groups += [gi] * count
    order = rng.permutation(n_people)
    assignment = RoleAssignment(tuple(roles[i] for i in order), tuple(groups[i] for i in order))
    noise = rng.normal(0.0, 1.0, size=(n_people, spec.feature_dim)) * spec.sigma
    occluded = rng.random(n_people) < spec.p_occ
    feats = render_features(assignment, spec, noise, occluded)
    if scene_id is None:
        scene_id = f"scene-{seed}"
    return GeneratedScene(Scene(scene_id, feats, derive_relations(assignment, spec)), assignment, occluded)


def generate_scene(spec: ScenarioSpec, n_people: int, seed, scene_id: str | None = None) -> Scene:
    return sample_scene(spec, n_people, seed, scene_id).scene


class Splits(NamedTuple):
    train: list[Scene]
    val: list[Scene]
    test: list[Scene]


def split_sizes(n_scenes: int) -> tuple[int, int, int]:
    n_train = int(round(0.8 * n_scenes))
    n_val = int(round(0.1 * n_scenes))
    return n_train, n_val, n_scenes - n_train - n_val


def scene_seeds(seed: int, n_scenes: int) -> list[np.random.SeedSequence]:
    """Scene ``i`` uses child ``i`` of ``SeedSequence(seed)``."""
    return np.random.SeedSequence(seed).spawn(n_scenes)


def sample_dataset(spec: ScenarioSpec, n_scenes: int, seed: int) -> list[GeneratedScene]:
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    out = []
    for i, child in enumerate(scene_seeds(seed, n_scenes)):
        rng = np.random.default_rng(child)
        n_people = int(rng.integers(spec.min_people, spec.max_people + 1))
        out.append(sample_scene(spec, n_people, rng, scene_id=f"s{seed}-{i:05d}"))
    return out


def generate_dataset(spec: ScenarioSpec, n_scenes: int, seed: int) -> Splits:
    """``n_scenes`` independent scenes split 80/10/10 (in generation order) into train/val/test.

    The people count of each scene is uniform on [min_people, max_people].
    """
    scenes = [g.scene for g in sample_dataset(spec, n_scenes, seed)]
    n_train, n_val, _ = split_sizes(n_scenes)
    return Splits(scenes[:n_train], scenes[n_train : n_train + n_val], scenes[n_train + n_val :])


# --------------------------------------------------------------------------
# consistency


@dataclass(frozen=True)
class ConsistencyTables:
    """Label combinations that occur in some valid scene.

    ``inverse[p, q]``: rel(i, j) = p together with rel(j, i) = q is possible.
    ``compose[p, q, r]``: rel(a, b) = p, rel(b, c) = q, rel(a, c) = r is possible
    for three distinct people.
    """

    inverse: np.ndarray
    compose: np.ndarray


@lru_cache(maxsize=None)
def consistency_tables(spec: ScenarioSpec) -> ConsistencyTables:
    K = spec.num_classes
    inverse = np.zeros((K, K), dtype=bool)
    compose = np.zeros((K, K, K), dtype=bool)
    for n in range(spec.min_people, spec.max_people + 1):
        for combo in compositions(spec, n):
            people = [(role, gi) for gi, grp in enumerate(combo) for role, c in grp for _ in range(c)]
            for a, b in itertools.permutations(range(len(people)), 2):
                (ra, ga), (rb, gb) = people[a], people[b]
                inverse[spec.relation(ra, rb, ga == gb), spec.relation(rb, ra, ga == gb)] = True
            for a, b, c in itertools.permutations(range(len(people)), 3):
                (ra, ga), (rb, gb), (rc, gc) = people[a], people[b], people[c]
                compose[
                    spec.relation(ra, rb, ga == gb),
                    spec.relation(rb, rc, gb == gc),
                    spec.relation(ra, rc, ga == gc),
                ] = True
    return ConsistencyTables(inverse, compose)


def label_matrix(labels, n: int | None = None) -> np.ndarray:
    """Dense (n, n) label array from a pair map or an array; diagonal is -1."""
    if isinstance(labels, dict):
        if n is None:
            n = 1 + max((max(p) for p in labels), default=0)
        L = np.full((n, n), -1, dtype=np.int64)
        for (i, j), k in labels.items():
            L[i, j] = k
    else:
        L = np.array(labels, dtype=np.int64, copy=True)
        n = L.shape[0]
        np.fill_diagonal(L, -1)
    off = ~np.eye(n, dtype=bool)
    if (L[off] < 0).any():
        raise ValueError("labels must cover every ordered pair of distinct people")
    return L


class ConsistencyReport(NamedTuple):
    violations: int
    checked: int
    details: list[tuple]

    @property
    def rate(self) -> float:
        return self.violations / self.checked if self.checked else 0.0


def check_consistency(labels, spec: ScenarioSpec, n: int | None = None) -> ConsistencyReport:
    """Count violated pair-inverse and triple-composition implications.

    ``labels`` is a full ordered-pair map (dict) or an (n, n) class array.
    Details are ``("inverse", i, j)`` or ``("triple", a, b, c)`` tuples.
    """
    L = label_matrix(labels, n)
    K = spec.num_classes
    off = ~np.eye(L.shape[0], dtype=bool)
    if (L[off] >= K).any():
        raise ValueError(f"label outside [0, {K})")
    tables = consistency_tables(spec)
    n = L.shape[0]
    details: list[tuple] = []
    if n < 2:
        return ConsistencyReport(0, 0, details)
    i, j = np.nonzero(off)
    bad = ~tables.inverse[L[i, j], L[j, i]]
    details += [("inverse", int(a), int(b)) for a, b in zip(i[bad], j[bad])]
    checked = len(i)
    if n >= 3:
        a, b, c = np.array(list(itertools.permutations(range(n), 3))).T
        bad3 = ~tables.compose[L[a, b], L[b, c], L[a, c]]
        details += [("triple", int(x), int(y), int(z)) for x, y, z in zip(a[bad3], b[bad3], c[bad3])]
        checked += len(a)
    return ConsistencyReport(len(details), checked, details)


# --------------------------------------------------------------------------
# analytic label statistics


def expected_class_counts(spec: ScenarioSpec) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of per-scene class counts under the sampling scheme.

    Computed by enumerating every (people count, composition) outcome with its
    exact probability; independent of the random generator.
    """
    K = spec.num_classes
    sizes = range(spec.min_people, spec.max_people + 1)
    mean = np.zeros(K)
    second = np.zeros(K)
    for n in sizes:
        combos = compositions(spec, n)
        for combo in combos:
            p = 1.0 / len(sizes) / len(combos)
            counts = np.zeros(K)
            people = [(role, gi) for gi, grp in enumerate(combo) for role, c in grp for _ in range(c)]
            for (ra, ga), (rb, gb) in itertools.permutations(people, 2):
                counts[spec.relation(ra, rb, ga == gb)] += 1
            mean += p * counts
            second += p * counts**2
    return mean, second - mean**2


def scenes_feasible(spec: ScenarioSpec) -> list[int]:
    return [n for n in range(spec.min_people, spec.max_people + 1) if compositions(spec, n)]
