"""Synthetic scenes of attributed, boxed objects.

Scenes stand in for images: each object has a category, a set of categorical
attributes (some optional, so "not applicable" answers are reachable) and an
axis-aligned box inside the unit square. Generation is a pure function of
(config, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .seeding import rng_for

SCENE_SCHEMA_VERSION = 1

# attempts to hit the "two objects differ" invariant before giving up
_RESAMPLE_ATTEMPTS = 64


class DegenerateConfigError(ValueError):
    """Raised when a world config cannot produce a non-degenerate scene."""


@dataclass(frozen=True)
class AttributeSpec:
    values: tuple[str, ...]
    presence: float = 1.0

    def __post_init__(self):
        if not self.values:
            raise ValueError("attribute needs at least one value")
        if not 0.0 <= self.presence <= 1.0:
            raise ValueError(f"presence must be in [0, 1], got {self.presence}")


@dataclass(frozen=True)
class GenConfig:
    categories: tuple[str, ...] = ("dog", "cat", "car", "tree", "chair", "ball")
    attributes: dict[str, AttributeSpec] = field(
        default_factory=lambda: {
            "color": AttributeSpec(("red", "green", "blue", "yellow"), presence=0.9),
            "size": AttributeSpec(("small", "large"), presence=1.0),
        }
    )
    n_objects_min: int = 8
    n_objects_max: int = 8

    def __post_init__(self):
        if not self.categories:
            raise ValueError("world needs at least one category")
        if self.n_objects_min < 2:
            raise ValueError("object-count range must start at 2 or more")
        if self.n_objects_max < self.n_objects_min:
            raise ValueError("n_objects_max < n_objects_min")


@dataclass(frozen=True)
class SceneObject:
    id: int
    category: str
    attributes: dict[str, str]
    box: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
            raise ValueError(f"bad box {self.box}")


@dataclass(frozen=True)
class Scene:
    id: int
    objects: tuple[SceneObject, ...]
    split: str = "train"

    def __post_init__(self):
        if len(self.objects) < 2:
            raise ValueError("scene needs at least 2 objects")
        for n, obj in enumerate(self.objects):
            if obj.id != n:
                raise ValueError("object ids must be 0..N-1 in order")

    @property
    def n_objects(self) -> int:
        return len(self.objects)


@dataclass(frozen=True)
class GameInstance:
    scene: Scene
    target_id: int

    def __post_init__(self):
        if not 0 <= self.target_id < self.scene.n_objects:
            raise ValueError(f"target_id {self.target_id} not in scene")


def _sample_object(oid: int, cfg: GenConfig, rng: np.random.Generator) -> SceneObject:
    category = cfg.categories[rng.integers(len(cfg.categories))]
    attributes = {}
    for name, spec in cfg.attributes.items():
        if rng.random() < spec.presence:
            attributes[name] = spec.values[rng.integers(len(spec.values))]
    # sample a center and extent, then clip the box to the unit square
    cx, cy = rng.random(), rng.random()
    w, h = 0.05 + 0.3 * rng.random(), 0.05 + 0.3 * rng.random()
    x0 = float(np.clip(cx - w / 2, 0.0, 1.0 - 1e-3))
    y0 = float(np.clip(cy - h / 2, 0.0, 1.0 - 1e-3))
    x1 = float(np.clip(cx + w / 2, x0 + 1e-3, 1.0))
    y1 = float(np.clip(cy + h / 2, y0 + 1e-3, 1.0))
    return SceneObject(id=oid, category=category, attributes=attributes, box=(x0, y0, x1, y1))


def _distinguishable(objects: list[SceneObject]) -> bool:
    """True when at least two objects differ in category or some attribute."""
    first = objects[0]
    for obj in objects[1:]:
        if obj.category != first.category or obj.attributes != first.attributes:
            return True
    return False


def generate_scene(cfg: GenConfig, seed: int, scene_id: int = 0, split: str = "train") -> Scene:
    """Generate one scene; identical (cfg, seed) gives an identical scene."""
    rng = rng_for(seed, "scene")
    for _ in range(_RESAMPLE_ATTEMPTS):
        n = int(rng.integers(cfg.n_objects_min, cfg.n_objects_max + 1))
        objects = [_sample_object(i, cfg, rng) for i in range(n)]
        if _distinguishable(objects):
            return Scene(id=scene_id, objects=tuple(objects), split=split)
    raise DegenerateConfigError(
        "could not sample a scene with two distinguishable objects; "
        "config has too few categories/attribute values"
    )


def assign_target(scene: Scene, seed: int) -> GameInstance:
    """Uniformly pick the hidden target object."""
    if scene.n_objects < 1:
        raise ValueError("empty scene")
    rng = rng_for(seed, "target")
    return GameInstance(scene=scene, target_id=int(rng.integers(scene.n_objects)))


def spatial_vector(obj: SceneObject) -> np.ndarray:
    """Box as [x_min, y_min, x_max, y_max, x_center, y_center, w, h]."""
    x0, y0, x1, y1 = obj.box
    return np.array(
        [x0, y0, x1, y1, (x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0],
        dtype=np.float64,
    )


def make_splits(
    n_train: int, n_test: int, cfg: GenConfig, seed: int
) -> tuple[list[Scene], list[Scene]]:
    """Disjoint train/test scene sets with globally unique ids."""
    if n_train < 1 or n_test < 1:
        raise ValueError("split sizes must be >= 1")
    train = [generate_scene_from_master(cfg, seed, "train", i) for i in range(n_train)]
    test = [
        generate_scene_from_master(cfg, seed, "test", n_train + i) for i in range(n_test)
    ]
    return train, test


def generate_scene_from_master(cfg: GenConfig, master: int, split: str, scene_id: int) -> Scene:
    from .seeding import derive_seed

    return generate_scene(cfg, derive_seed(master, f"scene-{split}", scene_id), scene_id, split)


# -- line-delimited scene files ------------------------------------------------


def scene_to_record(scene: Scene) -> dict:
    return {
        "kind": "scene",
        "schema": SCENE_SCHEMA_VERSION,
        "id": scene.id,
        "split": scene.split,
        "objects": [
            {"id": o.id, "category": o.category, "attributes": o.attributes, "box": list(o.box)}
            for o in scene.objects
        ],
    }


def scene_from_record(rec: dict) -> Scene:
    if rec.get("kind") != "scene" or rec.get("schema") != SCENE_SCHEMA_VERSION:
        raise ValueError(f"not a v{SCENE_SCHEMA_VERSION} scene record")
    objects = tuple(
        SceneObject(
            id=o["id"],
            category=o["category"],
            attributes=dict(o["attributes"]),
            box=tuple(float(v) for v in o["box"]),
        )
        for o in rec["objects"]
    )
    return Scene(id=rec["id"], objects=objects, split=rec["split"])


def write_scenes(path, scenes, header_extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"kind": "header", "schema": SCENE_SCHEMA_VERSION}
        header.update(header_extra or {})
        fh.write(json.dumps(header) + "\n")
        for scene in scenes:
            fh.write(json.dumps(scene_to_record(scene)) + "\n")


def read_scenes(path) -> list[Scene]:
    scenes = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("kind") == "header":
                continue
            scenes.append(scene_from_record(rec))
    return scenes
