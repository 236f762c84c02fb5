"""Procedural indoor scenes with exact depth.

A scene is a floor plane, a back wall and a handful of axis-aligned boxes
standing on the floor. Every frame of a scene looks at the same layout from
a slightly moved camera. Rays are cast per pixel and the nearest hit wins, so
depth is the analytic z-buffer and instances name the winning primitive.

World axes match the camera at rest: x right, y down, z forward.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from dataclasses_json import dataclass_json

from segdepth.core.rng import Rng
from segdepth.geometry.camera import Intrinsics, pixel_rays
from segdepth.model.config import ConfigError
from segdepth.utils.dataclass import KeyValueError, dataclass_from_key_values
from segdepth.vision.netpbm import bytes_to_image, image_to_bytes

logger = logging.getLogger(__name__)


class PrimitiveKind(enum.Enum):
    wall = "wall"
    floor = "floor"
    box = "box"


@dataclass_json
@dataclass
class SceneSpec:
    """Ranges the scene generator draws from."""

    #: Inclusive range of box counts
    n_boxes: Tuple[int, int] = (2, 6)

    #: Range of box centre depths in metres
    box_depth: Tuple[float, float] = (2.0, 4.0)

    #: Range of the back wall depth
    wall_depth: Tuple[float, float] = (5.0, 8.0)

    #: Camera height above the floor
    camera_height: Tuple[float, float] = (1.0, 1.5)

    #: Range of box edge lengths
    box_size: Tuple[float, float] = (0.3, 1.2)

    floor: bool = True

    #: The wall closes the view, a scene without it leaves pixels without depth
    wall: bool = True

    #: Direction towards the light, camera axes
    light_direction: Tuple[float, float, float] = (-0.3, -1.0, -0.5)

    #: Light reaching surfaces facing away from the light
    ambient: float = 0.3

    #: Largest camera move between frames of one scene, metres
    camera_jitter: float = 0.25

    def __post_init__(self):
        self.validate()

    def validate(self):
        """:raise ConfigError: on an empty range or a scene that cannot fill the view"""
        for name in ("n_boxes", "box_depth", "wall_depth", "camera_height", "box_size"):
            low, high = getattr(self, name)
            if low > high:
                raise ConfigError(f"Empty range {name}: {low} > {high}")
        if self.n_boxes[0] < 0:
            raise ConfigError(f"Box count cannot be negative: {self.n_boxes}")
        if not self.wall:
            raise ConfigError("A scene without the back wall leaves the view frustum open")
        if self.box_depth[0] - self.box_size[1] / 2 <= self.camera_jitter:
            raise ConfigError("Boxes can reach the camera")
        if self.box_depth[1] + self.box_size[1] / 2 >= self.wall_depth[0]:
            raise ConfigError("Boxes can pierce the back wall")
        if self.camera_height[0] <= self.camera_jitter:
            raise ConfigError("The camera can drop below the floor")
        if not (0 <= self.ambient <= 1):
            raise ConfigError(f"Ambient light must be in [0, 1], got {self.ambient}")

    @classmethod
    def from_key_values(cls, values: dict[str, str]) -> "SceneSpec":
        try:
            return dataclass_from_key_values(cls, values)
        except KeyValueError as e:
            raise ConfigError(str(e)) from e


@dataclass
class Primitive:
    """One surface of a scene in world coordinates."""

    kind: PrimitiveKind

    #: RGB albedo in [0, 1]
    colour: np.ndarray

    #: Plane offset along its axis for walls and floors (z for the wall, y for the floor)
    offset: float = 0.0

    #: Box corners, min and max per axis
    low: Optional[np.ndarray] = None

    high: Optional[np.ndarray] = None

    def contains(self, points: np.ndarray, tolerance: float = 1e-5) -> np.ndarray:
        """Which world points lie on the primitive's surface."""
        match self.kind:
            case PrimitiveKind.wall:
                return np.abs(points[:, 2] - self.offset) < tolerance
            case PrimitiveKind.floor:
                return np.abs(points[:, 1] - self.offset) < tolerance
            case PrimitiveKind.box:
                inside = np.all((points >= self.low - tolerance) & (points <= self.high + tolerance), axis=1)
                on_face = np.any((np.abs(points - self.low) < tolerance) | (np.abs(points - self.high) < tolerance), axis=1)
                return inside & on_face
        raise AssertionError(f"Unknown primitive {self.kind}")


@dataclass
class Sample:
    """One rendered frame with exact ground truth."""

    #: h×w×3 float32 in [0, 1]
    image: np.ndarray

    #: h×w float32 metres, valid everywhere
    depth: np.ndarray

    #: h×w int32 primitive ids, contiguous from 0
    instances: np.ndarray

    scene_id: int = 0

    frame_id: int = 0

    intrinsics: Optional[Intrinsics] = None

    #: Primitive per instance id, only known for freshly generated samples
    primitives: Optional[list[Primitive]] = field(default=None, repr=False)

    #: World position of the camera, only known for freshly generated samples
    camera_position: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> tuple[int, int]:
        return self.depth.shape

    @property
    def stem(self) -> str:
        return f"scene{self.scene_id:04d}_frame{self.frame_id:02d}"


@dataclass
class _Layout:
    primitives: list[Primitive]
    floor_y: float
    wall_z: float


def _layout(rng: Rng, spec: SceneSpec, intrinsics: Intrinsics, width: int) -> _Layout:
    floor_y = float(rng.uniform(*spec.camera_height))
    wall_z = float(rng.uniform(*spec.wall_depth))
    primitives = [Primitive(PrimitiveKind.wall, rng.uniform(0.3, 0.9, 3), offset=wall_z)]
    if spec.floor:
        primitives.append(Primitive(PrimitiveKind.floor, rng.uniform(0.3, 0.9, 3), offset=floor_y))

    n_boxes = int(rng.integers(spec.n_boxes[0], spec.n_boxes[1] + 1))
    half_fov = (width / 2) / intrinsics.fx
    for _ in range(n_boxes):
        size = rng.uniform(*spec.box_size, size=3)
        z = float(rng.uniform(*spec.box_depth))
        reach = max(0.0, 0.8 * z * half_fov - size[0] / 2)
        x = float(rng.uniform(-reach, reach))
        low = np.array([x - size[0] / 2, floor_y - size[1], z - size[2] / 2])
        high = np.array([x + size[0] / 2, floor_y, z + size[2] / 2])
        primitives.append(Primitive(PrimitiveKind.box, rng.uniform(0.1, 1.0, 3), low=low, high=high))
    return _Layout(primitives=primitives, floor_y=floor_y, wall_z=wall_z)


def _intersect(primitive: Primitive, origin: np.ndarray, rays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ray parameter and surface normal of the first hit, inf where missed."""
    t = np.full(rays.shape[:-1], np.inf)
    normals = np.zeros(rays.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        match primitive.kind:
            case PrimitiveKind.wall:
                hit = (primitive.offset - origin[2]) / rays[..., 2]
                t = np.where(hit > 0, hit, np.inf)
                normals[..., 2] = -1
            case PrimitiveKind.floor:
                hit = (primitive.offset - origin[1]) / rays[..., 1]
                t = np.where((rays[..., 1] > 0) & (hit > 0), hit, np.inf)
                normals[..., 1] = -1
            case PrimitiveKind.box:
                t1 = (primitive.low - origin) / rays
                t2 = (primitive.high - origin) / rays
                near = np.minimum(t1, t2)
                far = np.maximum(t1, t2)
                # Rays parallel to a slab miss unless they start inside it
                parallel = rays == 0
                inside = (origin >= primitive.low) & (origin <= primitive.high)
                near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
                far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
                t_near = near.max(axis=-1)
                t_far = far.min(axis=-1)
                hit = (t_near <= t_far) & (t_near > 0)
                t = np.where(hit, t_near, np.inf)
                axis = np.argmax(near, axis=-1)
                sign = -np.sign(np.take_along_axis(rays, axis[..., None], axis=-1))[..., 0]
                np.put_along_axis(normals, axis[..., None], sign[..., None], axis=-1)
    return t, normals


def render(
        primitives: list[Primitive],
        camera_position: np.ndarray,
        intrinsics: Intrinsics,
        size: tuple[int, int],
        light_direction: np.ndarray,
        ambient: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cast one ray per pixel.

    :return:
        Depth (ray parameter at unit z), winning primitive index, shaded float image
    """
    height, width = size
    rays = pixel_rays(height, width, intrinsics)
    hits = [_intersect(p, camera_position, rays) for p in primitives]
    depths = np.stack([t for t, _ in hits])
    winner = np.argmin(depths, axis=0)
    depth = np.take_along_axis(depths, winner[None], axis=0)[0]
    assert np.all(np.isfinite(depth)), "Rays escaped the scene"

    normals = np.stack([n for _, n in hits])
    normal = np.take_along_axis(normals, winner[None, ..., None], axis=0)[0]
    light = np.asarray(light_direction, dtype=np.float64)
    light = light / np.linalg.norm(light)
    lambert = np.clip((normal * light).sum(axis=-1), 0, None)
    shade = ambient + (1 - ambient) * lambert
    albedo = np.stack([p.colour for p in primitives])[winner]
    image = albedo * shade[..., None]
    return depth, winner, image


def generate_scene(seed: int, spec: SceneSpec, size: tuple[int, int], intrinsics: Optional[Intrinsics] = None, scene_id: int = 0, frame_id: int = 0) -> Sample:
    """Render one frame of a procedural scene.

    The layout depends on (seed, scene_id), the camera move on frame_id as well.

    :param size:
        Output (height, width)
    """
    height, width = size
    if intrinsics is None:
        intrinsics = Intrinsics.default_for(height, width)
    scene_rng = Rng(seed).child(f"scene-{scene_id}")
    layout = _layout(scene_rng.child("layout"), spec, intrinsics, width)

    jitter = scene_rng.child(f"frame-{frame_id}").uniform(-spec.camera_jitter, spec.camera_jitter, size=3)
    camera = np.array([jitter[0], jitter[1] * 0.5, jitter[2]])

    depth, winner, shaded = render(layout.primitives, camera, intrinsics, size, spec.light_direction, spec.ambient)

    present, instances = np.unique(winner, return_inverse=True)
    instances = instances.reshape(size).astype(np.int32)
    primitives = [layout.primitives[i] for i in present]

    image = bytes_to_image(image_to_bytes(shaded))
    logger.debug("Scene %d frame %d: %d primitives visible", scene_id, frame_id, len(primitives))
    return Sample(
        image=image,
        depth=depth.astype(np.float32),
        instances=instances,
        scene_id=scene_id,
        frame_id=frame_id,
        intrinsics=intrinsics,
        primitives=primitives,
        camera_position=camera,
    )


def generate_dataset(n_scenes: int, frames_per_scene: int, size: tuple[int, int], seed: int, spec: Optional[SceneSpec] = None) -> list[Sample]:
    """Scenes 0..n-1, each rendered from `frames_per_scene` camera positions."""
    spec = spec or SceneSpec()
    return [
        generate_scene(seed, spec, size, scene_id=scene, frame_id=frame)
        for scene in range(n_scenes)
        for frame in range(frames_per_scene)
    ]
