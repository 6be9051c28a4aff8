"""Catchment geometry, minimal ESRI shapefile I/O, and opaque assets.

Only the main (.shp) file is understood, and only two shape types: point
and polygon. Containment runs planar even-odd on lon/lat, which is fine at
basin scale; areas use spherical excess on a 6371 km sphere.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import (
    BadMagic,
    TruncatedRecord,
    UnsupportedShapeType,
    ValidationError,
)

SHAPEFILE_MAGIC = 9994
SHAPE_POINT = 1
SHAPE_POLYGON = 5
HEADER_BYTES = 100
EARTH_RADIUS_KM = 6371.0
DEFAULT_ASSET_LIMIT = 512 * 1024 * 1024


@dataclass(frozen=True)
class Polygon:
    """Closed rings of (lon, lat); first ring is the boundary, the rest holes."""

    rings: tuple  # ((lon, lat), ...) per ring

    def __post_init__(self):
        if not self.rings:
            raise ValidationError("polygon needs at least one ring")
        for ring in self.rings:
            if len(ring) < 4:
                raise ValidationError("ring needs at least 4 vertices")
            if ring[0] != ring[-1]:
                raise ValidationError("ring must close (first vertex == last)")
            for lon, lat in ring:
                if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
                    raise ValidationError(f"vertex ({lon}, {lat}) outside WGS84 bounds")

    @property
    def outer(self) -> tuple:
        return self.rings[0]

    @property
    def holes(self) -> tuple:
        return self.rings[1:]

    def bbox(self) -> tuple[float, float, float, float]:
        xs = [lon for ring in self.rings for lon, _ in ring]
        ys = [lat for ring in self.rings for _, lat in ring]
        return (min(xs), min(ys), max(xs), max(ys))

    def to_json_obj(self) -> dict:
        return {"rings": [[[lon, lat] for lon, lat in ring] for ring in self.rings]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Polygon":
        return cls(rings=tuple(tuple((float(p[0]), float(p[1])) for p in ring)
                               for ring in obj["rings"]))


def _on_segment(px: float, py: float, x1: float, y1: float, x2: float, y2: float) -> bool:
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    if cross != 0.0:
        return False
    return min(x1, x2) <= px <= max(x1, x2) and min(y1, y2) <= py <= max(y1, y2)


def point_in_polygon(point: tuple[float, float], poly: Polygon) -> bool:
    """Even-odd containment; points exactly on an edge or vertex are inside."""
    px, py = point
    for ring in poly.rings:
        for i in range(len(ring) - 1):
            x1, y1 = ring[i]
            x2, y2 = ring[i + 1]
            if _on_segment(px, py, x1, y1, x2, y2):
                return True
    inside = False
    for ring in poly.rings:
        for i in range(len(ring) - 1):
            x1, y1 = ring[i]
            x2, y2 = ring[i + 1]
            if (y1 > py) != (y2 > py):
                x_cross = (x2 - x1) * (py - y1) / (y2 - y1) + x1
                if px < x_cross:
                    inside = not inside
    return inside


def ring_area_km2(ring: Sequence[tuple[float, float]]) -> float:
    """Unsigned spherical area of one closed ring (line-integral excess form)."""
    total = 0.0
    for i in range(len(ring) - 1):
        lon1, lat1 = ring[i]
        lon2, lat2 = ring[i + 1]
        l1 = math.radians(lon1)
        l2 = math.radians(lon2)
        f1 = math.radians(lat1)
        f2 = math.radians(lat2)
        total += (l2 - l1) * (2.0 + math.sin(f1) + math.sin(f2))
    return abs(total) * EARTH_RADIUS_KM * EARTH_RADIUS_KM / 2.0


def polygon_area_km2(poly: Polygon) -> float:
    """Outer ring area minus hole areas, in square kilometers."""
    area = ring_area_km2(poly.outer)
    for hole in poly.holes:
        area -= ring_area_km2(hole)
    return area


@dataclass(frozen=True)
class Catchment:
    """A drainage area; ``parent_id`` builds the basin / sub-catchment tree."""

    id: str
    name: str
    geometry: Polygon
    parent_id: Optional[str] = None

    @property
    def area_km2(self) -> float:
        return polygon_area_km2(self.geometry)


def catchment_depth(catchment_id: str, by_id: dict) -> int:
    depth = 0
    seen = set()
    cur = by_id[catchment_id]
    while cur.parent_id is not None:
        if cur.id in seen:
            raise ValidationError(f"catchment hierarchy cycle at {cur.id}")
        seen.add(cur.id)
        cur = by_id[cur.parent_id]
        depth += 1
    return depth


def containing_catchment(point: tuple[float, float],
                         catchments: Sequence[Catchment]) -> Optional[str]:
    """Id of the deepest catchment containing the point, if any."""
    by_id = {c.id: c for c in catchments}
    best: Optional[str] = None
    best_depth = -1
    for c in sorted(catchments, key=lambda c: c.id):
        if point_in_polygon(point, c.geometry):
            d = catchment_depth(c.id, by_id)
            if d > best_depth:
                best = c.id
                best_depth = d
    return best


class AssetKind(str, enum.Enum):
    VECTOR = "vector"
    RASTER = "raster"
    DOCUMENT = "document"


@dataclass(frozen=True)
class Asset:
    """Opaque stored bytes: shapefiles, rasters, documents. Content is not
    interpreted beyond optional shapefile geometry extraction."""

    id: str
    kind: AssetKind
    filename: str
    byte_size: int
    checksum: str
    bbox: Optional[tuple[float, float, float, float]] = None
    record_id: Optional[str] = None

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "filename": self.filename,
            "byteSize": self.byte_size,
            "checksum": self.checksum,
            "bbox": list(self.bbox) if self.bbox else None,
        }


def _read(buf: bytes, offset: int, fmt: str) -> tuple:
    size = struct.calcsize(fmt)
    if offset + size > len(buf):
        raise TruncatedRecord(f"needed {size} bytes at offset {offset}, file has {len(buf)}")
    return struct.unpack_from(fmt, buf, offset)


def parse_shapefile_geometry(data: bytes):
    """Geometries from a shapefile main file.

    Returns a list of (lon, lat) tuples for a point file or a list of
    Polygon for a polygon file. The magic file code (9994, big-endian at
    offset 0) is checked before anything else; every other shape type is
    rejected by number.
    """
    if len(data) < HEADER_BYTES:
        raise TruncatedRecord(f"header needs {HEADER_BYTES} bytes, got {len(data)}")
    (magic,) = _read(data, 0, ">i")
    if magic != SHAPEFILE_MAGIC:
        raise BadMagic(f"file code {magic}, expected {SHAPEFILE_MAGIC}")
    (file_type,) = _read(data, 32, "<i")
    if file_type not in (SHAPE_POINT, SHAPE_POLYGON):
        raise UnsupportedShapeType(file_type)

    shapes = []
    offset = HEADER_BYTES
    while offset < len(data):
        _, content_words = _read(data, offset, ">ii")
        offset += 8
        content_end = offset + content_words * 2
        (rec_type,) = _read(data, offset, "<i")
        if rec_type != file_type:
            raise UnsupportedShapeType(rec_type)
        if rec_type == SHAPE_POINT:
            x, y = _read(data, offset + 4, "<2d")
            shapes.append((x, y))
        else:
            num_parts, num_points = _read(data, offset + 36, "<2i")
            parts = _read(data, offset + 44, f"<{num_parts}i")
            pts_off = offset + 44 + 4 * num_parts
            flat = _read(data, pts_off, f"<{2 * num_points}d")
            points = [(flat[2 * i], flat[2 * i + 1]) for i in range(num_points)]
            rings = []
            for p in range(num_parts):
                lo = parts[p]
                hi = parts[p + 1] if p + 1 < num_parts else num_points
                rings.append(tuple(points[lo:hi]))
            shapes.append(Polygon(rings=tuple(rings)))
        offset = content_end
    return shapes


def _header(file_words: int, shape_type: int,
            bbox: tuple[float, float, float, float]) -> bytes:
    head = struct.pack(">i20xi", SHAPEFILE_MAGIC, file_words)
    head += struct.pack("<ii", 1000, shape_type)
    head += struct.pack("<4d", *bbox)
    head += struct.pack("<4d", 0.0, 0.0, 0.0, 0.0)
    return head


def build_point_shapefile(points: Sequence[tuple[float, float]]) -> bytes:
    """Assemble a main file holding point records (fixtures and exports)."""
    records = b""
    for i, (x, y) in enumerate(points, start=1):
        content = struct.pack("<i2d", SHAPE_POINT, x, y)
        records += struct.pack(">ii", i, len(content) // 2) + content
    xs = [x for x, _ in points] or [0.0]
    ys = [y for _, y in points] or [0.0]
    bbox = (min(xs), min(ys), max(xs), max(ys))
    head = _header((HEADER_BYTES + len(records)) // 2, SHAPE_POINT, bbox)
    return head + records


def build_polygon_shapefile(polygons: Sequence[Polygon]) -> bytes:
    """Assemble a main file holding polygon records with ring structure."""
    records = b""
    for i, poly in enumerate(polygons, start=1):
        points = [p for ring in poly.rings for p in ring]
        parts = []
        acc = 0
        for ring in poly.rings:
            parts.append(acc)
            acc += len(ring)
        content = struct.pack("<i4d", SHAPE_POLYGON, *poly.bbox())
        content += struct.pack("<2i", len(poly.rings), len(points))
        content += struct.pack(f"<{len(parts)}i", *parts)
        content += struct.pack(f"<{2 * len(points)}d", *[c for p in points for c in p])
        records += struct.pack(">ii", i, len(content) // 2) + content
    if polygons:
        boxes = [p.bbox() for p in polygons]
        bbox = (min(b[0] for b in boxes), min(b[1] for b in boxes),
                max(b[2] for b in boxes), max(b[3] for b in boxes))
    else:
        bbox = (0.0, 0.0, 0.0, 0.0)
    head = _header((HEADER_BYTES + len(records)) // 2, SHAPE_POLYGON, bbox)
    return head + records
