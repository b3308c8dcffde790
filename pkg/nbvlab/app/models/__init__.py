# Models module
from app.models.camera import RangeCamera
from app.models.mesh import Scene, TriangleMesh, load_mesh, parse_mesh_text
from app.models.occupancy_grid import OccupancyGrid, VoxelState, new_grid
from app.models.point_cloud import PointCloud
from app.models.primitives import PRIMITIVE_BUILDERS, make_object
from app.models.sample import Dataset, Sample
from app.models.view import View

__all__ = [
    # Poses and sensing
    "View",
    "RangeCamera",
    "PointCloud",
    # Geometry
    "TriangleMesh",
    "Scene",
    "load_mesh",
    "parse_mesh_text",
    "PRIMITIVE_BUILDERS",
    "make_object",
    # Partial model
    "OccupancyGrid",
    "VoxelState",
    "new_grid",
    # Datasets
    "Sample",
    "Dataset",
]
