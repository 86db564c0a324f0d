"""Monocular 3D instrument tracking from segmentation label maps.

Pipeline: label frames -> per-part binary masks -> outer contours ->
minimum-area oriented boxes and ordered corners -> frame-to-frame 3D
translation and rotation estimates. A synthetic scene generator with exact
ground truth closes the loop for end-to-end error analysis.
"""

from .errors import (
    ConfigError,
    DataError,
    FrameFormatError,
    GeometryError,
    InvariantError,
    ProjectionError,
    SequenceGapError,
    ToolTrackError,
)
from .frames_io import (
    CameraModel,
    LabelFrame,
    PartConfig,
    TrackConfig,
    TrackerOptions,
    load_config,
    load_sequence,
    save_config,
    save_sequence,
)
from .geom2d import (
    AABB,
    OrientedBox,
    canonical_order,
    centroid,
    convex_hull,
    corners_from_box,
    edge_directions,
    internal_angles,
    min_area_rect,
    quad_fit,
    shoelace_area,
)
from .contours import (
    BinaryMask,
    Component,
    Contour,
    connected_components,
    mask_by_range,
    rect_bound,
    trace_outer_contour,
)
from .tracker2d import Frame2DResult, PartDetection, bound_box, track_sequence_2d
from .pose3d import (
    AngleFeatures,
    InstrumentTrack,
    PartPose,
    angle_features,
    depth_estimate,
    detect_camera_motion,
    pose_step,
    rotation_zyx,
    scale_change,
    track_from_results,
    track_instrument,
    translation_matrix,
)
from .evaluate import ErrorReport, ErrorStat, aggregate_runs, compare_2d, compare_3d, report_render
from .export import (
    SceneCylinder,
    SceneFrame,
    build_scene,
    export_scene,
    read_scene,
    read_track_csv,
    read_track_json,
    write_boxes_csv,
    write_scene,
    write_track_csv,
    write_track_json,
)
from . import synth

__version__ = "0.1.0"
