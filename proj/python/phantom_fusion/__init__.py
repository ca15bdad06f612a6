"""Camera-LiDAR phantom object injection toolkit."""

from ._core import (
    AttackOutcome,
    AttemptAborted,
    Box3D,
    Calibration,
    ConfigError,
    Detection,
    Dims,
    PhantomError,
    Scene,
    TemplateLibrary,
    bev_iou,
    cli,
    detect,
    extract_templates,
    load_scene,
    parse_calibration,
    project,
    read_points,
    reference_calibration,
    render_bev,
    render_overlay,
    render_summary_log,
    rotation_y_from_yaw,
    run_campaign,
    summarize_log,
    write_points,
    write_synthetic_dataset,
    yaw_from_rotation_y,
)

__all__ = [name for name in dir() if not name.startswith("_")]
