"""floodstream: double-buffered device streaming simulation and
flood-ensemble overlap analytics."""

from .analytics import (
    AccumulationGrid,
    AnalyticsError,
    CompositeImage,
    OverlapHistogram,
    accumulate,
    cluster_surfaces,
    composite_map,
    jaccard,
    outlier_scores,
    overlap_histogram,
    similarity_matrix,
)
from .bench import (
    BenchError,
    BenchReport,
    RateMap,
    SweepSpec,
    render_rate_map,
    run_dual_buffer_suite,
    run_kernel_comparison,
    run_transfer_baseline,
    run_transform_sweep,
)
from .calibration import (
    CalibrationError,
    CalibrationResult,
    calibrate_profile,
    load_profile,
    measured_reference_profile,
)
from .device import (
    ContentionModel,
    CsvTransformModel,
    DeviceProfile,
    PiecewiseCurve,
    ProfileError,
    SyntheticTransformModel,
    UnsupportedImageSize,
    kernel_time,
    synthetic_default_profile,
    transfer_time,
    transform_time,
)
from .rasters import RasterError, RasterSurface, load_surface
from .schedule import (
    Channel,
    OpKind,
    OpNode,
    ScheduleError,
    ScheduleGraph,
    Timeline,
    simulate,
)
from .stats import StatsError, welch_t_test
from .streaming import (
    PipelineRunReport,
    StreamError,
    StreamJob,
    Variant,
    build_schedule,
    closed_form_times,
    efficiency,
    max_data_per_frame,
    run_stream,
    simulate_stream_timing,
)

__version__ = "0.1.0"

__all__ = [
    "AccumulationGrid",
    "AnalyticsError",
    "BenchError",
    "BenchReport",
    "CalibrationError",
    "CalibrationResult",
    "Channel",
    "CompositeImage",
    "ContentionModel",
    "CsvTransformModel",
    "DeviceProfile",
    "OpKind",
    "OpNode",
    "OverlapHistogram",
    "PiecewiseCurve",
    "PipelineRunReport",
    "ProfileError",
    "RasterError",
    "RasterSurface",
    "RateMap",
    "ScheduleError",
    "ScheduleGraph",
    "StatsError",
    "StreamError",
    "StreamJob",
    "SweepSpec",
    "SyntheticTransformModel",
    "Timeline",
    "UnsupportedImageSize",
    "Variant",
    "accumulate",
    "build_schedule",
    "calibrate_profile",
    "closed_form_times",
    "cluster_surfaces",
    "composite_map",
    "efficiency",
    "jaccard",
    "kernel_time",
    "load_profile",
    "load_surface",
    "max_data_per_frame",
    "measured_reference_profile",
    "outlier_scores",
    "overlap_histogram",
    "render_rate_map",
    "run_dual_buffer_suite",
    "run_kernel_comparison",
    "run_stream",
    "run_transfer_baseline",
    "run_transform_sweep",
    "similarity_matrix",
    "simulate",
    "simulate_stream_timing",
    "synthetic_default_profile",
    "transfer_time",
    "transform_time",
    "welch_t_test",
]
