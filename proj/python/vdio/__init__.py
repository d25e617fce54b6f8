"""Visual-depth-inertial odometry.

Thin Python surface over the C++ core: dataset IO, multimodal keypoint
detection, binary descriptors, the streaming filter pipeline, full-dataset
playback, synthetic dataset generation, and trajectory metrics.

Images cross the boundary as numpy arrays: gray images are uint8 (H, W),
depth images float32 (H, W) in meters with 0 marking invalid pixels.
"""

from ._vdio import (
    DatasetReader,
    Pipeline,
    __version__,
    calibrate_dark_noise,
    detect_keypoints,
    evaluate_ate,
    extract_descriptors,
    hamming_distance,
    read_trajectory_csv,
    run_odometry,
    simulate_dataset,
)

__all__ = [
    "DatasetReader",
    "Pipeline",
    "__version__",
    "calibrate_dark_noise",
    "detect_keypoints",
    "evaluate_ate",
    "extract_descriptors",
    "hamming_distance",
    "read_trajectory_csv",
    "run_odometry",
    "simulate_dataset",
]
