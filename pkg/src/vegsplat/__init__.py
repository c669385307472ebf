"""Transfer-function-agnostic Gaussian splatting of scalar volume fields."""

from .camera import Camera, OrbitSpec, fit_zoom, generate_orbit, project_points, view_projection
from .colormaps import colormap_names, named_colormap
from .images import ImageBuffer
from .loss import compute_loss, ssim
from .metrics import EvalReport, psnr, run_benchmark, ssim_eval
from .model import (
    GaussianSet,
    VqModel,
    init_from_volume,
    init_random,
    load_model,
    save_model,
    vq_compress,
    vq_decompress,
)
from .raster import (
    GradientSet,
    ImageGradients,
    RasterSettings,
    rasterize_backward,
    rasterize_forward,
    render,
    render_with_state,
)
from .reference import RaymarchConfig, raymarch, render_dataset
from .train import TrainConfig, train
from .transfer import (
    ColorMap,
    OpacityMap,
    TransferFunction,
    eval_color,
    eval_opacity,
    linear_opacity_map,
    load_tf,
    make_scaled_opacity_maps,
    make_training_opacity_maps,
    save_tf,
)
from .volume import (
    StructuredVolume,
    UnstructuredVolume,
    generate_synthetic,
    load_structured,
    load_unstructured,
    sample,
)

__version__ = "0.1.0"
