"""kanforge: Kolmogorov-Arnold layer variants, a KAN-MLP mixer for sensor
windows, and a small deterministic training harness.

The hot basis kernels run on a compiled Cython core when available and fall
back to numpy otherwise; see kanforge.kernels.backend_name.
"""

from .layers import (
    GridSpec,
    LayerParams,
    LayerSpec,
    Sequential,
    default_grid,
    flops_estimate,
    forward_layer,
    init_layer,
    make_stack,
    param_count,
)
from .model import (
    Model,
    ModelSpec,
    WindowShape,
    build_model,
    fft_features,
    load_checkpoint,
    model_forward,
    save_checkpoint,
    split,
    split_windows,
)
from .tensor import (
    ShapeError,
    TapeError,
    Tensor,
    backward,
    grad_check,
    no_grad,
    softmax_cross_entropy,
)
from .training import (
    Adam,
    RunReport,
    TrainConfig,
    TrainingError,
    adam_step,
    macro_f1,
    rmse,
    run_experiment,
    train,
)

__version__ = "0.1.0"
