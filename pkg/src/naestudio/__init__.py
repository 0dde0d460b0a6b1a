"""Hierarchical sound deconstruction and manipulation with non-negative autoencoders."""

from .audio import load_wav, save_wav
from .deconstruct import ComponentSet, LayerView, extract, export_view, hierarchical_select
from .errors import (
    ConfigError,
    FormatError,
    InputError,
    IoError,
    NaestudioError,
    NumericError,
    ProvenanceError,
    ShapeError,
)
from .manipulate import (
    ManipulationOp,
    ManipulationScript,
    apply_op,
    apply_script,
    permute_columns,
    randomize_multiplicative,
    randomize_replace,
    scale_column,
    set_weight,
)
from .model import (
    NaeConfig,
    NaeModel,
    decode,
    encode,
    forward,
    init_model,
    load_model,
    model_hash,
    save_model,
)
from .resynth import (
    RenderSpec,
    RenderedComponent,
    bounded_mask,
    component_spectrogram,
    conservative_mask,
    render,
    render_component,
)
from .stft import Spectrogram, StftParams, analyze, synthesize
from .training import (
    TrainConfig,
    TrainReport,
    gkl_loss,
    gradients,
    loss_with_sparsity,
    project_nonnegative,
    rmsprop_step,
    train,
)

__version__ = "0.1.0"
