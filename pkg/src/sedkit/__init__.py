"""sedkit: desk-scale polyphonic sound event detection with an
activity-detection auxiliary task.

Pipeline: synthesize annotated soundscapes -> 40-band log-mel features ->
frame targets -> multi-task training -> activity re-weighted posteriors ->
segment/event F1 and error-rate scoring.
"""

from .synth import (
    AudioClip,
    DatasetConfig,
    EventAnnotation,
    EventClassSpec,
    Placement,
    SoundscapeSpec,
    compose,
    gen_brownian_noise,
    render_event,
    sample_spec,
)
from .features import (
    FeatureMatrix,
    Spectrogram,
    extract_features,
    log_mel_normalize,
    mel_filterbank,
    stft_magnitude,
)
from .labels import FrameLabelMatrix, derive_sad, rasterize
from .model import (
    JointNet,
    LossWeights,
    NetworkConfig,
    TrainConfig,
    adam_step,
    bce,
    joint_loss,
    train,
)
from .postproc import binarize, decode_events, reweight
from .metrics import (
    IntermediateStats,
    MetricReport,
    evaluate_corpus,
    event_eval,
    micro_aggregate,
    segment_eval,
)
from .experiments import ExperimentConfig, ResultsTable, run_experiment, run_table, sweep

__version__ = "0.1.0"
