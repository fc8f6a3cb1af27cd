"""IMU surface recognition: scaler + PCA front end, bidirectional GRU
classifier, evaluation metrics and a streaming slippery-surface detector."""
from .dataset import (SurfaceClass, Stream, ImuSample, LabeledSeries, WindowView,
                      DatasetManifest, ManifestEntry, ColumnMapping, load_csv, save_csv,
                      load_manifest, save_manifest, window_count, windows, split)
from .preprocess import (Scaler, Pca, Preprocessor, scaler_fit, scaler_transform, pca_fit,
                         pca_transform, preprocessor_fit, preprocessor_apply,
                         preprocessor_save, preprocessor_load)
from .model import (ArchSpec, GruModel, GruDirectionParams, count_parameters, init, gru_cell,
                    forward, backward, predict_proba, model_save, model_load)
from .training import TrainConfig, AdamState, adam_step, train, train_with_state, checkpoint, resume
from .evaluation import (ConfusionMatrix, ClassMetrics, confusion, metrics,
                       binary_grouped_accuracy, evaluate)
from .stream import SlipperyDetector, Decision, AlertEvent, Debouncer, replay, serve
from .synth import SynthSpec, gen_synth

__version__ = "0.1.0"
