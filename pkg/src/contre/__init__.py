"""Estimate how well classifiers generalize from their behavior on
contrastive examples: seeded random transforms of the training set.

The working hypothesis: a model's accuracy on transformed training images
tracks its accuracy on genuinely unseen test data, so ranking a cohort of
models by contrastive accuracy (Spearman rank correlation, optionally
controlling for plain training accuracy) recovers their test-set ranking
without touching the test set.  Feature-space class separation
(trace(S_w^-1 S_b)) on the same views gives a complementary signal, and the
per-model gap between training and contrastive accuracy summarizes
robustness in one number.
"""

from .augment import (AugmentPolicy, GeneratedView, GenerationResult,
                      ViewDescriptor, derive_seed, generate_contrastive_set,
                      render_view, sample_view)
from .data_io import (ManifestRow, PredictionRecord, ScoreRow, ScoreTable,
                      VIEWS, decode_feature, encode_feature, read_manifest,
                      read_predictions, read_report, score, score_files,
                      validate_record, write_manifest, write_predictions,
                      write_report)
from .errors import (ConfigError, ContreError, ControlDegenerate, DataError,
                     DecodeError, DegenerateStatistics, DegenerateVariance,
                     DimensionMismatch, DimensionTooLarge, DuplicateRecord,
                     EmptyClass, EmptyDataset, InsufficientCohort,
                     InvalidMagnitude, LengthMismatch, NonFiniteInput,
                     ParseError, ShapeMismatch, SingleClass, SingularWithin,
                     UnknownOperator)
from .harness import (ExperimentConfig, PipelineResult, default_cohort,
                      load_experiment_config, run_e2e, run_pipeline,
                      sweep_nm, sweep_pairs, sweep_single_ops,
                      write_shapes_data)
from .image_ops import (MAX_MAGNITUDE, OP_NAMES, OP_TABLE, TransformOp,
                        apply_op, get_op, magnitude_to_param)
from .png_io import decode_png, encode_png
from .reference_model import (ModelConfig, TrainedModel, extract_features,
                              extract_features_batch, make_shapes_dataset,
                              predict, predict_batch, train)
from .stats import (ScatterPair, consistency, fisher_ratio,
                    partial_from_pairwise, partial_spearman, rank_transform,
                    scatter_matrices, spearman, svd_reduce)

__version__ = "0.1.0"
