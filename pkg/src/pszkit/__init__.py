"""Two-zone loudspeaker filter synthesis with a coordinate-conditioned
generator, consistency-regularized training, and robustness evaluation
under listener-localization uncertainty."""

from .acoustics import (AtfSet, FrequencyGrid, atf_to_impulse_response, build_atf_set,
                        load_atf_set, point_source_response, save_atf_set)
from .errors import (BandMismatchError, CheckpointError, CheckpointVersionError,
                     ConfigError, CorruptCheckpointError, EvaluationError,
                     GeometryError, GridError, NumericalOverflowError, PszkitError,
                     ShapeError, TrainingDivergedError)
from .evaluation import (EnergyTriple, EvalProtocol, NeighborhoodReport,
                         band_logmean, build_neighbor_edges, decoupled_point_eval,
                         evaluate_neighborhood, improvement, improvement_table, ipi,
                         izi, multi_anchor_run, perturbed_grid, quality_summaries,
                         stability_stats)
from .filters import (FilterBank, PressureField, frequency_response, load_filter_bank,
                      pack, render_pressure_freq, render_pressure_time,
                      save_filter_bank, unpack)
from .losses import (BandObjective, LossBreakdown, LossWeights, bright_zone_loss,
                     compact_window, compactness_penalty, dark_zone_loss,
                     gain_penalty, nc_batch, nc_loss, psz_loss, sample_perturbation,
                     total_loss)
from .network import (AdamState, GeneratorParams, Tape, backward, encode_coordinates,
                      forward, init_params, load_checkpoint, optimizer_step,
                      save_checkpoint)
from .scene import (ArrayGeometry, HeadConfig, SceneConfig, anchor_admissible,
                    clip_to_bounds, default_array, ear_points, region_indicator,
                    same_region_mask, stack_coords)
from .training import CachedAtfProvider, TrainConfig, sample_batch, train

__version__ = "0.1.0"
