"""Utterance-by-utterance overlap-aware speaker diarization toolkit.

Builds the full pipeline from frame-level posterior and embedding inputs:
graph-coloring channel assignment with its exact solvers and loss, onset
label handling, posterior decoding, constrained clustering, DER scoring,
and meeting simulation. No audio processing happens here; inputs stand in
for a trained model's outputs.
"""

from .assignment import (AssignmentResult, CostMatrix, compute_cost_matrix,
                         cost_matrix_from_timeline, dp_backend,
                         graph_pit_vad_loss, solve_brute_force, solve_dp)
from .clustering import (CannotLinkSet, ClusterResult, assemble_diarization,
                         cluster, derive_cannot_links)
from .config import ClusteringConfig, PipelineConfig, load_config
from .decoding import (DecodedUtterance, DecoderConfig, binarize_vad, decode,
                       decoded_from_json, decoded_to_json, split_on_ubd)
from .diarization import Diarization, parse_rttm, reference_diarization, write_rttm
from .embeddings import FrameEmbeddings, UtteranceEmbedding, aggregate_embedding
from .errors import (ConstraintViolationError, DegenerateEmbeddingError,
                     InfeasibleError, InvalidInputError, PlacementError,
                     RttmParseError, UndefinedDerError, UttdiarError)
from .losses import (LossBreakdown, MultiTaskWeights, combine, embedding_loss,
                     ubd_loss, widen_ubd_labels)
from .scores import ScoreMatrix, bce_terms, mean_bce
from .scoring import (DerReport, ErrorTimes, map_speakers, score_corpus,
                      score_der, score_error_times)
from .simulate import (Meeting, SimConfig, first_fit_assignment, make_meeting,
                       overlap_ratio, simulate_timeline, synthesize_embeddings,
                       synthesize_posteriors, write_meeting)
from .timeline import (Assignment, LabelMatrix, OverlapGraph, Timeline, Utterance,
                       activity_counts, build_overlap_graph, is_valid_assignment,
                       max_concurrency, render_reference)

__version__ = "0.1.0"
