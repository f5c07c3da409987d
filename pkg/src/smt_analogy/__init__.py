"""Structure-mapping analogy between expression DAGs.

Order-preserving graph embeddings, a penalized alignment objective and an
exact rule-based matcher for checking its answers.
"""

from .dag import NodeKind, SmtDag, SmtNode, adjacency_matrix, is_rooted_subgraph, k_hop_rooted_subgraph, node_heights, validate_dag
from .embedding import EmbedConfig, EncoderParams, encode, margin_loss, order_violation, train_encoder
from .errors import DataError, NumericError, SizeLimitError
from .inference import RECOVERY_PRESET, InferenceConfig, candidate_inferences, discretize, objective, objective_grad, optimize_alignment
from .metrics import Metrics, compute_metrics
from .oracle import SearchLimits, exact_structure_map, systematicity_score, verify_alignment
from .synth import AnalogyInstance, GenParams, OrderPair, generate_dag, sample_analogy_pair, sample_order_pairs, split_corpus
from .vocab import SignatureVocab, default_vocab

__version__ = "0.1.0"

__all__ = [
    "AnalogyInstance",
    "DataError",
    "EmbedConfig",
    "EncoderParams",
    "GenParams",
    "InferenceConfig",
    "Metrics",
    "NodeKind",
    "NumericError",
    "OrderPair",
    "RECOVERY_PRESET",
    "SearchLimits",
    "SignatureVocab",
    "SizeLimitError",
    "SmtDag",
    "SmtNode",
    "adjacency_matrix",
    "candidate_inferences",
    "compute_metrics",
    "default_vocab",
    "discretize",
    "encode",
    "exact_structure_map",
    "generate_dag",
    "is_rooted_subgraph",
    "k_hop_rooted_subgraph",
    "margin_loss",
    "node_heights",
    "objective",
    "objective_grad",
    "optimize_alignment",
    "order_violation",
    "sample_analogy_pair",
    "sample_order_pairs",
    "split_corpus",
    "systematicity_score",
    "train_encoder",
    "validate_dag",
    "verify_alignment",
]
