"""Collusive review-spammer detection via signed user-network embeddings."""

from .features import FeatureConfig, PairFeatures
from .metrics import EvalReport, evaluate
from .network import SignedNetwork, build_network
from .reviews import Dataset, ReviewRecord, Schema, load_labels, load_reviews
from .scoring import SpamicityRanking, rank_users
from .synth import CampaignSpec, generate
from .trainer import EmbeddingState, TrainConfig, train
from .walks import WalkConfig, generate_walks

__version__ = "0.1.0"
