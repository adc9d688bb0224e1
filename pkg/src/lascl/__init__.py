"""Label-aware supervised contrastive learning on hashed text features."""

from .corpus import Dataset, Example, FeatureVector, generate_synthetic, hash_vectorize, kshot_sample, load_jsonl
from .encoder import EncoderDims, EncoderParams, backward, cosine_sim, encode, encode_batch, init_params
from .evaluation import (
    LinearProbe,
    LPConfig,
    MetricsReport,
    cluster_distances,
    direct_test,
    export_embeddings,
    hierarchical_accuracy,
    linear_probe_train,
)
from .hierarchy import (
    LabelNode,
    LabelTree,
    TemplateSpec,
    ancestor_at_depth,
    ancestor_path,
    build_tree,
    label_sentence,
    truncate_bottom_up,
)
from .label_space import LabelSpace, init_label_space, nn_classify, reencode, scale_matrix, similarity_matrix
from .losses import LossOutput, LossVariant, loss_ic, loss_scl, loss_sic, loss_sii, loss_variant
from .optim import adam_step, lr_at
from .training import TrainConfig, TrainState, train

__version__ = "0.1.0"
