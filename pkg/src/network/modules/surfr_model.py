"""
Das vollständige Netz: Multiskalen-Encoder, Query-Sampling, optionale Cross-Scale-Attention und SDF-Kopf.
"""

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from autodiff.modules import ops
from autodiff.modules.tensor import Tensor
from pydantic_models.config.model_config import ModelConfig, Weighting
from pydantic_models.data.point_cloud import PointCloud, QuerySet

from .attention import CrossScaleAttention, cross_scale_attention
from .encoder import MultiScaleFeatures, ScaleEncoder, extract_multiscale
from .layers import Module
from .query_sampler import QueryFeatureBatch, sample_query_features
from .sdf_head import SdfHead, sdf_head, signed_distance


class SurfRModel(Module):
    """
    Hält alle lernbaren Parameter. Die Merkmalsextraktion (extract) ist von den Queries
    unabhängig; forward/predict werten beliebig viele Query-Mengen gegen dieselben Merkmale aus.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__()
        self.config = config
        rng = np.random.default_rng(seed)
        self.encoders: List[ScaleEncoder] = [ScaleEncoder(s, config, rng) for s in config.scales]
        self.rank_logits: List[Tensor] = []
        if config.weighting == Weighting.LEARNED_WEIGHT:
            self.rank_logits = [
                Tensor(np.zeros(config.knn_k), requires_grad=True, name=f"rank_logits_{s}") for s in config.scales
            ]
        self.attention: Optional[CrossScaleAttention] = None
        if config.use_attention:
            self.attention = CrossScaleAttention(config.query_feature_size, config.attention_hidden, rng)
        self.head = SdfHead(
            config.head_input_size,
            config.head_widths,
            rng,
            momentum=config.batch_norm_momentum,
            eps=config.batch_norm_eps,
        )
        logger.debug(
            f"SurfR-Modell mit Skalen {config.scales}, Gewichtung {config.weighting.value}, "
            f"{sum(p.size for p in self.parameters())} Parametern erstellt."
        )

    def extract(self, points: Union[PointCloud, Sequence[PointCloud]]) -> MultiScaleFeatures:
        return extract_multiscale(points, self.config.scale_config(), self.encoders)

    def query_features(
        self,
        queries: Union[QuerySet, np.ndarray],
        msf: MultiScaleFeatures,
        sample_ids: Optional[np.ndarray] = None,
    ) -> QueryFeatureBatch:
        logits = self.rank_logits if self.rank_logits else None
        return sample_query_features(queries, msf, self.config.scale_config(), logits, sample_ids)

    def fuse(self, batch: QueryFeatureBatch) -> Tensor:
        """Skalen-Merkmale → Kopfeingang (Q, S·F), mit oder ohne Attention."""
        if self.attention is None:
            return ops.concat(batch.features, axis=-1)
        fused = cross_scale_attention(batch.features, self.attention)
        return ops.reshape(fused, (batch.num_queries, self.config.head_input_size))

    def forward(
        self,
        msf: MultiScaleFeatures,
        queries: Union[QuerySet, np.ndarray],
        sample_ids: Optional[np.ndarray] = None,
    ) -> Tuple[Tensor, Tensor]:
        """
        Returns:
            Tuple[Tensor, Tensor]: Vorzeichen-Logits und Beträge (Q,).
        """
        batch = self.query_features(queries, msf, sample_ids)
        return sdf_head(self.fuse(batch), self.head)

    def predict(self, msf: MultiScaleFeatures, queries: Union[QuerySet, np.ndarray]) -> np.ndarray:
        """Vorzeichenbehaftete Distanzen (Q,) ohne Aufzeichnung von Gradienten."""
        logits, magnitudes = self.forward(msf, queries)
        return signed_distance(logits, magnitudes)

    def head_weights(self) -> List[Tensor]:
        return self.head.weights()
