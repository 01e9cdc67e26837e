"""
Enkoder zdań oparty na sentence-transformers (np. wielojęzyczny USE, 512 wymiarów).
"""

import logging
from typing import Sequence

import numpy as np

from core.exceptions import ProviderError
from core.providers import SentenceEncoder

logger = logging.getLogger(__name__)


class SentenceTransformerEncoder(SentenceEncoder):
    name = "sentence_transformers"

    def __init__(self, model_name: str = "distiluse-base-multilingual-cased-v1"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as e:
            raise ProviderError("The 'sentence_transformers' encoder needs sentence-transformers") from e
        self.model_name = model_name
        self.model = SentenceTransformer(model_name)
        self._dimension = int(self.model.get_sentence_embedding_dimension())
        logger.info(f"Loaded sentence encoder {model_name} ({self._dimension} dims)")

    @property
    def dimension(self) -> int:
        return self._dimension

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        return np.asarray(
            self.model.encode(list(texts), convert_to_numpy=True, show_progress_bar=False),
            dtype=float,
        )
