"""
Model uzupełniania kontekstowego oparty na masked language model z Hugging Face.
"""

import logging
from typing import List, Optional, Sequence

from core.exceptions import ProviderError
from core.providers import MASK_TOKEN, Candidate, ContextualFillModel

logger = logging.getLogger(__name__)


class HuggingFaceFillModel(ContextualFillModel):
    """Kandydaci z pipeline'u `fill-mask` biblioteki transformers."""

    name = "huggingface"

    def __init__(self, model_name: str = "bert-base-multilingual-cased", top_k: int = 10,
                 device: Optional[int] = None):
        try:
            from transformers import pipeline
        except ImportError as e:
            raise ProviderError("The 'huggingface' fill model needs the transformers package") from e
        self.model_name = model_name
        self.top_k = top_k
        self.pipe = pipeline("fill-mask", model=model_name, device=device if device is not None else -1)
        self.mask = self.pipe.tokenizer.mask_token
        logger.info(f"Loaded fill-mask model {model_name}")

    def fill(self, tokens: Sequence[str], mask_index: int) -> List[Candidate]:
        words = list(tokens)
        words[mask_index] = self.mask
        text = " ".join(words).replace(MASK_TOKEN, self.mask)
        results = self.pipe(text, top_k=self.top_k)
        return [
            Candidate(r["token_str"].strip(), float(r["score"]))
            for r in results
            if r["token_str"].strip()
        ]
