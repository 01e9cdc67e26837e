"""
Backend klasyfikatora oparty na modelu transformer (ELECTRA, BERT, RoBERTa)
z głowicą liniową albo Bi-LSTM.
"""

import hashlib
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from core.backends import ClassifierBackend, Seed
from core.exceptions import BackendError, BackendStateError, ProviderError

logger = logging.getLogger(__name__)

HEADS = ("linear", "bilstm")

try:
    import torch
    from torch import nn
    from transformers import AutoModel, AutoTokenizer, get_linear_schedule_with_warmup
except ImportError:  # pragma: no cover - zależności opcjonalne
    torch = None  # type: ignore[assignment]


if torch is not None:

    class _SequenceClassifier(nn.Module):
        """Encoder + głowica; Bi-LSTM czyta sekwencję stanów ukrytych."""

        def __init__(self, model_name: str, head: str, lstm_hidden: int = 256):
            super().__init__()
            self.encoder = AutoModel.from_pretrained(model_name)
            hidden = self.encoder.config.hidden_size
            self.head_kind = head
            if head == "bilstm":
                self.lstm = nn.LSTM(hidden, lstm_hidden, batch_first=True, bidirectional=True)
                self.classifier = nn.Linear(2 * lstm_hidden, 2)
            else:
                self.classifier = nn.Linear(hidden, 2)
            self.dropout = nn.Dropout(0.1)

        def forward(self, input_ids, attention_mask):
            states = self.encoder(input_ids=input_ids, attention_mask=attention_mask).last_hidden_state
            if self.head_kind == "bilstm":
                output, _ = self.lstm(states)
                pooled = output[:, 0, :]
            else:
                pooled = states[:, 0, :]
            return self.classifier(self.dropout(pooled))


class TransformersBackend(ClassifierBackend):
    """
    Dostrajanie modelu z Hugging Face: AdamW, liniowy spadek learning rate.

    Integration-only; scores vary between runs on GPU hardware.
    """

    name = "transformers"

    def __init__(self, model_name: str = "google/electra-base-discriminator",
                 max_length: int = 128, device: Optional[str] = None):
        if torch is None:
            raise ProviderError("The 'transformers' backend needs torch and transformers installed")
        self.model_name = model_name
        self.max_length = max_length
        self.device = device or ("cuda" if torch.cuda.is_available() else "cpu")
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.head = "linear"
        self.model: Optional["_SequenceClassifier"] = None
        self.trained = False

    def configure_head(self, head: Optional[str]) -> None:
        head = head or "linear"
        if head not in HEADS:
            raise BackendError(f"Unknown head '{head}'. Available heads: {', '.join(HEADS)}")
        if self.model is not None and head != self.head:
            raise BackendStateError("The head cannot change after the model is built")
        self.head = head

    def _ensure_model(self) -> "_SequenceClassifier":
        if self.model is None:
            self.model = _SequenceClassifier(self.model_name, self.head).to(self.device)
            logger.info(f"Built {self.model_name} with {self.head} head on {self.device}")
        return self.model

    def _encode(self, texts: Sequence[str]):
        batch = self.tokenizer(
            list(texts), padding=True, truncation=True, max_length=self.max_length, return_tensors="pt",
        )
        return batch["input_ids"].to(self.device), batch["attention_mask"].to(self.device)

    def fine_tune(self, texts: Sequence[str], labels: Sequence[int], stage, seed: Seed = 0) -> None:
        model = self._ensure_model()
        if stage.epochs <= 0 or not texts:
            return
        rng = np.random.default_rng(seed)
        torch.manual_seed(int(rng.integers(0, 2 ** 31 - 1)))
        optimizer = torch.optim.AdamW(model.parameters(), lr=stage.learning_rate)
        steps_per_epoch = int(np.ceil(len(texts) / stage.batch_size))
        total_steps = stage.epochs * steps_per_epoch
        scheduler = get_linear_schedule_with_warmup(optimizer, num_warmup_steps=0, num_training_steps=total_steps)
        targets = torch.tensor(list(labels), dtype=torch.long)
        loss_fn = nn.CrossEntropyLoss()

        model.train()
        for epoch in range(stage.epochs):
            order = rng.permutation(len(texts))
            running = 0.0
            for start in tqdm(range(0, len(texts), stage.batch_size), desc=f"epoch {epoch + 1}", leave=False):
                idx = order[start:start + stage.batch_size]
                input_ids, mask = self._encode([texts[i] for i in idx])
                loss = loss_fn(model(input_ids, mask), targets[idx].to(self.device))
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                scheduler.step()
                running += float(loss.item())
            logger.info(f"Epoch {epoch + 1}/{stage.epochs} loss {running / steps_per_epoch:.4f}")
        self.trained = True

    def predict(self, texts: Sequence[str]) -> List[int]:
        if not self.trained or self.model is None:
            raise BackendStateError("Backend 'transformers' has not been trained")
        self.model.eval()
        predictions: List[int] = []
        with torch.no_grad():
            for start in range(0, len(texts), 32):
                input_ids, mask = self._encode(texts[start:start + 32])
                predictions.extend(int(p) for p in self.model(input_ids, mask).argmax(dim=-1).cpu())
        return predictions

    def fingerprint(self) -> str:
        if self.model is None:
            return hashlib.sha256(self.model_name.encode("utf-8")).hexdigest()[:16]
        digest = hashlib.sha256()
        for key, tensor in sorted(self.model.state_dict().items()):
            digest.update(key.encode("utf-8"))
            digest.update(tensor.detach().cpu().numpy().tobytes())
        return digest.hexdigest()[:16]

    def save(self, path: Union[str, Path]) -> Path:
        if self.model is None:
            raise BackendStateError("Nothing to save: the model has not been built")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save({"model_name": self.model_name, "head": self.head, "state": self.model.state_dict()}, path)
        return path

    @classmethod
    def load(cls, path: Union[str, Path], device: Optional[str] = None) -> "TransformersBackend":
        if torch is None:
            raise ProviderError("The 'transformers' backend needs torch and transformers installed")
        payload = torch.load(Path(path), map_location="cpu")
        backend = cls(model_name=payload["model_name"], device=device)
        backend.configure_head(payload["head"])
        model = backend._ensure_model()
        model.load_state_dict(payload["state"])
        backend.trained = True
        return backend
