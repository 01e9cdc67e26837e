"""
Backendy klasyfikatora sekwencji używane przez potok treningowy.
"""

import hashlib
from abc import ABC, abstractmethod
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Union

import joblib
import numpy as np
import structlog
from scipy.special import expit
from sklearn.feature_extraction.text import HashingVectorizer

from core.exceptions import BackendError, BackendStateError

if TYPE_CHECKING:
    from core.pipeline import StageConfig

logger = structlog.get_logger(__name__)

Seed = Union[int, Sequence[int]]
BACKEND_FORMAT_VERSION = 1


class ClassifierBackend(ABC):
    """
    Abstrakcyjna klasa bazowa dla klasyfikatorów dostrajanych etapami.

    fine_tune calls mutate the backend in place; the state reached after one
    stage is the starting point of the next.
    """

    name: str = "backend"

    def configure_head(self, head: Optional[str]) -> None:
        """Wybiera głowicę klasyfikacyjną; domyślnie obsługiwana jest tylko liniowa."""
        if head not in (None, "linear"):
            raise BackendError(f"Backend '{self.name}' does not support head '{head}'")

    @abstractmethod
    def fine_tune(
        self, texts: Sequence[str], labels: Sequence[int], stage: "StageConfig", seed: Seed = 0,
    ) -> None:
        pass

    @abstractmethod
    def predict(self, texts: Sequence[str]) -> List[int]:
        """Zwraca etykiety {0, 1} w kolejności wejścia."""
        pass

    @abstractmethod
    def fingerprint(self) -> str:
        """Skrót aktualnego stanu modelu."""
        pass

    def save(self, path: Union[str, Path]) -> Path:
        raise BackendError(f"Backend '{self.name}' cannot be saved")


class HashedLinearBackend(ClassifierBackend):
    """
    Referencyjny backend: regresja logistyczna na haszowanych n-gramach słów.

    Trained by mini-batch gradient descent. Learning rates given at transformer
    scale (1e-5) are multiplied by `lr_scale`; the `linear` schedule decays the
    rate towards zero over the stage, mirroring the transformer setup.
    """

    name = "hashed_linear"

    def __init__(
        self,
        n_features: int = 2 ** 14,
        ngram_max: int = 2,
        lr_scale: float = 1e4,
        l2: float = 0.0,
    ):
        self.n_features = n_features
        self.ngram_max = ngram_max
        self.lr_scale = lr_scale
        self.l2 = l2
        self.vectorizer = HashingVectorizer(
            n_features=n_features,
            ngram_range=(1, ngram_max),
            alternate_sign=False,
            norm="l2",
            token_pattern=r"(?u)\b\w+\b",
        )
        self.weights = np.zeros(n_features)
        self.bias = 0.0
        self.trained = False
        self.head: Optional[str] = None
        self.history: List[Dict[str, Any]] = []

    def configure_head(self, head: Optional[str]) -> None:
        if head not in (None, "linear"):
            logger.warning("head_not_supported", backend=self.name, head=head, using="linear")
        self.head = head

    def _learning_rate(self, stage: "StageConfig", step: int, total_steps: int) -> float:
        base = stage.learning_rate * self.lr_scale
        if stage.lr_schedule == "linear":
            return base * (1.0 - step / total_steps)
        return base

    def fine_tune(
        self, texts: Sequence[str], labels: Sequence[int], stage: "StageConfig", seed: Seed = 0,
    ) -> None:
        if len(texts) != len(labels):
            raise BackendError(f"{len(texts)} texts but {len(labels)} labels")
        if stage.epochs <= 0 or not texts:
            logger.info("stage_skipped", backend=self.name, examples=len(texts), epochs=stage.epochs)
            return

        features = self.vectorizer.transform(list(texts))
        targets = np.asarray(labels, dtype=float)
        n = len(targets)
        batches_per_epoch = int(np.ceil(n / stage.batch_size))
        total_steps = stage.epochs * batches_per_epoch
        rng = np.random.default_rng(seed)

        step = 0
        for epoch in range(stage.epochs):
            order = rng.permutation(n)
            for start in range(0, n, stage.batch_size):
                idx = order[start:start + stage.batch_size]
                batch = features[idx]
                residual = expit(batch @ self.weights + self.bias) - targets[idx]
                grad_w = batch.T @ residual / len(idx) + self.l2 * self.weights
                grad_b = float(residual.mean())
                lr = self._learning_rate(stage, step, total_steps)
                self.weights = self.weights - lr * np.asarray(grad_w).ravel()
                self.bias -= lr * grad_b
                step += 1
            loss = self._log_loss(features, targets)
            self.history.append({"epoch": epoch + 1, "loss": loss, "examples": n})
            logger.debug("epoch_finished", backend=self.name, epoch=epoch + 1, loss=round(loss, 6))
        self.trained = True

    def _log_loss(self, features, targets: np.ndarray) -> float:
        probs = np.clip(expit(features @ self.weights + self.bias), 1e-12, 1 - 1e-12)
        return float(-np.mean(targets * np.log(probs) + (1 - targets) * np.log(1 - probs)))

    def decision_function(self, texts: Sequence[str]) -> np.ndarray:
        if not self.trained:
            raise BackendStateError(f"Backend '{self.name}' has not been trained")
        return self.vectorizer.transform(list(texts)) @ self.weights + self.bias

    def predict(self, texts: Sequence[str]) -> List[int]:
        if not texts:
            if not self.trained:
                raise BackendStateError(f"Backend '{self.name}' has not been trained")
            return []
        return [int(z > 0) for z in self.decision_function(texts)]

    def fingerprint(self) -> str:
        digest = hashlib.sha256(np.ascontiguousarray(self.weights).tobytes())
        digest.update(np.float64(self.bias).tobytes())
        return digest.hexdigest()[:16]

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        joblib.dump({
            "format_version": BACKEND_FORMAT_VERSION,
            "kind": self.name,
            "config": {
                "n_features": self.n_features, "ngram_max": self.ngram_max,
                "lr_scale": self.lr_scale, "l2": self.l2,
            },
            "weights": self.weights,
            "bias": self.bias,
            "trained": self.trained,
            "head": self.head,
            "history": self.history,
        }, path)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "HashedLinearBackend":
        payload = joblib.load(path)
        if payload.get("kind") != cls.name or payload.get("format_version") != BACKEND_FORMAT_VERSION:
            raise BackendError(
                f"{path} is not a {cls.name} model (format {payload.get('format_version')})"
            )
        backend = cls(**payload["config"])
        backend.weights = payload["weights"]
        backend.bias = payload["bias"]
        backend.trained = payload["trained"]
        backend.head = payload["head"]
        backend.history = list(payload["history"])
        return backend
