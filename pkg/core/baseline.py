"""
Modele bazowe: TF-IDF + liniowy SVM dla zadania binarnego
oraz regresory na embeddingach zdań dla zadania z oceną 1-7.
"""

import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import joblib
import numpy as np
import structlog
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.linear_model import LinearRegression
from sklearn.neighbors import KNeighborsRegressor
from sklearn.svm import SVC, SVR
from sklearn.tree import DecisionTreeRegressor

from core.data_models import Corpus
from core.evaluation import spearman_rho
from core.exceptions import (
    ConfigError, DegenerateDataError, ParameterError, PreconditionError, ShapeError,
    UndefinedCorrelationError,
)

logger = structlog.get_logger(__name__)

MODEL_FORMAT_VERSION = 1
DEFAULT_NGRAM_MAX = 3
DEFAULT_K = 5
DEFAULT_EPSILON = 0.2
DEFAULT_C = 1.0
ANALYZERS = ("word", "char")


class RegressorKind(str, Enum):
    OLS = "ols"
    KNN = "knn"
    TREE = "tree"
    SVR = "svr"
    LINEAR_SVR = "linear_svr"


def fit_tfidf(
    corpus: Union[Corpus, Sequence[str]],
    ngram_max: int = DEFAULT_NGRAM_MAX,
    analyzer: str = "word",
) -> TfidfVectorizer:
    """
    Dopasowuje wektoryzator TF-IDF na n-gramach 1..ngram_max.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1, raw term counts, rows L2-normalized.
    Word tokens are runs of word characters, so one-letter words count too.

    Raises:
        PreconditionError: Pusty korpus
    """
    texts = corpus.texts() if isinstance(corpus, Corpus) else list(corpus)
    if not texts:
        raise PreconditionError("cannot fit TF-IDF on an empty corpus")
    if analyzer not in ANALYZERS:
        raise ConfigError(f"analyzer must be one of {ANALYZERS}, got '{analyzer}'")
    if ngram_max < 1:
        raise ParameterError(f"ngram_max must be >= 1, got {ngram_max}")
    options: Dict[str, Any] = {"ngram_range": (1, ngram_max), "smooth_idf": True, "norm": "l2"}
    if analyzer == "word":
        vectorizer = TfidfVectorizer(analyzer="word", token_pattern=r"(?u)\b\w+\b", **options)
    else:
        vectorizer = TfidfVectorizer(analyzer="char_wb", **options)
    vectorizer.fit(texts)
    logger.info(
        "tfidf_fitted", documents=len(texts), ngram_max=ngram_max, analyzer=analyzer,
        vocabulary=len(vectorizer.vocabulary_),
    )
    return vectorizer


def _check_lengths(features: Any, targets: Sequence[Any]) -> None:
    if features.shape[0] != len(targets):
        raise ShapeError(f"{features.shape[0]} feature rows but {len(targets)} targets")


def train_svm_classifier(features: Any, labels: Sequence[int]) -> SVC:
    """
    Trenuje liniowy SVM (hinge loss, C=1).

    Raises:
        DegenerateDataError: W danych występuje tylko jedna klasa
    """
    _check_lengths(features, labels)
    classes = set(int(label) for label in labels)
    if classes != {0, 1}:
        raise DegenerateDataError(f"SVM needs both classes, got {sorted(classes)}")
    classifier = SVC(kernel="linear", C=DEFAULT_C)
    classifier.fit(features, np.asarray(labels, dtype=int))
    return classifier


class TfidfSvmClassifier:
    """Bazowy klasyfikator: wektoryzator TF-IDF i liniowy SVM w jednym obiekcie."""

    kind = "tfidf_svm"

    def __init__(self, vectorizer: TfidfVectorizer, classifier: SVC):
        self.vectorizer = vectorizer
        self.classifier = classifier

    @classmethod
    def fit(
        cls, corpus: Corpus, ngram_max: int = DEFAULT_NGRAM_MAX, analyzer: str = "word",
    ) -> "TfidfSvmClassifier":
        vectorizer = fit_tfidf(corpus, ngram_max, analyzer)
        classifier = train_svm_classifier(vectorizer.transform(corpus.texts()), corpus.targets())
        return cls(vectorizer, classifier)

    def predict(self, texts: Sequence[str]) -> list:
        if not texts:
            return []
        return [int(p) for p in self.classifier.predict(self.vectorizer.transform(list(texts)))]


def epsilon_insensitive_loss(
    targets: np.ndarray, predictions: np.ndarray, epsilon: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """max(0, |y - f(x)| - epsilon), element-wise."""
    return np.maximum(0.0, np.abs(np.asarray(targets) - np.asarray(predictions)) - epsilon)


def svr_objective(
    weights: np.ndarray, bias: float, features: np.ndarray, targets: np.ndarray,
    epsilon: float = DEFAULT_EPSILON, C: float = DEFAULT_C,
) -> float:
    """0.5 ||w||^2 + C * sum of epsilon-insensitive losses."""
    predictions = features @ weights + bias
    return float(0.5 * weights @ weights + C * epsilon_insensitive_loss(targets, predictions, epsilon).sum())


def svr_subgradient(
    weights: np.ndarray, bias: float, features: np.ndarray, targets: np.ndarray,
    epsilon: float = DEFAULT_EPSILON, C: float = DEFAULT_C,
) -> Tuple[np.ndarray, float]:
    """
    Subgradient `svr_objective` względem (w, b).

    Points inside the epsilon band contribute nothing; outside it each point
    pushes with sign(f(x) - y). Exact gradient wherever no |residual| equals epsilon.
    """
    errors = features @ weights + bias - targets
    active = np.abs(errors) > epsilon
    signs = np.sign(errors) * active
    return weights + C * features.T @ signs, float(C * signs.sum())


class LinearEpsilonSVR:
    """
    Liniowy SVR trenowany pełnym subgradientem na postaci prymalnej.

    The step size decays as 1/sqrt(t); the best iterate seen is kept.
    """

    def __init__(
        self, epsilon: float = DEFAULT_EPSILON, C: float = DEFAULT_C,
        learning_rate: float = 0.1, n_iter: int = 2000,
    ):
        if epsilon < 0:
            raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
        self.epsilon = epsilon
        self.C = C
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.coef_: Optional[np.ndarray] = None
        self.intercept_ = 0.0
        self.objective_ = math.inf

    def fit(self, features: np.ndarray, targets: np.ndarray) -> "LinearEpsilonSVR":
        features = np.asarray(features, dtype=float)
        targets = np.asarray(targets, dtype=float)
        weights = np.zeros(features.shape[1])
        bias = float(np.median(targets))
        scale = max(1.0, self.C * len(targets))
        best = (svr_objective(weights, bias, features, targets, self.epsilon, self.C), weights, bias)
        for t in range(self.n_iter):
            grad_w, grad_b = svr_subgradient(weights, bias, features, targets, self.epsilon, self.C)
            step = self.learning_rate / math.sqrt(t + 1) / scale
            weights = weights - step * grad_w
            bias -= step * grad_b
            objective = svr_objective(weights, bias, features, targets, self.epsilon, self.C)
            if objective < best[0]:
                best = (objective, weights, bias)
        self.objective_, self.coef_, self.intercept_ = best
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self.coef_ is None:
            raise PreconditionError("LinearEpsilonSVR is not fitted")
        return np.asarray(features, dtype=float) @ self.coef_ + self.intercept_


class RegressorModel:
    """Dopasowany regresor wraz z rodzajem, wymiarem wejścia i flagami."""

    def __init__(
        self, kind: RegressorKind, estimator: Any, n_features: int,
        rank_deficient: bool = False, params: Optional[Dict[str, Any]] = None,
    ):
        self.kind = kind
        self.estimator = estimator
        self.n_features = n_features
        self.rank_deficient = rank_deficient
        self.params = params or {}

    def __repr__(self) -> str:
        return f"RegressorModel(kind={self.kind.value}, n_features={self.n_features}, params={self.params})"


def _as_matrix(embeddings: Any) -> np.ndarray:
    if hasattr(embeddings, "toarray"):
        embeddings = embeddings.toarray()
    matrix = np.asarray(embeddings, dtype=float)
    if matrix.ndim != 2:
        raise ShapeError(f"embeddings must be a 2-D matrix, got shape {matrix.shape}")
    return matrix


def train_regressor(
    embeddings: Any,
    scores: Sequence[float],
    kind: Union[RegressorKind, str],
    k: int = DEFAULT_K,
    epsilon: float = DEFAULT_EPSILON,
    C: float = DEFAULT_C,
    seed: int = 0,
) -> RegressorModel:
    """
    Trenuje regresor wybranego rodzaju na embeddingach zdań.

    Args:
        embeddings: Macierz (n, d)
        scores: Oceny z przedziału [1, 7]
        kind: ols, knn, tree, svr albo linear_svr
        k: Liczba sąsiadów dla knn
        epsilon: Szerokość pasa dla svr / linear_svr

    Raises:
        ShapeError: Liczba wierszy różna od liczby ocen
        ParameterError: Dla knn mniej przykładów niż k
    """
    kind = RegressorKind(kind)
    features = _as_matrix(embeddings)
    targets = np.asarray(scores, dtype=float)
    _check_lengths(features, targets)
    if len(targets) == 0:
        raise PreconditionError("cannot train a regressor on zero examples")
    if np.any((targets < 1.0) | (targets > 7.0)):
        raise PreconditionError("scores must lie within [1, 7]")

    rank_deficient = False
    params: Dict[str, Any] = {}
    if kind is RegressorKind.OLS:
        design = np.hstack([features, np.ones((len(features), 1))])
        rank_deficient = bool(np.linalg.matrix_rank(design) < design.shape[1])
        if rank_deficient:
            logger.warning("ols_rank_deficient", rows=design.shape[0], columns=design.shape[1])
        estimator: Any = LinearRegression()
    elif kind is RegressorKind.KNN:
        if len(targets) < k:
            raise ParameterError(f"knn needs at least k={k} examples, got {len(targets)}")
        estimator = KNeighborsRegressor(n_neighbors=k, weights="uniform", algorithm="brute")
        params = {"k": k}
    elif kind is RegressorKind.TREE:
        estimator = DecisionTreeRegressor(criterion="squared_error", max_depth=None, random_state=seed)
    elif kind is RegressorKind.SVR:
        if epsilon < 0:
            raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
        estimator = SVR(kernel="rbf", C=C, epsilon=epsilon)
        params = {"epsilon": epsilon, "C": C}
    else:
        estimator = LinearEpsilonSVR(epsilon=epsilon, C=C)
        params = {"epsilon": epsilon, "C": C}

    estimator.fit(features, targets)
    logger.info("regressor_trained", kind=kind.value, examples=len(targets), dimension=features.shape[1])
    return RegressorModel(kind, estimator, features.shape[1], rank_deficient, params)


def predict_scores(model: RegressorModel, embeddings: Any, clamp: bool = False) -> np.ndarray:
    """
    Przewiduje oceny; opcjonalnie przycina je do [1, 7].

    Raises:
        ShapeError: Wymiar embeddingów różny od treningowego
    """
    features = _as_matrix(embeddings)
    if features.shape[1] != model.n_features:
        raise ShapeError(f"model expects dimension {model.n_features}, got {features.shape[1]}")
    predictions = np.asarray(model.estimator.predict(features), dtype=float)
    if not np.all(np.isfinite(predictions)):
        raise PreconditionError(f"{model.kind.value} produced non-finite predictions")
    return np.clip(predictions, 1.0, 7.0) if clamp else predictions


def sweep_regressors(
    train_embeddings: Any,
    train_scores: Sequence[float],
    eval_embeddings: Any,
    eval_scores: Sequence[float],
    kinds: Iterable[Union[RegressorKind, str]] = (
        RegressorKind.OLS, RegressorKind.KNN, RegressorKind.TREE, RegressorKind.SVR,
    ),
    seed: int = 0,
) -> Dict[str, float]:
    """
    Trenuje każdy rodzaj regresora i zwraca rho Spearmana na zbiorze ewaluacyjnym.

    A kind whose predictions are constant gets NaN instead of aborting the sweep.
    """
    results: Dict[str, float] = {}
    for kind in kinds:
        kind = RegressorKind(kind)
        model = train_regressor(train_embeddings, train_scores, kind, seed=seed)
        predictions = predict_scores(model, eval_embeddings)
        try:
            results[kind.value] = spearman_rho(predictions, eval_scores).rho
        except UndefinedCorrelationError as e:
            logger.warning("sweep_rho_undefined", kind=kind.value, error=str(e))
            results[kind.value] = float("nan")
    return results


def save_model(model: Any, kind: str, path: Union[str, Path]) -> Path:
    """Zapisuje model w wersjonowanej kopercie joblib."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    joblib.dump({"format_version": MODEL_FORMAT_VERSION, "kind": kind, "model": model}, path)
    return path


def load_model(path: Union[str, Path], expected_kind: Optional[str] = None) -> Any:
    envelope = joblib.load(path)
    if not isinstance(envelope, dict) or envelope.get("format_version") != MODEL_FORMAT_VERSION:
        raise PreconditionError(f"{path} is not a supported model artifact")
    if expected_kind is not None and envelope["kind"] != expected_kind:
        raise PreconditionError(f"{path} holds a '{envelope['kind']}' model, expected '{expected_kind}'")
    return envelope["model"]
