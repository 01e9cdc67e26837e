import logging
import re
import threading
from functools import wraps
from pathlib import Path
from typing import Any, Awaitable, Callable, Dict, Optional, Tuple, TypeVar, Union, cast

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Awaitable[str]])
CacheKey = Tuple[str, str, str]

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {v: k for k, v in _ESCAPES.items()}
_UNESCAPE_RE = re.compile(r"\\[\\tnr]")


def _escape(value: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in value)


def _unescape(value: str) -> str:
    return _UNESCAPE_RE.sub(lambda m: _UNESCAPES[m.group()], value)


class TranslationCache:
    """Trwały cache tłumaczeń zapisywany do pliku TSV."""

    def __init__(self, path: Union[str, Path]):
        """
        Args:
            path: Plik cache'a; jeden rekord na linię (src, tgt, input, output)
        """
        self.path = Path(path)
        self._entries: Dict[CacheKey, str] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self._load()
        logger.info(f"Initialized translation cache {self.path} with {len(self._entries)} entries")

    def _load(self) -> None:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8", newline="\n") as handle:
            for line_number, line in enumerate(handle, start=1):
                fields = line.rstrip("\n").split("\t")
                if len(fields) != 4:
                    logger.warning(f"Skipping malformed cache line {line_number} in {self.path}")
                    continue
                source, target, text, translation = (_unescape(f) for f in fields)
                self._entries[(source, target, text)] = translation

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, source: str, target: str, text: str) -> Optional[str]:
        """Pobiera tłumaczenie z cache'a."""
        value = self._entries.get((source, target, text))
        if value is None:
            self.misses += 1
            logger.debug(f"Cache miss for {source}->{target}")
        else:
            self.hits += 1
        return value

    def set(self, source: str, target: str, text: str, translation: str) -> None:
        """Zapisuje tłumaczenie; zapisy są serializowane blokadą."""
        with self._lock:
            if (source, target, text) in self._entries:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8", newline="\n") as handle:
                handle.write("\t".join(_escape(v) for v in (source, target, text, translation)) + "\n")
            self._entries[(source, target, text)] = translation

    def cached(self, func: F) -> F:
        """
        Dekorator do cache'owania wyników funkcji tłumaczącej.

        The wrapped coroutine must take (text, source, target) and return the translation.
        """
        @wraps(func)
        async def wrapper(text: str, source: Any, target: Any) -> str:
            src, tgt = str(getattr(source, "value", source)), str(getattr(target, "value", target))
            hit = self.get(src, tgt, text)
            if hit is not None:
                return hit
            result = await func(text, source, target)
            self.set(src, tgt, text, result)
            return result
        return cast(F, wrapper)
