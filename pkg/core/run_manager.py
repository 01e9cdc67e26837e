"""
Katalog przebiegu: podkatalog na każde polecenie, ochrona przed nadpisaniem
i manifest odtwarzający wejścia przebiegu.
"""

import shutil
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import structlog
from pydantic import BaseModel, Field

from core import __version__
from core.exceptions import MissingArtifactError, RunDirectoryError

logger = structlog.get_logger(__name__)

MANIFEST_NAME = "manifest.json"


class CommandRecord(BaseModel):
    artifacts: List[str] = Field(default_factory=list)
    fingerprints: Dict[str, str] = Field(default_factory=dict)
    finished_at: Optional[str] = None


class RunManifest(BaseModel):
    """Migawka konfiguracji, odciski zbiorów, ślad etapów i lista artefaktów."""

    tool_version: str = __version__
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    commands: Dict[str, CommandRecord] = Field(default_factory=dict)
    trace: List[Dict[str, Any]] = Field(default_factory=list)


class RunDirectory:
    """Zarządza katalogiem przebiegu; każde polecenie pisze do własnego podkatalogu."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def command_dir(self, command: str, overwrite: bool = False) -> Path:
        """
        Przygotowuje podkatalog polecenia.

        Raises:
            RunDirectoryError: Podkatalog już istnieje, a nie podano --overwrite
        """
        path = self.root / command
        if path.exists() and any(path.iterdir()):
            if not overwrite:
                raise RunDirectoryError(
                    f"{path} already holds '{command}' artifacts; use a new --run-dir or pass --overwrite"
                )
            shutil.rmtree(path)
            logger.warning("command_dir_overwritten", command=command, path=str(path))
        path.mkdir(parents=True, exist_ok=True)
        return path

    def require(self, command: str, artifact: str) -> Path:
        """
        Ścieżka do artefaktu poprzedniego polecenia.

        Raises:
            MissingArtifactError: Artefakt nie istnieje (z nazwą polecenia, które go tworzy)
        """
        path = self.root / command / artifact
        if not path.exists():
            raise MissingArtifactError(f"{command}/{artifact}", command)
        return path

    def load_manifest(self) -> RunManifest:
        if not self.manifest_path.exists():
            return RunManifest()
        return RunManifest.model_validate_json(self.manifest_path.read_text(encoding="utf-8"))

    def record(
        self,
        command: str,
        config: Dict[str, Any],
        seed: int,
        artifacts: List[Path],
        fingerprints: Optional[Dict[str, str]] = None,
        trace: Optional[List[Dict[str, Any]]] = None,
    ) -> RunManifest:
        """Dopisuje wynik polecenia do manifestu (jedyny plik ze znacznikami czasu)."""
        manifest = self.load_manifest()
        manifest.config = config
        manifest.seed = seed
        manifest.commands[command] = CommandRecord(
            artifacts=sorted(str(p.relative_to(self.root)) for p in artifacts),
            fingerprints=dict(sorted((fingerprints or {}).items())),
            finished_at=datetime.now(timezone.utc).isoformat(),
        )
        if trace is not None:
            manifest.trace = trace
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.manifest_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(manifest.model_dump_json(indent=2) + "\n")
        logger.info("manifest_updated", command=command, artifacts=len(artifacts))
        return manifest
