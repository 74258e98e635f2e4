"""
Dataset manifests: which clean recordings, accelerometer recordings and
interferers an experiment draws from.

Manifest files are JSON-lines with the fields ``clean_path``, ``accel_path``
(may be null) and ``speaker_id``; the noise list is a text file with one path
per line. Relative paths resolve against the file that names them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from loguru import logger

from core.errors import ConfigurationError, InvalidArgumentError

PathLike = Union[str, Path]


class Scenario(str, Enum):
    MIXED_SPEECH = "mixed_speech"
    MIXED_NOISE = "mixed_noise"


@dataclass(frozen=True)
class ManifestEntry:
    clean_path: Path
    speaker_id: str
    accel_path: Optional[Path] = None

    @property
    def example_id(self) -> str:
        return f"{self.speaker_id}-{Path(self.clean_path).stem}"

    @property
    def has_accel(self) -> bool:
        return self.accel_path is not None


@dataclass
class DatasetManifest:
    entries: List[ManifestEntry]
    noise_sources: List[Path] = field(default_factory=list)
    scenario: Scenario = Scenario.MIXED_NOISE
    mix_gain_db: float = 0.0

    def __post_init__(self):
        self.scenario = Scenario(self.scenario)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def speakers(self) -> List[str]:
        return sorted({e.speaker_id for e in self.entries})

    def entry_for_path(self, path: PathLike) -> Optional[ManifestEntry]:
        path = Path(path)
        for entry in self.entries:
            if Path(entry.clean_path) == path:
                return entry
        return None

    def interferer_pool(self, entry: ManifestEntry) -> List[Path]:
        """Candidate interferers for ``entry`` under the manifest's scenario"""
        if self.scenario is Scenario.MIXED_SPEECH:
            pool = [Path(e.clean_path) for e in self.entries if e.speaker_id != entry.speaker_id]
            if not pool:
                raise ConfigurationError(
                    f"mixed_speech needs an utterance from a speaker other than {entry.speaker_id!r}"
                )
            return pool
        if not self.noise_sources:
            raise ConfigurationError("mixed_noise scenario needs at least one noise source")
        return list(self.noise_sources)

    def validate(self, check_scenario: bool = True) -> None:
        """Check that every referenced file exists and, optionally, that the scenario is satisfiable"""
        if not self.entries:
            raise ConfigurationError("manifest has no entries")
        missing = []
        for entry in self.entries:
            missing.extend(p for p in (entry.clean_path, entry.accel_path) if p is not None and not Path(p).exists())
        missing.extend(p for p in self.noise_sources if not Path(p).exists())
        if missing:
            raise ConfigurationError(f"{len(missing)} manifest file(s) missing, first: {missing[0]}")
        if check_scenario:
            # with two or more speakers every entry has a mixed_speech interferer
            if self.scenario is Scenario.MIXED_SPEECH and len(self.speakers) < 2:
                raise ConfigurationError(f"mixed_speech needs at least two speakers, got {self.speakers}")
            self.interferer_pool(self.entries[0])

    def with_entries(self, entries: Iterable[ManifestEntry]) -> "DatasetManifest":
        return replace(self, entries=list(entries))


def filter_speakers(manifest: DatasetManifest, speaker_ids: Iterable[str]) -> DatasetManifest:
    """Keep only entries from ``speaker_ids`` (noise sources are shared)"""
    keep = set(speaker_ids)
    return manifest.with_entries(e for e in manifest.entries if e.speaker_id in keep)


def speaker_folds(manifest: DatasetManifest, n_folds: int = 5) -> List[Tuple[DatasetManifest, DatasetManifest]]:
    """Speaker-disjoint (train, test) splits; fold i tests on the i-th speaker group"""
    speakers = manifest.speakers
    if n_folds < 2:
        raise InvalidArgumentError(f"need at least 2 folds, got {n_folds}")
    if len(speakers) < n_folds:
        raise ConfigurationError(f"{len(speakers)} speakers cannot fill {n_folds} folds")
    # contiguous groups: with 25 speakers, speakers 0-4 are the test set of fold 0
    size, extra = divmod(len(speakers), n_folds)
    groups, start = [], 0
    for i in range(n_folds):
        stop = start + size + (1 if i < extra else 0)
        groups.append(speakers[start:stop])
        start = stop
    folds = []
    for test_speakers in groups:
        train_speakers = [s for s in speakers if s not in test_speakers]
        folds.append((filter_speakers(manifest, train_speakers), filter_speakers(manifest, test_speakers)))
    return folds


def _resolve(path: Optional[str], base: Path) -> Optional[Path]:
    if path is None or path == "":
        return None
    p = Path(path)
    return p if p.is_absolute() else base / p


def load_noise_list(path: PathLike) -> List[Path]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    return [_resolve(line.strip(), path.parent) for line in lines if line.strip() and not line.startswith("#")]


def load_manifest(
    path: PathLike,
    noise_list: Optional[PathLike] = None,
    scenario: Union[Scenario, str] = Scenario.MIXED_NOISE,
    mix_gain_db: float = 0.0,
) -> DatasetManifest:
    path = Path(path)
    entries = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                entries.append(
                    ManifestEntry(
                        clean_path=_resolve(record["clean_path"], path.parent),
                        speaker_id=str(record["speaker_id"]),
                        accel_path=_resolve(record.get("accel_path"), path.parent),
                    )
                )
            except (json.JSONDecodeError, KeyError) as e:
                raise ConfigurationError(f"{path}:{line_no}: bad manifest record ({e})") from e
    noise_sources = load_noise_list(noise_list) if noise_list else []
    logger.info(f"Loaded manifest {path.name}: {len(entries)} entries, {len(noise_sources)} noise sources")
    return DatasetManifest(entries, noise_sources, Scenario(scenario), float(mix_gain_db))


def write_manifest(entries: Sequence[ManifestEntry], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for entry in entries:
            record = {
                "clean_path": str(entry.clean_path),
                "accel_path": str(entry.accel_path) if entry.accel_path is not None else None,
                "speaker_id": entry.speaker_id,
            }
            f.write(json.dumps(record) + "\n")
    return path
