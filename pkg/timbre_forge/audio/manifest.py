"""
Dataset manifests: which recordings belong to which domain and split.
"""

import json
import logging
import os
from pathlib import Path

import numpy as np
import soundfile as sf
from attrs import field, frozen

from ..exceptions import FormatError, InsufficientData, UnknownDomain
from ..keys import validate_domain_name

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")

# Every domain needs one file per split.
MIN_FILES_PER_DOMAIN = 3

# One file in this many is held out for validation, and as many for testing.
HOLDOUT_DIVISOR = 10


@frozen
class ManifestEntry:
    path: str
    split: str = field()

    @split.validator
    def _check_split(self, _attribute, value):
        if value not in SPLITS:
            raise FormatError(f"Unknown split {value!r} for {self.path}; expected one of {SPLITS}")


@frozen
class DomainEntry:
    name: str = field(converter=validate_domain_name)
    files: tuple[ManifestEntry, ...] = field(converter=tuple)


@frozen
class DatasetManifest:
    """Domains and the split assignment of each of their files."""

    domains: tuple[DomainEntry, ...] = field(converter=tuple)

    @property
    def domain_names(self) -> list[str]:
        return [domain.name for domain in self.domains]

    def domain(self, name: str) -> DomainEntry:
        """Return the entry for ``name``."""
        for domain in self.domains:
            if domain.name == name:
                return domain
        raise UnknownDomain(name, self.domain_names)

    def files_for(self, name: str, split: str | None = None) -> list[str]:
        """Paths of ``name``'s files, optionally restricted to one split."""
        return [entry.path for entry in self.domain(name).files if split is None or entry.split == split]


def _split_counts(n_files: int) -> tuple[int, int, int]:
    """Return (train, valid, test) counts; valid/test are floored, the rest goes to train."""
    held_out = max(1, n_files // HOLDOUT_DIVISOR)
    return n_files - 2 * held_out, held_out, held_out


def split_dataset(files: dict[str, list[str]], seed: int) -> DatasetManifest:
    """
    Shuffle each domain's files and assign them to train/valid/test 80/10/10.

    The result depends only on the file names and ``seed``: files are sorted
    before shuffling so caller ordering does not matter.
    """
    rng = np.random.default_rng(seed)
    domains = []
    for name in sorted(files):
        paths = sorted(str(path) for path in files[name])
        if len(paths) < MIN_FILES_PER_DOMAIN:
            raise InsufficientData(
                f"Domain '{name}' has {len(paths)} files; at least {MIN_FILES_PER_DOMAIN} are required"
            )
        n_train, n_valid, _ = _split_counts(len(paths))
        order = rng.permutation(len(paths))
        entries = []
        for rank, index in enumerate(order):
            if rank < n_train:
                split = "train"
            elif rank < n_train + n_valid:
                split = "valid"
            else:
                split = "test"
            entries.append(ManifestEntry(paths[index], split))
        logger.info("[Manifest] Domain %s: %d train / %d valid / %d test",
                    name, n_train, n_valid, len(paths) - n_train - n_valid)
        domains.append(DomainEntry(name, entries))
    return DatasetManifest(domains)


def save_manifest(manifest: DatasetManifest, path) -> Path:
    """Write ``manifest`` as JSON with paths relative to the manifest's directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    payload = {
        "domains": [
            {
                "name": domain.name,
                "files": [
                    {"path": Path(os.path.relpath(Path(entry.path).resolve(), base)).as_posix(), "split": entry.split}
                    for entry in domain.files
                ],
            }
            for domain in manifest.domains
        ]
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf8")
    return path


def load_manifest(path) -> DatasetManifest:
    """Read a manifest written by save_manifest, resolving paths against its directory."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf8"))
        base = path.parent
        return DatasetManifest(
            DomainEntry(
                domain["name"],
                [ManifestEntry(str(base / item["path"]), item["split"]) for item in domain["files"]],
            )
            for domain in payload["domains"]
        )
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise FormatError(f"Malformed manifest {path}: {err}") from err


@frozen
class DomainSummary:
    name: str
    count: int
    mean_seconds: float
    total_seconds: float
    split_counts: dict


def summarize_manifest(manifest: DatasetManifest) -> list[DomainSummary]:
    """Per-domain sample count, mean duration and total duration."""
    summaries = []
    for domain in manifest.domains:
        durations = [sf.info(entry.path).duration for entry in domain.files]
        total = float(sum(durations))
        summaries.append(
            DomainSummary(
                name=domain.name,
                count=len(durations),
                mean_seconds=total / len(durations) if durations else 0.0,
                total_seconds=total,
                split_counts={split: sum(1 for e in domain.files if e.split == split) for split in SPLITS},
            )
        )
    return summaries
