"""Campaign engine: seed filtering, perturbation fan-out, backend querying,
error-finding-rate aggregation, report emission, and replay.

A campaign takes a set of seed clips with declared toxic categories, applies
every configured relation to every retained seed, sends the perturbed clips
to every backend, and counts how often a backend that should still flag the
clip answers non_toxic instead. Artifacts are content-addressed 16-bit WAVs
next to a JSON manifest, so a finished campaign can be replayed offline
against fixture backends and must reproduce its report byte for byte.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .audio import AudioBuffer, content_digest, read_wav, write_wav
from .backends import Category, ModerationBackend, Verdict, build_backend
from .errors import (
    BackendUnavailableError,
    CampaignError,
    ConfigError,
    DomainError,
    MissingFixtureError,
    ParameterError,
    ResponseMappingError,
)
from .perturb import Perturbation, normalize_kind
from .perturb.linguistic import Transcript, benign_discontinuity_audio, load_transcript

# failures of these kinds mark a single case unanswered; anything else is a bug
_CASE_ERRORS = (BackendUnavailableError, MissingFixtureError, ResponseMappingError)

_LINGUISTIC_KINDS = frozenset({"discontinuity"})


def compute_efr(misclassified: int, answered: int) -> Optional[float]:
    """Percent of answered cases the backend let through. None when nothing
    was answered (the ratio is undefined, reported as null)."""
    if misclassified < 0 or answered < 0:
        raise DomainError("counts must be non-negative")
    if misclassified > answered:
        raise DomainError(
            f"misclassified ({misclassified}) exceeds answered ({answered})"
        )
    if answered == 0:
        return None
    return 100.0 * misclassified / answered


@dataclass(frozen=True)
class MrSpec:
    """One metamorphic relation in a campaign: an audio perturbation kind or
    the audio discontinuity op, plus its parameters."""

    kind: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        kind = normalize_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", dict(self.params))
        if kind in _LINGUISTIC_KINDS:
            for name in ("targets", "gap_s", "repeats"):
                if name not in self.params:
                    raise ConfigError(f"{kind} needs '{name}'", field=name)
        else:
            # validates the kind; parameter errors surface on apply
            Perturbation(kind, self.params)

    @property
    def needs_transcript(self) -> bool:
        return self.kind in _LINGUISTIC_KINDS

    @property
    def label(self) -> str:
        inner = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        return f"{self.kind}({inner})"

    def describe(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    def apply(self, audio: AudioBuffer, transcript: Optional[Transcript]) -> AudioBuffer:
        if self.kind in _LINGUISTIC_KINDS:
            if transcript is None:
                raise DomainError(f"{self.kind} requires a seed transcript")
            return benign_discontinuity_audio(
                audio,
                transcript,
                targets=self.params["targets"],
                gap_s=float(self.params["gap_s"]),
                repeats=int(self.params["repeats"]),
            )
        return Perturbation(self.kind, self.params).apply(audio)

    @classmethod
    def from_dict(cls, d: Mapping) -> "MrSpec":
        if "kind" not in d:
            raise ConfigError("mr entry needs 'kind'", field="kind")
        return cls(d["kind"], d.get("params", {}))


@dataclass(frozen=True)
class SeedSpec:
    seed_id: str
    path: Path
    category: Category
    transcript_path: Optional[Path] = None

    def __post_init__(self):
        category = Category.parse(self.category)
        if category is Category.NON_TOXIC:
            raise ConfigError(
                f"seed {self.seed_id!r} must declare a toxic category",
                field="category",
            )
        object.__setattr__(self, "category", category)
        object.__setattr__(self, "path", Path(self.path))
        if self.transcript_path is not None:
            object.__setattr__(self, "transcript_path", Path(self.transcript_path))


@dataclass(frozen=True)
class CampaignConfig:
    seeds: Tuple[SeedSpec, ...]
    mrs: Tuple[MrSpec, ...]
    backend_configs: Tuple[Mapping, ...]
    output_dir: Path
    workers: int = 4

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("config needs a nonempty 'seeds' list", field="seeds")
        if not self.mrs:
            raise ConfigError("config needs a nonempty 'mrs' list", field="mrs")
        if not self.backend_configs:
            raise ConfigError(
                "config needs a nonempty 'backends' list", field="backends"
            )
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError(
                f"workers must be a positive integer, got {self.workers}",
                field="workers",
            )
        ids = [s.seed_id for s in self.seeds]
        if len(set(ids)) != len(ids):
            raise ConfigError("seed ids must be unique", field="seeds")
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: Path = Path(".")) -> "CampaignConfig":
        base_dir = Path(base_dir)
        for name in ("seeds", "mrs", "backends", "output_dir"):
            if name not in d:
                raise ConfigError(f"config is missing '{name}'", field=name)
        seeds = []
        for i, entry in enumerate(d["seeds"]):
            for name in ("id", "path", "category"):
                if name not in entry:
                    raise ConfigError(f"seed #{i} is missing '{name}'", field=name)
            transcript = entry.get("transcript")
            seeds.append(
                SeedSpec(
                    seed_id=str(entry["id"]),
                    path=base_dir / entry["path"],
                    category=entry["category"],
                    transcript_path=base_dir / transcript if transcript else None,
                )
            )
        mrs = tuple(MrSpec.from_dict(m) for m in d["mrs"])
        backends = []
        for b in d["backends"]:
            b = dict(b)
            # file-backed backends get their paths pinned to the config dir
            for key in ("path", "templates_dir"):
                if key in b and not os.path.isabs(str(b[key])):
                    b[key] = str(base_dir / b[key])
            backends.append(b)
        out = d["output_dir"]
        out_path = Path(out) if os.path.isabs(str(out)) else base_dir / out
        return cls(
            seeds=tuple(seeds),
            mrs=mrs,
            backend_configs=tuple(backends),
            output_dir=out_path,
            workers=int(d.get("workers", 4)),
        )

    @classmethod
    def from_file(cls, path) -> "CampaignConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read campaign config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("campaign config must be a JSON object")
        return cls.from_dict(d, base_dir=path.parent)


@dataclass(frozen=True)
class LoadedSeed:
    spec: SeedSpec
    audio: AudioBuffer
    digest: str
    transcript: Optional[Transcript]


@dataclass(frozen=True)
class TestCase:
    seed_id: str
    mr: MrSpec
    digest: str
    artifact: str  # path relative to the output directory
    category: Category


@dataclass
class Cell:
    mr: str
    category: str
    backend: str
    generated: int = 0
    misclassified: int = 0
    unanswered: int = 0
    drift: int = 0

    @property
    def answered(self) -> int:
        return self.generated - self.unanswered

    @property
    def efr(self) -> Optional[float]:
        return compute_efr(self.misclassified, self.answered)

    def as_json(self) -> dict:
        return {
            "mr": self.mr,
            "category": self.category,
            "backend": self.backend,
            "generated": self.generated,
            "misclassified": self.misclassified,
            "unanswered": self.unanswered,
            "efr": self.efr,
        }


@dataclass(frozen=True)
class CampaignReport:
    cells: Tuple[Cell, ...]
    seed_filter: Mapping
    output_dir: Path
    report_json: Path
    report_csv: Path
    manifest: Path

    @property
    def no_seeds(self) -> bool:
        return self.seed_filter["retained"] == 0


def load_seed(spec: SeedSpec) -> LoadedSeed:
    audio = read_wav(spec.path)
    transcript = (
        load_transcript(spec.transcript_path) if spec.transcript_path else None
    )
    return LoadedSeed(spec, audio, content_digest(audio), transcript)


def _query(backend: ModerationBackend, audio: AudioBuffer) -> Optional[Verdict]:
    try:
        return backend.moderate(audio)
    except _CASE_ERRORS:
        return None


def _probe_seeds(
    seeds: Sequence[LoadedSeed],
    backends: Sequence[ModerationBackend],
    workers: int,
) -> List[Tuple[LoadedSeed, str, Optional[Verdict]]]:
    jobs = [(s, b) for s in seeds for b in backends]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        verdicts = list(pool.map(lambda sb: _query(sb[1], sb[0].audio), jobs))
    return [(s, b.name, v) for (s, b), v in zip(jobs, verdicts)]


def _filter_from_probes(
    seeds: Sequence[LoadedSeed],
    backend_names: Sequence[str],
    probes: Sequence[Tuple[LoadedSeed, str, Optional[Verdict]]],
) -> Tuple[List[LoadedSeed], Dict]:
    answered_by = {name: 0 for name in backend_names}
    flagged_by = {name: 0 for name in backend_names}
    matched_by = {name: 0 for name in backend_names}
    toxic_votes: Dict[str, bool] = {s.spec.seed_id: False for s in seeds}
    for seed, backend_name, verdict in probes:
        if verdict is None:
            continue
        answered_by[backend_name] += 1
        if verdict.is_toxic:
            flagged_by[backend_name] += 1
            toxic_votes[seed.spec.seed_id] = True
            if verdict.category is seed.spec.category:
                matched_by[backend_name] += 1
    if all(count == 0 for count in answered_by.values()):
        raise CampaignError("all backends unavailable during seed filtering")

    retained = [s for s in seeds if toxic_votes[s.spec.seed_id]]
    filter_report = {
        "total": len(seeds),
        "retained": len(retained),
        "excluded": len(seeds) - len(retained),
        "retained_ids": sorted(s.spec.seed_id for s in retained),
        "per_backend": {
            name: {
                "answered": answered_by[name],
                "flagged_toxic": flagged_by[name],
                "matched_declared": matched_by[name],
            }
            for name in sorted(answered_by)
        },
    }
    return retained, filter_report


def filter_seeds(
    seeds: Sequence[LoadedSeed],
    backends: Sequence[ModerationBackend],
    workers: int = 4,
) -> Tuple[List[LoadedSeed], Dict]:
    """Drop seeds every backend calls non_toxic. A seed stays when at least
    one backend gives it any toxic label; per-backend tallies record how
    often each backend flagged a seed at all and how often it matched the
    declared category."""
    if not seeds:
        raise CampaignError("no seeds to filter")
    if not backends:
        raise CampaignError("no backends configured")
    probes = _probe_seeds(seeds, backends, workers)
    return _filter_from_probes(seeds, [b.name for b in backends], probes)


def _write_artifact(audio: AudioBuffer, path: Path) -> None:
    # content-addressed: concurrent duplicate writers are harmless
    if path.exists():
        return
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        write_wav(audio, tmp)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise CampaignError(f"cannot write artifact {path}: {exc}") from exc


def _dump_json(obj, path: Path) -> None:
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _verdict_json(verdict: Optional[Verdict]) -> Optional[dict]:
    if verdict is None:
        return None
    return {"category": verdict.category.value, "confidence": verdict.confidence}


def run_campaign(
    config: CampaignConfig,
    backends: Optional[Sequence[ModerationBackend]] = None,
) -> CampaignReport:
    """Execute the full protocol and persist artifacts, manifest, and the
    JSON+CSV reports under config.output_dir. Backend objects may be passed
    directly (replay, tests); otherwise they are built from the config."""
    if backends is None:
        backends = [build_backend(cfg) for cfg in config.backend_configs]
    if len({b.name for b in backends}) != len(backends):
        raise ConfigError("backend names must be unique", field="backends")

    needs_transcript = any(mr.needs_transcript for mr in config.mrs)
    try:
        seeds = [load_seed(spec) for spec in config.seeds]
    except OSError as exc:
        raise CampaignError(f"cannot load seed audio: {exc}") from exc
    if needs_transcript:
        missing = [s.spec.seed_id for s in seeds if s.transcript is None]
        if missing:
            raise ConfigError(
                f"discontinuity relations need aligned transcripts; "
                f"seeds without one: {missing}",
                field="transcript",
            )

    out_dir = config.output_dir
    artifacts_dir = out_dir / "artifacts"
    artifacts_dir.mkdir(parents=True, exist_ok=True)

    probes = _probe_seeds(seeds, backends, config.workers)
    retained, filter_report = _filter_from_probes(
        seeds, [b.name for b in backends], probes
    )

    # seed verdicts go in the manifest so replay can re-run the filter
    seed_verdicts: Dict[str, Dict[str, Optional[dict]]] = {b.name: {} for b in backends}
    for seed, backend_name, verdict in probes:
        seed_verdicts[backend_name][seed.digest] = _verdict_json(verdict)

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        cases: List[TestCase] = []
        case_audio: Dict[str, AudioBuffer] = {}

        def generate(seed: LoadedSeed, mr: MrSpec) -> Tuple[TestCase, AudioBuffer]:
            perturbed = mr.apply(seed.audio, seed.transcript)
            digest = content_digest(perturbed)
            rel = f"artifacts/{digest}.wav"
            _write_artifact(perturbed, out_dir / rel)
            return TestCase(seed.spec.seed_id, mr, digest, rel, seed.spec.category), perturbed

        gen_jobs = [(s, m) for s in retained for m in config.mrs]
        for case, audio in pool.map(lambda sm: generate(*sm), gen_jobs):
            cases.append(case)
            case_audio[case.digest] = audio

        query_jobs = [(case, b) for case in cases for b in backends]
        verdicts = list(
            pool.map(lambda cb: _query(cb[1], case_audio[cb[0].digest]), query_jobs)
        )

    cells: Dict[Tuple[str, str, str], Cell] = {}
    case_verdicts: Dict[str, Dict[str, Optional[dict]]] = {b.name: {} for b in backends}
    for (case, backend), verdict in zip(query_jobs, verdicts):
        key = (case.mr.label, case.category.value, backend.name)
        cell = cells.get(key)
        if cell is None:
            cell = cells[key] = Cell(*key)
        cell.generated += 1
        if verdict is None:
            cell.unanswered += 1
        elif not verdict.is_toxic:
            cell.misclassified += 1
        elif verdict.category is not case.category:
            cell.drift += 1
        if verdict is not None:
            case_verdicts[backend.name][case.digest] = _verdict_json(verdict)

    manifest_path = out_dir / "manifest.json"
    manifest = {
        "version": __version__,
        "seeds": [
            {
                "id": s.spec.seed_id,
                "path": str(s.spec.path),
                "category": s.spec.category.value,
                "digest": s.digest,
                "transcript": str(s.spec.transcript_path)
                if s.spec.transcript_path
                else None,
            }
            for s in seeds
        ],
        "mrs": [mr.describe() for mr in config.mrs],
        "backends": [b.name for b in backends],
        "verdicts": {
            name: {**seed_verdicts[name], **case_verdicts[name]}
            for name in seed_verdicts
        },
        "cases": [
            {
                "seed_id": c.seed_id,
                "mr": c.mr.describe(),
                "digest": c.digest,
                "artifact": c.artifact,
                "category": c.category.value,
            }
            for c in sorted(cases, key=lambda c: (c.seed_id, c.mr.label))
        ],
        "workers": config.workers,
    }
    _dump_json(manifest, manifest_path)

    ordered = tuple(
        cells[key] for key in sorted(cells)
    )
    report_json_path = out_dir / "report.json"
    report = {
        "version": __version__,
        "cells": [cell.as_json() for cell in ordered],
        "category_drift": [
            {
                "mr": cell.mr,
                "category": cell.category,
                "backend": cell.backend,
                "count": cell.drift,
            }
            for cell in ordered
            if cell.drift
        ],
        "seed_filter": filter_report,
        "manifest": manifest_path.name,
    }
    _dump_json(report, report_json_path)

    report_csv_path = out_dir / "report.csv"
    with open(report_csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["mr", "category", "backend", "generated", "misclassified", "unanswered", "efr"]
        )
        for cell in ordered:
            efr = cell.efr
            writer.writerow(
                [
                    cell.mr,
                    cell.category,
                    cell.backend,
                    cell.generated,
                    cell.misclassified,
                    cell.unanswered,
                    "" if efr is None else repr(efr),
                ]
            )

    return CampaignReport(
        cells=ordered,
        seed_filter=filter_report,
        output_dir=out_dir,
        report_json=report_json_path,
        report_csv=report_csv_path,
        manifest=manifest_path,
    )


def replay_campaign(manifest_path, output_dir, workers: int = 4) -> CampaignReport:
    """Re-run a recorded campaign offline: seeds are re-read, artifacts are
    regenerated from the recorded relation descriptors, and every query is
    answered by a fixture backend built from the recorded verdicts. The
    resulting report must be byte-identical to the original."""
    from .backends.fixture import FixtureBackend

    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from exc

    backends = [
        FixtureBackend(
            {
                digest: Verdict(entry["category"], entry["confidence"])
                for digest, entry in manifest["verdicts"][name].items()
                if entry is not None
            },
            name=name,
        )
        for name in manifest["backends"]
    ]
    config = CampaignConfig(
        seeds=tuple(
            SeedSpec(
                seed_id=s["id"],
                path=s["path"],
                category=s["category"],
                transcript_path=s.get("transcript"),
            )
            for s in manifest["seeds"]
        ),
        mrs=tuple(MrSpec.from_dict(m) for m in manifest["mrs"]),
        backend_configs=({"kind": "fixture", "path": "unused"},),
        output_dir=output_dir,
        workers=workers,
    )
    return run_campaign(config, backends=backends)


def export_retraining_set(
    manifest_path,
    split: float,
    seed: int,
    output_path=None,
) -> List[dict]:
    """Build a balanced retraining manifest from a finished campaign:
    cases are grouped by (relation, category), each group is shuffled with
    the given seed, and `split` of the group is tagged test with an equal
    share tagged train."""
    if not (0.0 < split < 1.0):
        raise ParameterError(f"split must lie in (0, 1), got {split}")
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from exc

    groups: Dict[Tuple[str, str], List[dict]] = {}
    for case in manifest["cases"]:
        mr_label = MrSpec.from_dict(case["mr"]).label
        groups.setdefault((mr_label, case["category"]), []).append(case)

    rng = np.random.default_rng(seed)
    rows: List[dict] = []
    for key in sorted(groups):
        group = sorted(groups[key], key=lambda c: (c["digest"], c["seed_id"]))
        order = rng.permutation(len(group))
        take = int(round(split * len(group)))
        take = min(take, len(group) // 2)  # test and train must not overlap
        for rank, idx in enumerate(order):
            if rank < take:
                tag = "test"
            elif rank < 2 * take:
                tag = "train"
            else:
                continue
            case = group[idx]
            rows.append(
                {
                    "artifact": case["artifact"],
                    "label": case["category"],
                    "mr": case["mr"],
                    "split": tag,
                }
            )
    rows.sort(key=lambda r: (r["split"], r["label"], json.dumps(r["mr"], sort_keys=True), r["artifact"]))
    if output_path is not None:
        _dump_json(rows, Path(output_path))
    return rows
