from __future__ import annotations

import json
from pathlib import Path

import pytest

from vtgkit.dataset import AnnotationRecord, Dataset, VideoMeta
from vtgkit.spans import TimeSpan

FIXTURES = Path(__file__).parent / "fixtures"

# counts fixed at fixture-generation time
FIXTURE_COUNTS = {
    "charades": (5, 12),
    "activitynet": (4, 9),
    "qvhighlights": (6, 7),
}


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def build_dataset(name: str, rows: list[tuple[str, float, str, str, float, float]],
                  source: str = "other") -> Dataset:
    """rows: (video_id, duration, annotation_id, query, start, end)"""
    videos: dict[str, VideoMeta] = {}
    annotations = []
    for video_id, duration, ann_id, query, start, end in rows:
        videos.setdefault(video_id, VideoMeta(video_id, duration, source_dataset=source))
        annotations.append(AnnotationRecord(
            annotation_id=ann_id, video_id=video_id, query=query,
            span=TimeSpan(start, end),
        ))
    return Dataset(name=name, videos=videos, annotations=annotations)


@pytest.fixture
def tiny_dataset() -> Dataset:
    return build_dataset("tiny", [
        ("v1", 30.0, "a1", "a person opens the door", 2.0, 8.0),
        ("v1", 30.0, "a2", "a person pours water into a glass", 12.0, 18.0),
        ("v2", 60.0, "a3", "a dog jumps onto the couch", 5.0, 15.0),
        ("v2", 60.0, "a4", "someone turns on the television", 30.0, 42.0),
    ])


def write_jsonl(path: Path, objs: list[dict]) -> Path:
    with path.open("w", encoding="utf-8") as f:
        for obj in objs:
            f.write(json.dumps(obj) + "\n")
    return path
