import os

import pytest

from classim.ingest import ScriptedExtractor, build_dataset, load_lessons_dir
from classim.model import (
    ClassroomContext,
    ContextDistillation,
    validate_context,
)
from classim.retrieval import ProfileIndex

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(REPO_ROOT, "fixtures")
LESSONS_DIR = os.path.join(FIXTURES, "lessons")
GOLD_CORPUS = os.path.join(FIXTURES, "gold_corpus.jsonl")
STUDY_COUNTS = os.path.join(FIXTURES, "study_counts.json")


@pytest.fixture(scope="session")
def lessons():
    return load_lessons_dir(LESSONS_DIR)


@pytest.fixture(scope="session")
def dataset(lessons):
    return build_dataset(lessons, ScriptedExtractor())


@pytest.fixture(scope="session")
def index(dataset):
    return ProfileIndex(profiles=dataset.profiles)


@pytest.fixture
def context():
    return validate_context(ClassroomContext(
        grade_level=7,
        math_topic="Ratios and Division",
        class_description="a mixed class, moderately engaged",
        distilled=ContextDistillation.uniform(),
    ))
