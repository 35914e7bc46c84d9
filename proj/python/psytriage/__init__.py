"""Triage classifier toolkit: feature extraction, model selection and LLM comparison."""

import json
import os

from ._core import (
    Error,
    __version__,
    metrics,
    parse_verdict,
    relative_deviation,
    roc_auc,
    sha256_file,
    stage_names,
    tokenize,
)
from . import _core

__all__ = [
    "Error",
    "Model",
    "__version__",
    "build_prompt",
    "extract_features",
    "generate",
    "metrics",
    "parse_verdict",
    "relative_deviation",
    "roc_auc",
    "run_pipeline",
    "run_stage",
    "sha256_file",
    "stage_names",
    "tokenize",
]


def extract_features(record):
    """Keyword per text category for one rescue record (dict), None when absent."""
    return json.loads(_core._extract_features(json.dumps(record)))


def build_prompt(features, reduced=False):
    """Prompt text for a feature-vector dict."""
    return _core._build_prompt(json.dumps(features), reduced)


def generate(config):
    """Synthetic rescue records for a generator config dict."""
    return json.loads(_core._generate(json.dumps(config)))


def run_pipeline(config, base_dir=""):
    """Runs every stage and returns the manifest as a dict."""
    return json.loads(_core._run_pipeline(json.dumps(config), os.fspath(base_dir)))


def run_stage(config, name, base_dir=""):
    """Runs one stage against the artifacts already in config["out_dir"]."""
    return json.loads(_core._run_stage(json.dumps(config), name, os.fspath(base_dir)))


class Model:
    """A trained classifier loaded from best_model.json or a model dict."""

    def __init__(self, model):
        self._m = _core._Model(json.dumps(model))

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls(json.load(f))

    @property
    def kind(self):
        return self._m.kind

    @property
    def feature_names(self):
        return list(self._m.feature_names)

    def score(self, x):
        return self._m.score(list(map(float, x)))

    def predict(self, x):
        return self._m.predict(list(map(float, x)))
