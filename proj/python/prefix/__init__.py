# Copyright 2026 The Prefix Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Coarse-to-fine prompt refinement."""

import json

from . import _prefix
from ._prefix import (
    Model,
    PrefixError,
    diversity_metric,
    filter_probabilities,
    filter_top_k_top_p,
)

__all__ = [
    "Gateway",
    "Model",
    "PrefixError",
    "ablate_prompt_length",
    "default_configs",
    "diversity_metric",
    "filter_nsfw",
    "filter_probabilities",
    "filter_top_k_top_p",
    "grad_check",
    "replay",
    "select",
    "start_session",
    "total_loss",
    "toy_corpus",
    "train",
]


def _dump(obj):
    return "" if obj is None else json.dumps(obj)


def default_configs():
    return json.loads(_prefix.default_configs())


def toy_corpus(n, seed=0, image_size=32, nsfw_rate=0.04):
    """Toy triplet corpus as JSONL text."""
    return _prefix.toy_corpus(n, seed, image_size, nsfw_rate)


def filter_nsfw(jsonl, threshold=0.9):
    return _prefix.filter_nsfw(jsonl, threshold)


def total_loss(mse, sft, clip, train_config=None):
    return _prefix.total_loss(mse, sft, clip, _dump(train_config))


def grad_check(term, seed=0):
    return json.loads(_prefix.grad_check(term, seed))


def create_model(model_config, corpus_jsonl):
    return Model.create(_dump(model_config), corpus_jsonl)


def train(model, corpus_jsonl, train_config=None, pretrain_epochs=0, pretrain_lr=3e-3):
    """Trains in place and returns the per-epoch losses as a list of dicts."""
    csv = _prefix.train(model, corpus_jsonl, _dump(train_config), pretrain_epochs, pretrain_lr)
    lines = csv.strip().splitlines()
    keys = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        values = line.split(",")
        rows.append({k: (int(v) if k == "epoch" else float(v)) for k, v in zip(keys, values)})
    return rows


def refine(model, prompt, sampling=None):
    return model.refine(prompt, _dump(sampling))


def start_session(model, prompt, sampling=None):
    return json.loads(model.start_session(prompt, _dump(sampling)))


def select(model, session, index):
    return json.loads(model.select(json.dumps(session), index))


def replay(model, session):
    return json.loads(model.replay(json.dumps(session)))


def ablate_prompt_length(model, lengths=(2, 4, 6, 8, 10, 12), n_samples=8, seed=0):
    return _prefix.ablate_prompt_length(model, list(lengths), n_samples, seed)


class Gateway:
    """In-process gateway: handle() returns (status, decoded JSON body)."""

    def __init__(self, session_log="", thumbnails=False):
        self._gw = _prefix.Gateway(session_log, thumbnails)

    def load_checkpoint(self, path):
        self._gw.load_checkpoint(str(path))

    def handle(self, method, path, body=None):
        status, text = self._gw.handle(method, path, "" if body is None else json.dumps(body))
        return status, json.loads(text)
