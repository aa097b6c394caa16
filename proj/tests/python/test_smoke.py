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

import json

import pytest

import prefix


@pytest.fixture(scope="module")
def corpus():
    return prefix.toy_corpus(24, seed=3, image_size=16, nsfw_rate=0.0)


@pytest.fixture(scope="module")
def model(corpus):
    cfg = prefix.default_configs()["tiny_model"]
    return prefix.create_model(cfg, corpus)


def test_default_configs():
    cfg = prefix.default_configs()
    assert cfg["sampling"]["top_p"] == 0.95
    assert cfg["sampling"]["top_k"] == 50
    assert cfg["sampling"]["stride"] == 6
    assert cfg["sampling"]["n_candidates"] == 3
    assert cfg["train"]["alpha1"] == 0.1
    assert cfg["train"]["batch_size"] == 16


def test_nucleus_filter():
    out = prefix.filter_probabilities([0.5, 0.3, 0.15, 0.05], top_k=4, top_p=0.95)
    assert out == pytest.approx([10 / 19, 6 / 19, 3 / 19, 0.0], abs=1e-15)


def test_total_loss():
    assert prefix.total_loss(1.0, 2.0, 3.0) == pytest.approx(1.5, abs=1e-12)
    assert prefix.total_loss(1.0, 2.0, 3.0, {"use_mse": False}) == pytest.approx(0.5, abs=1e-12)


def test_diversity():
    assert prefix.diversity_metric([["a b", "a b"]]) == 0.0
    assert prefix.diversity_metric([["a b", "c d"]]) == 1.0
    with pytest.raises(prefix.PrefixError):
        prefix.diversity_metric([["a"]])


def test_filter_nsfw_retains_clean(corpus):
    retained, removed, quarantined = prefix.filter_nsfw(corpus)
    assert len(retained.splitlines()) == 24
    assert removed == ""
    assert quarantined == 0


def test_session_round_trip(model):
    s = prefix.start_session(model, "a green tree", {"seed": 5})
    assert s["status"] == "awaiting-selection"
    assert len(s["rounds"][0]["candidates"]) == 3
    for c in s["rounds"][0]["candidates"]:
        assert c["text"].startswith("a green tree")
        assert c["eos"] or c["new_tokens"] == 6
    live = next((i for i, c in enumerate(s["rounds"][0]["candidates"]) if not c["eos"]), 0)
    s = prefix.select(model, s, live)
    assert prefix.replay(model, s)["rounds"] == s["rounds"]


def test_train_and_refine(tmp_path, corpus, model):
    curve = prefix.train(model, corpus, {"epochs": 2, "batch_size": 4, "learning_rate": 1e-3})
    assert [row["epoch"] for row in curve] == [1, 2]
    path = tmp_path / "m.ckpt"
    model.save(str(path))
    loaded = prefix.Model.load(str(path))
    assert prefix.refine(loaded, "a cat", {"seed": 1}) == prefix.refine(model, "a cat", {"seed": 1})


def test_gateway(tmp_path, model):
    gw = prefix.Gateway(str(tmp_path / "sessions.jsonl"))
    status, body = gw.handle("GET", "/healthz")
    assert status == 200 and body["status"] == "degraded"
    assert gw.handle("POST", "/sessions", {"coarse_prompt": "a cat"})[0] == 503
    path = tmp_path / "m.ckpt"
    model.save(str(path))
    gw.load_checkpoint(path)
    status, body = gw.handle("POST", "/sessions", {"coarse_prompt": "a cat"})
    assert status == 201 and len(body["rounds"][0]["candidates"]) == 3
    assert gw.handle("POST", "/sessions", {"coarse_prompt": ""})[0] == 400
    assert gw.handle("GET", "/sessions/nope")[0] == 404


def test_length_ablation(model):
    csv = prefix.ablate_prompt_length(model, lengths=[2, 6], n_samples=2)
    lines = csv.strip().splitlines()
    assert lines[0] == "setting,scorer,mean,stddev,count"
    assert len(lines) == 1 + 2 * 3


def test_grad_check_sft():
    report = prefix.grad_check("sft")
    assert report["max_rel_error"] <= 1e-4
