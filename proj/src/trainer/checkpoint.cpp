// Copyright 2026 The Prefix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prefix/trainer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "prefix/common/error.hpp"

namespace prefix::trainer {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'P', 'F', 'X', 'C', 'K', 'P', 'T', '1'};
constexpr int kFormat = 1;

std::uint64_t to_le(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) {
    return x;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((x >> (8 * i)) & 0xffU) << (8 * (7 - i));
    return r;
  }
}

void put_u64(std::string& out, std::uint64_t x) {
  x = to_le(x);
  char buf[8];
  std::memcpy(buf, &x, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t x = 0;
  std::memcpy(&x, p, 8);
  return to_le(x);
}

struct Blob {
  std::string name;
  const ag::Matrix* value;
};

json breakdown_json(const LossBreakdown& l) {
  return {{"mse", l.mse}, {"sft", l.sft}, {"clip", l.clip}, {"total", l.total}};
}

LossBreakdown breakdown_from(const json& j) {
  return {j.at("mse").get<double>(), j.at("sft").get<double>(), j.at("clip").get<double>(),
          j.at("total").get<double>()};
}

json epoch_json(const EpochLoss& e) { return {{"epoch", e.epoch}, {"steps", e.steps}, {"loss", breakdown_json(e.loss)}}; }

EpochLoss epoch_from(const json& j) {
  return {j.at("epoch").get<int>(), breakdown_from(j.at("loss")), j.at("steps").get<int>()};
}

void write_file(const std::filesystem::path& path, json header, const std::vector<Blob>& blobs) {
  json table = json::array();
  std::uint64_t offset = 0;
  for (const auto& b : blobs) {
    table.push_back({{"name", b.name}, {"rows", b.value->rows()}, {"cols", b.value->cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(b.value->size()) * 8;
  }
  header["tensors"] = std::move(table);
  const std::string text = header.dump();

  std::string out(kMagic, 8);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& b : blobs) {
    for (ag::Index i = 0; i < b.value->size(); ++i) {
      put_u64(out, std::bit_cast<std::uint64_t>(b.value->data()[i]));
    }
  }
  // Write then rename so a crash never leaves a half-written checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw CheckpointError("cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json model_header(const Model& model) {
  return {{"format", kFormat},
          {"model_config", to_json(model.config())},
          {"vocabulary", model.vocab().tokens()},
          {"vocab_hash", vocab_hash_hex(model.vocab())}};
}

struct Loaded {
  json header;
  std::map<std::string, ag::Matrix> tensors;
};

Loaded read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (data.size() < 16 || std::memcmp(data.data(), kMagic, 8) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint");
  }
  const std::uint64_t header_len = get_u64(data.data() + 8);
  if (header_len > data.size() - 16) throw CheckpointError("checkpoint header is truncated");
  Loaded out;
  try {
    out.header = json::parse(data.substr(16, header_len));
    if (out.header.at("format").get<int>() != kFormat) throw CheckpointError("unsupported checkpoint format");
    const std::size_t base = 16 + header_len;
    for (const auto& t : out.header.at("tensors")) {
      const auto rows = t.at("rows").get<ag::Index>();
      const auto cols = t.at("cols").get<ag::Index>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto bytes = static_cast<std::uint64_t>(rows * cols) * 8;
      if (rows < 0 || cols < 0 || base + offset + bytes > data.size()) {
        throw CheckpointError("tensor " + t.at("name").get<std::string>() + " runs past the end of the file");
      }
      ag::Matrix m(rows, cols);
      const char* p = data.data() + base + offset;
      for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(get_u64(p + 8 * i));
      out.tensors.emplace(t.at("name").get<std::string>(), std::move(m));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  return out;
}

Model build_model(const Loaded& loaded, const text::Vocabulary* expected) {
  const json& h = loaded.header;
  text::Vocabulary vocab;
  ModelConfig config;
  try {
    vocab = text::Vocabulary::from_tokens(h.at("vocabulary").get<std::vector<std::string>>());
    config = model_config_from_json(h.at("model_config"));
    if (vocab_hash_hex(vocab) != h.at("vocab_hash").get<std::string>()) {
      throw CheckpointError("checkpoint vocabulary does not match its recorded hash");
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const SchemaError& e) {
    throw CheckpointError(std::string("bad checkpoint vocabulary: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("bad checkpoint model config: ") + e.what());
  }
  if (expected != nullptr && expected->hash() != vocab.hash()) {
    throw CheckpointError(fmt::format("vocabulary hash {} does not match checkpoint vocabulary hash {}",
                                      vocab_hash_hex(*expected), vocab_hash_hex(vocab)));
  }
  Model model(config, std::move(vocab));
  for (auto& p : model.parameters()) {
    auto it = loaded.tensors.find("param." + p.name);
    if (it == loaded.tensors.end()) throw CheckpointError("checkpoint lacks parameter " + p.name);
    if (it->second.rows() != p.tensor.rows() || it->second.cols() != p.tensor.cols()) {
      throw CheckpointError("shape mismatch for parameter " + p.name);
    }
    p.tensor.mutable_value() = it->second;
  }
  return model;
}

}  // namespace

std::string vocab_hash_hex(const text::Vocabulary& vocab) { return fmt::format("{:016x}", vocab.hash()); }

void save_model(const std::filesystem::path& path, const Model& model) {
  const auto params = model.parameters();
  std::vector<Blob> blobs;
  for (const auto& p : params) blobs.push_back({"param." + p.name, &p.tensor.value()});
  write_file(path, model_header(model), blobs);
}

void save_checkpoint(const std::filesystem::path& path, const Trainer& trainer) {
  json header = model_header(trainer.model());
  header["train_config"] = to_json(trainer.config());
  header["step"] = trainer.step();
  header["adam_t"] = trainer.optimizer().t();
  json history = json::array();
  for (const auto& e : trainer.history()) history.push_back(epoch_json(e));
  header["history"] = std::move(history);
  header["running"] = epoch_json(trainer.running());

  const auto params = trainer.model().parameters();
  std::vector<Blob> blobs;
  for (const auto& p : params) blobs.push_back({"param." + p.name, &p.tensor.value()});
  const auto& opt = trainer.optimizer();
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    blobs.push_back({"adam.m." + opt.params()[i].name, &opt.first_moments()[i]});
    blobs.push_back({"adam.v." + opt.params()[i].name, &opt.second_moments()[i]});
  }
  write_file(path, std::move(header), blobs);
}

Model load_model(const std::filesystem::path& path, const text::Vocabulary* expected) {
  return build_model(read_file(path), expected);
}

Trainer load_trainer(const std::filesystem::path& path) {
  Loaded loaded = read_file(path);
  const json& h = loaded.header;
  if (!h.contains("train_config")) throw CheckpointError(path.string() + " holds a model without trainer state");
  TrainConfig cfg;
  try {
    cfg = train_config_from_json(h.at("train_config"));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("bad checkpoint train config: ") + e.what());
  }
  Trainer trainer(build_model(loaded, nullptr), cfg);
  try {
    trainer.set_step(h.at("step").get<std::uint64_t>());
    trainer.optimizer().set_t(h.at("adam_t").get<std::int64_t>());
    for (const auto& e : h.at("history")) trainer.history().push_back(epoch_from(e));
    trainer.running() = epoch_from(h.at("running"));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed trainer state: ") + e.what());
  }
  auto& opt = trainer.optimizer();
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    const std::string& name = opt.params()[i].name;
    auto m = loaded.tensors.find("adam.m." + name);
    auto v = loaded.tensors.find("adam.v." + name);
    if (m == loaded.tensors.end() || v == loaded.tensors.end()) {
      throw CheckpointError("checkpoint lacks optimizer state for " + name);
    }
    opt.first_moments()[i] = m->second;
    opt.second_moments()[i] = v->second;
  }
  return trainer;
}

}  // namespace prefix::trainer
