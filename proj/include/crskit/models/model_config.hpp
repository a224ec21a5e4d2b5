#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "crskit/error.hpp"

namespace crskit::models {

struct ModelConfig {
  std::string name;
  int embedding_dim = 32;
  int hidden_dim = 32;
  int layers = 1;
  int heads = 2;
  double dropout = 0.0;
  int filters = 16;
  int max_positions = 256;
  int relation_count = 0;
  int vocab_size = 0;
  int catalog_size = 0;
  int label_count = 0;
  int entity_count = 0;
  std::uint64_t seed = 42;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  void validate(bool attention) const {
    const auto positive = [&](int v, const char* what) {
      if (v < 1) throw ModelError(name + ": " + what + " must be >= 1");
    };
    positive(embedding_dim, "embedding_dim");
    positive(hidden_dim, "hidden_dim");
    positive(layers, "layers");
    positive(heads, "heads");
    positive(filters, "filters");
    positive(max_positions, "max_positions");
    if (attention && hidden_dim % heads != 0) throw ModelError(name + ": heads must divide hidden_dim");
    if (dropout < 0.0 || dropout >= 1.0) throw ModelError(name + ": dropout must be in [0, 1)");
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"name", c.name},
          {"embedding_dim", c.embedding_dim},
          {"hidden_dim", c.hidden_dim},
          {"layers", c.layers},
          {"heads", c.heads},
          {"dropout", c.dropout},
          {"filters", c.filters},
          {"max_positions", c.max_positions},
          {"relation_count", c.relation_count},
          {"vocab_size", c.vocab_size},
          {"catalog_size", c.catalog_size},
          {"label_count", c.label_count},
          {"entity_count", c.entity_count},
          {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.name = j.at("name").get<std::string>();
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.filters = j.at("filters").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.relation_count = j.at("relation_count").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.catalog_size = j.at("catalog_size").get<int>();
  c.label_count = j.at("label_count").get<int>();
  c.entity_count = j.at("entity_count").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace crskit::models
