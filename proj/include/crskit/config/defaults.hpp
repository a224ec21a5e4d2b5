#pragma once

#include <string>
#include <vector>

#include "crskit/config/config.hpp"

namespace crskit::config {

// Shipped default layer. Every key a command reads has an entry here, so a
// config file only needs to state what differs.
inline constexpr const char* kDefaultConfigText = R"(# dataset: corpus selection and preprocessing
dataset:
  name: toy                 # corpus name, recorded in artifacts
  dir: data/toy             # unified corpus directory
  url: ""                   # base URL to fetch missing unified files from (empty: no fetch)
  verify_checksums: true    # verify against checksums.txt when the file exists
  tokenizer: whitespace     # whitespace | char
  min_freq: 1               # minimum train-split count for a vocabulary token
  max_vocab: 30000          # vocabulary cap, the four special tokens included
  valid_fraction: 0.1       # held-out tail of train when a raw release has no validation file
# data: instance construction and batching
data:
  max_context_turns: 8      # dialog turns kept in a context
  max_len: 128              # per-field token cap, oldest ids dropped first
  max_response_len: 30      # content tokens kept per response, start/end excluded
  rec_from_seeker: false    # also build rec instances from seeker turns
  use_profile_history: true # prepend the profile interaction history to item sequences
  batch_size: 8
  shuffle: true
# task: one model per sub-task; "none" disables the sub-task
task:
  rec:
    model: popularity
  conv:
    model: transformer
  policy:
    model: pmi
# model: architecture defaults, overridable per sub-task as task.<name>.<key>
model:
  embedding_dim: 32
  hidden_dim: 32
  layers: 1
  heads: 2
  dropout: 0.0
  filters: 16               # TextCNN filters per kernel width
  max_positions: 256        # learned position table size for attention models
# train: optimization and early stopping
train:
  seed: 42
  epochs: 10
  lr: 0.001
  schedule: warmup_exp      # warmup_exp | constant
  warmup_steps: 0
  decay: 1.0                # per-step multiplicative decay after warmup
  weight_decay: 0.0         # decoupled weight decay
  beta1: 0.9
  beta2: 0.999
  eps: 1.0e-8
  clip_norm: 1.0            # global gradient norm cap, 0 disables
  patience: 3
  min_delta: 0.0            # improvement margin for early stopping
  monitor: conv.ppl         # <task>.<metric> on the validation split
  mode: min                 # min | max
# eval: metric settings
eval:
  rec_ks: [1, 10, 50]
  policy_ks: [1, 3, 5]
  bleu_smoothing: "off"     # only "off" is supported
  generate: true            # decode responses for BLEU/Distinct/Embedding metrics
  valid_generate: false     # also decode during per-epoch validation
  decode: greedy            # greedy | beam
  beam_size: 3
# serve: interaction service
serve:
  host: 127.0.0.1
  port: 8080
  top_k: 10
  sessions_dir: sessions
  system_id: ""             # empty: the artifact directory name
  min_response_len: 1
  decode: greedy
  beam_size: 3
# run: output layout
run:
  output_dir: runs
)";

inline const ConfigTree& default_config() {
  static const ConfigTree tree = parse_config_text(kDefaultConfigText);
  return tree;
}

inline std::vector<std::string> configured_tasks(const ConfigTree& config) {
  std::vector<std::string> out;
  for (const auto& name : config.keys("task")) {
    const json* model = config.find("task." + name + ".model");
    if (!model || !model->is_string() || model->get<std::string>() != "none") out.push_back(name);
  }
  return out;
}

// Required keys plus the types of every default key present in `config`.
inline Schema schema_for(const ConfigTree& config) {
  Schema schema;
  schema["dataset.name"] = {ValueType::String, true};
  schema["train.seed"] = {ValueType::Int, true};
  for (const auto& task : configured_tasks(config)) schema["task." + task + ".model"] = {ValueType::String, true};

  const auto add = [&](const char* key, ValueType t) { schema[key] = {t, false}; };
  add("dataset.dir", ValueType::String);
  add("dataset.tokenizer", ValueType::String);
  add("dataset.min_freq", ValueType::Int);
  add("dataset.max_vocab", ValueType::Int);
  add("data.max_context_turns", ValueType::Int);
  add("data.max_len", ValueType::Int);
  add("data.max_response_len", ValueType::Int);
  add("data.batch_size", ValueType::Int);
  add("data.shuffle", ValueType::Bool);
  add("data.rec_from_seeker", ValueType::Bool);
  add("model.embedding_dim", ValueType::Int);
  add("model.hidden_dim", ValueType::Int);
  add("model.layers", ValueType::Int);
  add("model.heads", ValueType::Int);
  add("model.dropout", ValueType::Float);
  add("train.epochs", ValueType::Int);
  add("train.lr", ValueType::Float);
  add("train.warmup_steps", ValueType::Int);
  add("train.decay", ValueType::Float);
  add("train.weight_decay", ValueType::Float);
  add("train.clip_norm", ValueType::Float);
  add("train.patience", ValueType::Int);
  add("train.monitor", ValueType::String);
  add("train.mode", ValueType::String);
  add("eval.rec_ks", ValueType::List);
  add("eval.policy_ks", ValueType::List);
  add("serve.top_k", ValueType::Int);
  add("serve.port", ValueType::Int);
  return schema;
}

// Semantic checks that go beyond key types.
inline std::vector<Violation> check_semantics(const ConfigTree& c) {
  std::vector<Violation> out;
  const auto want = [&](bool ok, const char* key, const std::string& msg) {
    if (!ok) out.push_back({key, msg});
  };
  const auto tok = c.get<std::string>("dataset.tokenizer", "whitespace");
  want(tok == "whitespace" || tok == "char", "dataset.tokenizer", "must be whitespace or char");
  want(c.get<std::int64_t>("dataset.min_freq", 1) >= 1, "dataset.min_freq", "must be >= 1");
  want(c.get<std::int64_t>("dataset.max_vocab", 30000) >= 4, "dataset.max_vocab", "must be >= 4");
  want(c.get<std::int64_t>("data.max_context_turns", 8) >= 1, "data.max_context_turns", "must be >= 1");
  want(c.get<std::int64_t>("data.batch_size", 8) >= 1, "data.batch_size", "must be >= 1");
  want(c.get<std::int64_t>("data.max_len", 128) >= c.get<std::int64_t>("data.max_response_len", 30) + 2,
       "data.max_len", "must be >= data.max_response_len + 2");
  want(c.get<std::int64_t>("train.patience", 3) >= 1, "train.patience", "must be >= 1");
  want(c.get<std::int64_t>("train.warmup_steps", 0) >= 0, "train.warmup_steps", "must be >= 0");
  const double decay = c.get<double>("train.decay", 1.0);
  want(decay > 0.0 && decay <= 1.0, "train.decay", "must be in (0, 1]");
  const auto mode = c.get<std::string>("train.mode", "min");
  want(mode == "min" || mode == "max", "train.mode", "must be min or max");
  const auto sched = c.get<std::string>("train.schedule", "warmup_exp");
  want(sched == "warmup_exp" || sched == "constant", "train.schedule", "must be warmup_exp or constant");
  want(c.get<std::string>("eval.bleu_smoothing", "off") == "off", "eval.bleu_smoothing", "only \"off\" is supported");
  for (const char* key : {"eval.decode", "serve.decode"}) {
    const auto d = c.get<std::string>(key, "greedy");
    want(d == "greedy" || d == "beam", key, "must be greedy or beam");
  }
  want(c.get<std::int64_t>("serve.top_k", 10) >= 1, "serve.top_k", "must be >= 1");
  return out;
}

inline std::vector<Violation> validate_all(const ConfigTree& config) {
  auto out = validate(config, schema_for(config));
  if (!out.empty()) return out;  // semantic checks assume well-typed values
  auto sem = check_semantics(config);
  out.insert(out.end(), sem.begin(), sem.end());
  return out;
}

}  // namespace crskit::config
