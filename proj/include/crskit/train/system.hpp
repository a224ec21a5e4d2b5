#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crskit/batching/batching.hpp"
#include "crskit/config/defaults.hpp"
#include "crskit/corpus/text.hpp"
#include "crskit/eval/report.hpp"
#include "crskit/models/registry.hpp"
#include "crskit/train/checkpoint.hpp"
#include "crskit/train/optimizer.hpp"

namespace crskit::train {

using batching::Task;
using config::ConfigTree;
using models::Model;

// ---- early stopping ----

enum class Mode { Min, Max };

inline Mode mode_from_string(const std::string& s) {
  if (s == "min") return Mode::Min;
  if (s == "max") return Mode::Max;
  throw ConfigError("train.mode must be min or max, got '" + s + "'");
}

struct TrainState {
  int epoch = 0;
  long global_step = 0;
  double best_metric = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = 0;
  int patience_counter = 0;
  std::vector<nlohmann::json> history;

  bool has_best() const { return !std::isnan(best_metric); }
};

enum class StopDecision { Continue, Stop };

// Records `metric` for state.epoch. Improvement means better than the best by
// more than min_delta.
inline StopDecision early_stop_update(TrainState& s, double metric, Mode mode, int patience, double min_delta = 0.0) {
  if (patience < 1) throw ConfigError("patience must be >= 1");
  const bool improved = !s.has_best() ||
                        (mode == Mode::Min ? metric < s.best_metric - min_delta : metric > s.best_metric + min_delta);
  if (improved) {
    s.best_metric = metric;
    s.best_epoch = s.epoch;
    s.patience_counter = 0;
  } else {
    ++s.patience_counter;
  }
  return s.patience_counter >= patience ? StopDecision::Stop : StopDecision::Continue;
}

// ---- interaction types ----

struct PolicyChoice {
  int label = -1;
  std::string name;
  std::vector<std::pair<int, double>> top;  // up to five (label, probability), best first
};

struct RecEntry {
  int item = 0;
  std::optional<double> score;  // empty for overridden items the model did not rank
};

struct PastTurn {
  std::string user_text;
  std::string response_raw;         // with item placeholders
  std::vector<int> response_items;  // items placed into the placeholders
  std::optional<int> policy_label;
};

struct Profile {
  std::vector<int> history;  // catalog item ids
  std::string text;
};

struct TurnContext {
  corpus::Dialog dialog;
  batching::Context context;
};

struct ConvOutput {
  std::string response;      // rendered, item names filled in
  std::string response_raw;  // with placeholders
  std::vector<int> response_items;
};

inline const char* task_key(Task t) { return batching::to_string(t); }

// Flat "task.metric" view of a set of reports.
inline eval::MetricMap flatten(const std::vector<eval::MetricReport>& reports) {
  eval::MetricMap out;
  for (const auto& r : reports)
    for (const auto& [k, v] : r.metrics) out[r.task + "." + k] = v;
  return out;
}

class System {
 public:
  using Evaluator = std::function<eval::MetricMap(System&, int epoch)>;

  System(ConfigTree cfg, std::shared_ptr<const corpus::DatasetBundle> bundle)
      : cfg_(std::move(cfg)), bundle_(std::move(bundle)) {
    inst_.max_context_turns = static_cast<int>(cfg_.get<std::int64_t>("data.max_context_turns"));
    inst_.max_response_len = static_cast<int>(cfg_.get<std::int64_t>("data.max_response_len"));
    inst_.rec_from_seeker = cfg_.get<bool>("data.rec_from_seeker");
    build_models();
  }

  const ConfigTree& config() const { return cfg_; }
  const corpus::DatasetBundle& bundle() const { return *bundle_; }
  std::shared_ptr<const corpus::DatasetBundle> bundle_ptr() const { return bundle_; }

  // Configured sub-tasks in pipeline order (policy, rec, conv).
  std::vector<Task> tasks() const {
    std::vector<Task> out;
    for (Task t : {Task::Policy, Task::Rec, Task::Conv})
      if (roles_.count(t)) out.push_back(t);
    return out;
  }
  Model* model(Task t) const {
    auto it = roles_.find(t);
    return it == roles_.end() ? nullptr : it->second;
  }
  std::string model_name(Task t) const { return model(t) ? model(t)->config().name : "none"; }

  std::vector<Model*> distinct_models() const {
    std::vector<Model*> out;
    for (auto& m : owned_) out.push_back(m.get());
    return out;
  }

  std::map<std::string, nn::Matrix> parameters() const {
    std::map<std::string, nn::Matrix> out;
    for (const auto& m : owned_)
      for (const auto& [n, p] : m->params()) out.emplace(n, p.value);
    return out;
  }
  void load_parameters(const std::map<std::string, nn::Matrix>& values) {
    for (auto& m : owned_) restore(m->params(), values);
  }

  // ---- instances ----

  const std::vector<batching::RecInstance>& rec_instances(corpus::Split s) const {
    auto& slot = rec_cache_[s];
    if (!slot) slot = batching::make_rec_instances(bundle_->split(s), inst_);
    return *slot;
  }
  const std::vector<batching::ConvInstance>& conv_instances(corpus::Split s) const {
    auto& slot = conv_cache_[s];
    if (!slot) slot = batching::make_conv_instances(bundle_->split(s), inst_);
    return *slot;
  }
  const std::vector<batching::PolicyInstance>& policy_instances(corpus::Split s) const {
    auto& slot = policy_cache_[s];
    if (!slot) slot = batching::make_policy_instances(bundle_->split(s), inst_);
    return *slot;
  }

  std::vector<batching::TaskBatch> batches(Task t, corpus::Split s, bool shuffle, std::uint64_t seed) const {
    const int bs = static_cast<int>(cfg_.get<std::int64_t>("data.batch_size"));
    const int max_len = static_cast<int>(cfg_.get<std::int64_t>("data.max_len"));
    switch (t) {
      case Task::Rec: return batching::iterate_batches(rec_instances(s), bs, shuffle, seed, corpus::kPadId, max_len);
      case Task::Conv: return batching::iterate_batches(conv_instances(s), bs, shuffle, seed, corpus::kPadId, max_len);
      default: return batching::iterate_batches(policy_instances(s), bs, shuffle, seed, corpus::kPadId, max_len);
    }
  }

  // ---- training ----

  TrainState fit(const Evaluator& evaluator = {}) {
    const auto& log = util::logger();
    const int epochs = static_cast<int>(cfg_.get<std::int64_t>("train.epochs"));
    const auto seed = static_cast<std::uint64_t>(cfg_.get<std::int64_t>("train.seed"));
    const double base_lr = cfg_.get<double>("train.lr");
    const bool constant = cfg_.get<std::string>("train.schedule") == "constant";
    const long warmup = static_cast<long>(cfg_.get<std::int64_t>("train.warmup_steps"));
    const double decay = cfg_.get<double>("train.decay");
    const int patience = static_cast<int>(cfg_.get<std::int64_t>("train.patience"));
    const double min_delta = cfg_.get<double>("train.min_delta");
    const auto monitor = cfg_.get<std::string>("train.monitor");
    const Mode mode = mode_from_string(cfg_.get<std::string>("train.mode"));
    const bool shuffle = cfg_.get<bool>("data.shuffle");
    AdamOptions ao{cfg_.get<double>("train.beta1"), cfg_.get<double>("train.beta2"), cfg_.get<double>("train.eps"),
                   cfg_.get<double>("train.weight_decay"), cfg_.get<double>("train.clip_norm")};

    fit_statistics();
    std::map<const Model*, Adam> opt;
    bool any_trainable = false;
    for (auto& m : owned_)
      if (m->trainable()) {
        opt.emplace(m.get(), Adam(ao));
        any_trainable = true;
      }
    std::mt19937_64 dropout_rng(seed ^ 0x9e3779b97f4a7c15ULL);

    TrainState st;
    std::map<std::string, nn::Matrix> best = parameters();
    for (int epoch = 1; epoch <= epochs; ++epoch) {
      st.epoch = epoch;
      // one shuffled pass per trainable sub-task, interleaved batch by batch
      std::vector<std::pair<Task, std::vector<batching::TaskBatch>>> streams;
      for (Task t : tasks())
        if (model(t)->trainable() && has_instances(t, corpus::Split::Train))
          streams.emplace_back(t, batches(t, corpus::Split::Train, shuffle, seed + static_cast<std::uint64_t>(epoch) * 1000003u +
                                                                                static_cast<std::uint64_t>(t)));
      std::map<std::string, std::pair<double, long>> losses;
      double lr = base_lr;
      std::size_t longest = 0;
      for (const auto& s : streams) longest = std::max(longest, s.second.size());
      for (std::size_t i = 0; i < longest; ++i)
        for (const auto& [t, bs] : streams) {
          if (i >= bs.size()) continue;
          Model* m = model(t);
          lr = constant ? base_lr : lr_schedule(st.global_step, base_lr, warmup, decay);
          m->params().zero_grad();
          nn::Tape tape(true);
          tape.training = true;
          tape.rng = &dropout_rng;
          const nn::Var loss = m->loss(tape, bs[i]);
          const double v = loss.scalar();
          if (!std::isfinite(v))
            throw TrainingError("non-finite " + std::string(task_key(t)) + " loss " + std::to_string(v) + " at epoch " +
                                std::to_string(epoch) + ", step " + std::to_string(st.global_step) + ", batch " +
                                std::to_string(i));
          tape.backward(loss);
          opt.at(m).step(m->params(), lr);
          ++st.global_step;
          auto& acc = losses[task_key(t)];
          acc.first += v;
          acc.second += 1;
        }

      const eval::MetricMap valid = evaluator ? evaluator(*this, epoch) : flatten(evaluate(corpus::Split::Valid, valid_generate()));
      auto it = valid.find(monitor);
      if (it == valid.end()) {
        std::string have;
        for (const auto& [k, v] : valid) have += (have.empty() ? "" : ", ") + k;
        throw ConfigError("monitored metric '" + monitor + "' is missing from validation results (have: " + have + ")");
      }
      const bool had_best = st.has_best();
      const double prev_best = st.best_metric;
      StopDecision d = early_stop_update(st, it->second, mode, patience, min_delta);
      const bool improved = !had_best || st.best_metric != prev_best || st.best_epoch == epoch;
      if (st.best_epoch == epoch) best = parameters();
      if (!any_trainable) d = StopDecision::Continue;  // nothing changes between epochs

      nlohmann::json losses_j = nlohmann::json::object();
      for (const auto& [k, a] : losses) losses_j[k] = a.first / static_cast<double>(a.second);
      st.history.push_back({{"epoch", epoch},
                            {"global_step", st.global_step},
                            {"lr", lr},
                            {"train_loss", losses_j},
                            {"valid", valid},
                            {"improved", improved && st.best_epoch == epoch},
                            {"patience_counter", st.patience_counter}});
      log->info("epoch {} step {} {} {:.6f} (best {:.6f} at epoch {})", epoch, st.global_step, monitor, it->second,
                st.best_metric, st.best_epoch);
      if (d == StopDecision::Stop) {
        log->info("early stop after epoch {}", epoch);
        break;
      }
    }
    load_parameters(best);
    return st;
  }

  // Counting baselines read the training split.
  void fit_statistics() {
    models::FitData data;
    data.rec = rec_instances(corpus::Split::Train);
    for (const auto& d : bundle_->train) {
      std::vector<int> seq;
      for (const auto& u : d.utterances)
        if (u.policy) seq.push_back(u.policy->id);
      if (!seq.empty()) data.label_sequences.push_back(seq);
    }
    for (auto& m : owned_)
      if (!m->trainable()) m->fit_statistics(data);
  }

  // ---- evaluation ----

  bool valid_generate() const { return cfg_.get<bool>("eval.valid_generate"); }

  bool has_instances(Task t, corpus::Split s) const {
    switch (t) {
      case Task::Rec: return !rec_instances(s).empty();
      case Task::Conv: return !conv_instances(s).empty();
      default: return !policy_instances(s).empty();
    }
  }

  models::DecodeOptions decode_options(const std::string& section) const {
    models::DecodeOptions o;
    o.strategy = models::strategy_from_string(cfg_.get<std::string>(section + ".decode"));
    o.beam_size = static_cast<int>(cfg_.get<std::int64_t>(section + ".beam_size"));
    o.max_len = inst_.max_response_len;
    if (section == "serve") o.min_len = static_cast<int>(cfg_.get<std::int64_t>("serve.min_response_len"));
    return o;
  }

  std::vector<eval::MetricReport> evaluate(corpus::Split split, bool generate) const {
    std::vector<eval::MetricReport> out;
    const std::string sname = corpus::to_string(split);
    for (Task t : tasks()) {
      if (!has_instances(t, split)) {
        util::logger()->warn("{} split has no {} instances; skipping", sname, task_key(t));
        continue;
      }
      eval::MetricReport r;
      r.task = task_key(t);
      r.split = sname;
      if (t == Task::Rec) evaluate_rec(split, r);
      if (t == Task::Policy) evaluate_policy(split, r);
      if (t == Task::Conv) evaluate_conv(split, generate, r);
      out.push_back(std::move(r));
    }
    return out;
  }

  // Response tokens for one query, decoded with the given options.
  std::vector<int> generate(const models::ConvQuery& q, const models::DecodeOptions& o) const {
    Model* m = model(Task::Conv);
    if (!m) return {};
    return models::decode(*m->decoder(q), o).tokens;
  }

  // ---- artifacts ----

  ModelArtifact artifact(std::vector<eval::MetricReport> metrics = {}) const {
    ModelArtifact a;
    a.config = cfg_.root();
    a.models = nlohmann::json::object();
    for (Task t : tasks())
      a.models[task_key(t)] = {{"name", model(t)->config().name},
                               {"prefix", model(t)->prefix()},
                               {"config", models::to_json(model(t)->config())}};
    a.params = parameters();
    a.corpus_fingerprint = bundle_->fingerprint;
    a.metrics = std::move(metrics);
    return a;
  }

  static std::unique_ptr<System> from_artifact(const ModelArtifact& a, std::shared_ptr<const corpus::DatasetBundle> bundle) {
    auto s = std::make_unique<System>(ConfigTree(a.config), std::move(bundle));
    for (Task t : s->tasks()) {
      const auto& stored = a.models.at(task_key(t));
      if (models::model_config_from_json(stored.at("config")) != s->model(t)->config())
        throw CheckpointError(std::string(task_key(t)) + " model in the artifact was built for different corpus sizes");
    }
    s->load_parameters(a.params);
    return s;
  }

  // ---- interaction ----

  TurnContext turn_context(const std::vector<PastTurn>& history, const Profile& profile, const std::string& user_text) const {
    const corpus::TextEncoder enc(*bundle_);
    TurnContext tc;
    auto& d = tc.dialog;
    d.conv_id = "interactive";
    corpus::UserProfile up;
    up.history = profile.history;
    if (!util::trim(profile.text).empty()) {
      up.sentences.push_back(profile.text);
      up.sentence_ids.push_back(enc.encode_tokens(profile.text));
    }
    d.user_profile = up;
    for (const auto& p : history) {
      d.utterances.push_back(enc.encode(corpus::Role::Seeker, p.user_text));
      corpus::Utterance u = enc.encode(corpus::Role::Recommender, p.response_raw);
      u.item_ids = p.response_items;
      for (int item : p.response_items) {
        auto it = bundle_->item2entity.find(item);
        if (it != bundle_->item2entity.end() &&
            std::find(u.entity_ids.begin(), u.entity_ids.end(), it->second) == u.entity_ids.end())
          u.entity_ids.push_back(it->second);
      }
      if (p.policy_label) u.policy = corpus::PolicyLabel{label_type(*p.policy_label), *p.policy_label};
      d.utterances.push_back(std::move(u));
    }
    d.utterances.push_back(enc.encode(corpus::Role::Seeker, user_text));
    tc.context = batching::build_context(d, d.utterances.size(), inst_.max_context_turns);
    return tc;
  }

  std::optional<PolicyChoice> run_policy(const TurnContext& tc) const {
    Model* m = model(Task::Policy);
    if (!m) return std::nullopt;
    batching::PolicyInstance pi;
    pi.conv_id = tc.dialog.conv_id;
    pi.context_token_ids = tc.context.token_ids;
    pi.profile_token_ids = tc.context.profile_token_ids;
    pi.context_labels = tc.context.labels;
    const nn::Matrix probs = m->policy_probs(single(pi));
    return policy_choice(probs.row(0));
  }

  PolicyChoice policy_choice(const Eigen::Ref<const Eigen::RowVectorXd>& probs) const {
    const auto order = models::rank_by_score(probs);
    PolicyChoice c;
    c.label = order.front();
    c.name = label_name(c.label);
    for (std::size_t k = 0; k < std::min<std::size_t>(5, order.size()); ++k) c.top.emplace_back(order[k], probs(order[k]));
    return c;
  }

  // Top-k items by score.
  std::vector<RecEntry> run_rec(const TurnContext& tc, int k) const {
    Model* m = model(Task::Rec);
    if (!m) return {};
    batching::RecInstance ri = batching::RecInstance::from_context(tc.context, 0);
    ri.conv_id = tc.dialog.conv_id;
    const nn::Matrix scores = m->rec_scores(single(ri));
    const auto order = models::rank_by_score(scores.row(0));
    std::vector<RecEntry> out;
    for (std::size_t i = 0; i < std::min<std::size_t>(static_cast<std::size_t>(k), order.size()); ++i)
      out.push_back({order[i], scores(0, order[i])});
    return out;
  }

  ConvOutput run_conv(const TurnContext& tc, const std::vector<RecEntry>& recs) const {
    ConvOutput out;
    Model* m = model(Task::Conv);
    if (!m) return out;
    models::ConvQuery q{tc.context.token_ids, tc.context.entity_ids, {}};
    if (!recs.empty()) q.response_item_ids.push_back(recs.front().item);
    const auto ids = generate(q, decode_options("serve"));
    std::vector<std::string> raw, shown;
    std::size_t next = 0;
    for (int id : ids) {
      const std::string& tok = bundle_->vocab.token(id);
      if (id < corpus::kNumSpecials) continue;
      raw.push_back(tok);
      if (tok == corpus::kItemToken && !recs.empty()) {
        const int item = recs[std::min(next, recs.size() - 1)].item;
        ++next;
        out.response_items.push_back(item);
        shown.push_back(bundle_->item_catalog.at(static_cast<std::size_t>(item)));
      } else {
        shown.push_back(tok);
      }
    }
    const char* sep = bundle_->tokenizer == corpus::TokenizerKind::Char ? "" : " ";
    out.response_raw = util::join(raw, sep);
    out.response = util::join(shown, sep);
    return out;
  }

  std::string label_name(int id) const {
    for (const auto& l : bundle_->policy_labels)
      if (l.id == id) return l.name;
    return std::to_string(id);
  }
  std::string label_type(int id) const {
    for (const auto& l : bundle_->policy_labels)
      if (l.id == id) return l.type;
    return "action";
  }

 private:
  template <typename I>
  batching::TaskBatch single(const I& inst) const {
    return batching::pad_batch(std::vector<I>{inst}, corpus::kPadId, static_cast<int>(cfg_.get<std::int64_t>("data.max_len")));
  }

  models::ModelConfig model_config(Task t, const std::string& name) const {
    const std::string role = task_key(t);
    const auto pick = [&](const char* key) -> const nlohmann::json& {
      const std::string own = "task." + role + "." + key;
      return cfg_.find(own) ? cfg_.at(own) : cfg_.at(std::string("model.") + key);
    };
    models::ModelConfig c;
    c.name = name;
    c.embedding_dim = pick("embedding_dim").get<int>();
    c.hidden_dim = pick("hidden_dim").get<int>();
    c.layers = pick("layers").get<int>();
    c.heads = pick("heads").get<int>();
    c.dropout = pick("dropout").get<double>();
    c.filters = pick("filters").get<int>();
    c.max_positions = pick("max_positions").get<int>();
    c.vocab_size = bundle_->vocab.size();
    c.catalog_size = bundle_->catalog_size();
    c.label_count = static_cast<int>(bundle_->policy_labels.size());
    c.entity_count = bundle_->entity_kg.node_count();
    c.relation_count = bundle_->entity_kg.relation_count();
    c.seed = static_cast<std::uint64_t>(cfg_.get<std::int64_t>("train.seed")) + static_cast<std::uint64_t>(t);
    return c;
  }

  models::ModelContext model_context() const {
    models::ModelContext ctx;
    const auto& kg = bundle_->entity_kg;
    if (kg.node_count() > 0) {
      std::vector<nn::Edge> edges;
      for (const auto& tr : kg.triples()) edges.push_back({tr.head, tr.relation, tr.tail});
      ctx.entity_graph = nn::RelationalGraph(kg.node_count(), kg.relation_count(), edges);
    }
    ctx.item_entity.assign(static_cast<std::size_t>(bundle_->catalog_size()), -1);
    for (const auto& [item, ent] : bundle_->item2entity)
      if (item >= 0 && item < bundle_->catalog_size()) ctx.item_entity[static_cast<std::size_t>(item)] = ent;
    ctx.use_profile_history = cfg_.get<bool>("data.use_profile_history");
    return ctx;
  }

  void build_models() {
    std::map<Task, std::string> names;
    for (Task t : {Task::Rec, Task::Conv, Task::Policy}) {
      const std::string key = std::string("task.") + task_key(t) + ".model";
      const std::string name = cfg_.get<std::string>(key, "none");
      if (name == "none") continue;
      if (!models::model_serves(name, t))
        throw ModelError("unknown " + std::string(task_key(t)) + " model '" + name +
                         "'; valid: " + models::join_names(models::model_names(t)));
      names[t] = name;
    }
    if (names.empty()) throw ConfigError("no sub-task is configured (every task.*.model is none)");
    const auto ctx = model_context();
    const bool shared_kbrd = names.count(Task::Rec) && names.count(Task::Conv) && names[Task::Rec] == "kbrd" &&
                             names[Task::Conv] == "kbrd";
    for (const auto& [t, name] : names) {
      if (shared_kbrd && t == Task::Conv) {
        roles_[t] = roles_.at(Task::Rec);
        continue;
      }
      const std::string prefix = shared_kbrd && t == Task::Rec ? "kbrd" : task_key(t);
      owned_.push_back(models::make_model(model_config(t, name), ctx, prefix));
      roles_[t] = owned_.back().get();
    }
    if (Model* conv = model(Task::Conv))
      if (conv->config().name != "hred" && conv->config().max_positions < inst_.max_response_len + 2)
        throw ConfigError("model.max_positions must be >= data.max_response_len + 2");
  }

  void evaluate_rec(corpus::Split split, eval::MetricReport& r) const {
    std::vector<int> ranks;
    for (const auto& b : batches(Task::Rec, split, false, 0)) {
      const nn::Matrix s = model(Task::Rec)->rec_scores(b);
      for (int i = 0; i < b.size(); ++i) ranks.push_back(eval::rank_from_scores(s.row(i), b.targets[static_cast<std::size_t>(i)]));
    }
    r.count = static_cast<long>(ranks.size());
    r.metrics = eval::rank_metrics_from_ranks(ranks, int_list("eval.rec_ks"));
  }

  void evaluate_policy(corpus::Split split, eval::MetricReport& r) const {
    std::vector<Eigen::VectorXd> dists;
    std::vector<int> truths;
    for (const auto& b : batches(Task::Policy, split, false, 0)) {
      const nn::Matrix p = model(Task::Policy)->policy_probs(b);
      for (int i = 0; i < b.size(); ++i) {
        dists.push_back(p.row(i).transpose());
        truths.push_back(b.targets[static_cast<std::size_t>(i)]);
      }
    }
    r.count = static_cast<long>(truths.size());
    r.metrics = eval::policy_metrics(dists, truths, int_list("eval.policy_ks"));
  }

  void evaluate_conv(corpus::Split split, bool generate_text, eval::MetricReport& r) const {
    Model* m = model(Task::Conv);
    std::vector<double> nlls;
    for (const auto& b : batches(Task::Conv, split, false, 0)) {
      const auto v = m->token_nlls(b);
      nlls.insert(nlls.end(), v.begin(), v.end());
    }
    r.count = static_cast<long>(conv_instances(split).size());
    r.metrics["ppl"] = eval::perplexity(nlls);
    if (!generate_text) return;
    const auto o = decode_options("eval");
    std::vector<eval::Tokens> hyps, refs;
    const auto words = [&](const std::vector<int>& ids) {
      eval::Tokens out;
      for (int id : ids)
        if (id >= corpus::kNumSpecials) out.push_back(bundle_->vocab.token(id));
      return out;
    };
    for (const auto& c : conv_instances(split)) {
      hyps.push_back(words(generate({c.context_token_ids, c.context_entity_ids, c.response_item_ids}, o)));
      refs.push_back(words(c.response_token_ids));
    }
    const auto guarded = [&](const std::string& name, const std::function<double()>& fn) {
      try {
        r.metrics[name] = fn();
      } catch (const EvaluationError& e) {
        util::logger()->warn("{} {}: {} not reported ({})", r.split, r.task, name, e.what());
      }
    };
    for (int n = 1; n <= 4; ++n) {
      guarded("bleu-" + std::to_string(n), [&] { return eval::bleu_n(hyps, refs, n); });
      guarded("dist-" + std::to_string(n), [&] { return eval::distinct_n(hyps, n); });
    }
    if (!bundle_->word_vectors.empty()) {
      try {
        const auto e = eval::embedding_metrics(hyps, refs, bundle_->word_vectors);
        r.metrics["embedding-average"] = e.average;
        r.metrics["embedding-extreme"] = e.extreme;
        r.metrics["embedding-greedy"] = e.greedy;
      } catch (const EvaluationError& e) {
        util::logger()->warn("{} conv: embedding metrics not reported ({})", r.split, e.what());
      }
    }
  }

  std::vector<int> int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& v : cfg_.at(key)) out.push_back(v.get<int>());
    return out;
  }

  ConfigTree cfg_;
  std::shared_ptr<const corpus::DatasetBundle> bundle_;
  batching::InstanceOptions inst_;
  std::vector<std::unique_ptr<Model>> owned_;
  std::map<Task, Model*> roles_;
  mutable std::map<corpus::Split, std::optional<std::vector<batching::RecInstance>>> rec_cache_;
  mutable std::map<corpus::Split, std::optional<std::vector<batching::ConvInstance>>> conv_cache_;
  mutable std::map<corpus::Split, std::optional<std::vector<batching::PolicyInstance>>> policy_cache_;
};

}  // namespace crskit::train
