#include "lamner/ner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "lamner/error.hpp"

namespace lamner {

using nlohmann::json;

std::vector<LabeledSequence> parse_conll(const std::string& text) {
  std::vector<LabeledSequence> out;
  LabeledSequence current;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) out.push_back(std::move(current));
    current = {};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw DatasetError("expected 'token<TAB>label'", line_no);
    }
    const std::string name = line.substr(tab + 1);
    auto label = parse_label(name);
    if (!label) throw DatasetError("unknown entity label '" + name + "'", line_no);
    current.tokens.push_back(line.substr(0, tab));
    current.labels.push_back(*label);
  }
  flush();
  return out;
}

std::vector<LabeledSequence> read_conll(const std::filesystem::path& path) {
  return parse_conll(read_file(path));
}

std::string to_conll(const std::vector<LabeledSequence>& sequences) {
  std::string out;
  for (const auto& s : sequences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i];
      out += '\t';
      out += label_name(s.labels[i]);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

LabeledSequence labeled_sequence(const TokenizedMethod& method) {
  LabeledSequence s;
  for (auto& [text, label] : sequence_labels(method)) {
    s.tokens.push_back(std::move(text));
    s.labels.push_back(label);
  }
  return s;
}

struct NerModel::Pass {
  std::vector<std::size_t> ids;
  std::vector<Vec> projected;
  std::vector<nn::LstmCell::Cache> fwd, bwd;  // bwd[t] is the cache at position t
  std::vector<Vec> outputs;                    // concatenated, after dropout
  std::vector<Vec> masks;
  Matrix emissions;
};

namespace {

std::vector<std::string> non_special(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  const auto& specials = Vocabulary::special_tokens();
  for (const auto& t : tokens) {
    if (std::find(specials.begin(), specials.end(), t) == specials.end()) out.push_back(t);
  }
  return out;
}

std::vector<std::size_t> label_indices(const std::vector<EntityLabel>& labels) {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (EntityLabel l : labels) out.push_back(static_cast<std::size_t>(l));
  return out;
}

}  // namespace

NerModel::NerModel(Vocabulary vocab, const NerConfig& config)
    : vocab_(std::move(vocab)),
      config_(config),
      embed_(),
      proj_(),
      forward_("ner.fwd.lstm", config.proj, config.hidden),
      backward_("ner.bwd.lstm", config.proj, config.hidden),
      emit_("ner.emit", 2 * config.hidden, kEntityLabelCount),
      crf_(kEntityLabelCount, "ner.crf.transitions") {}

NerModel::NerModel(const EmbeddingTable& semantic, const NerConfig& config)
    : NerModel(Vocabulary(non_special(semantic.tokens())), config) {
  if (semantic.size() == 0) throw Error("ner: empty semantic table");
  embed_ = nn::Embedding("ner.embed", vocab_.size(), semantic.dim());
  proj_ = nn::Linear("ner.proj", semantic.dim(), config.proj);
  Rng rng(config.seed);
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    auto dst = embed_.table.value.row(i);
    if (auto r = semantic.find(vocab_.token(i))) {
      auto src = semantic.row(*r);
      std::copy(src.begin(), src.end(), dst.begin());
    } else {
      for (double& v : dst) v = rng.uniform(-0.05, 0.05);
    }
  }
  embed_.table.frozen = !config.fine_tune_embeddings;
  proj_.init(rng);
  forward_.init(rng);
  backward_.init(rng);
  emit_.init(rng);
}

nn::ParamList NerModel::params() {
  nn::ParamList out = embed_.params();
  for (nn::Param* p : proj_.params()) out.push_back(p);
  for (nn::Param* p : forward_.params()) out.push_back(p);
  for (nn::Param* p : backward_.params()) out.push_back(p);
  for (nn::Param* p : emit_.params()) out.push_back(p);
  out.push_back(&crf_.transitions);
  return out;
}

void NerModel::run(const std::vector<std::size_t>& ids, Rng* dropout_rng, Pass& pass) const {
  const std::size_t n = ids.size(), h = config_.hidden;
  if (n == 0) throw Error("ner: empty token sequence");
  pass.ids = ids;
  pass.projected.resize(n);
  for (std::size_t t = 0; t < n; ++t) pass.projected[t] = proj_.forward(embed_.lookup(ids[t]));
  pass.fwd.assign(n, {});
  pass.bwd.assign(n, {});
  Vec hs(h, 0.0), cs(h, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    forward_.step(pass.projected[t], hs, cs, pass.fwd[t]);
    hs = pass.fwd[t].h;
    cs = pass.fwd[t].c;
  }
  std::fill(hs.begin(), hs.end(), 0.0);
  std::fill(cs.begin(), cs.end(), 0.0);
  for (std::size_t t = n; t-- > 0;) {
    backward_.step(pass.projected[t], hs, cs, pass.bwd[t]);
    hs = pass.bwd[t].h;
    cs = pass.bwd[t].c;
  }
  pass.outputs.resize(n);
  pass.masks.assign(n, {});
  pass.emissions = Matrix(n, kEntityLabelCount);
  for (std::size_t t = 0; t < n; ++t) {
    pass.outputs[t] = concat(pass.fwd[t].h, pass.bwd[t].h);
    if (dropout_rng) {
      pass.masks[t] = nn::dropout_mask(2 * h, config_.dropout, *dropout_rng);
      nn::apply_mask(pass.outputs[t], pass.masks[t]);
    }
    Vec e = emit_.forward(pass.outputs[t]);
    std::copy(e.begin(), e.end(), pass.emissions.row(t).begin());
  }
}

Matrix NerModel::emissions(const std::vector<std::string>& tokens) const {
  Pass pass;
  run(vocab_.encode(tokens), nullptr, pass);
  return pass.emissions;
}

Matrix NerModel::contextual_states(const std::vector<std::string>& tokens) const {
  Pass pass;
  run(vocab_.encode(tokens), nullptr, pass);
  Matrix out(tokens.size(), 2 * config_.hidden);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    std::copy(pass.outputs[t].begin(), pass.outputs[t].end(), out.row(t).begin());
  }
  return out;
}

std::vector<EntityLabel> NerModel::predict(const std::vector<std::string>& tokens) const {
  const auto path = crf_.viterbi(emissions(tokens));
  std::vector<EntityLabel> out;
  out.reserve(path.size());
  for (std::size_t i : path) out.push_back(all_labels()[i]);
  return out;
}

double NerModel::loss(const LabeledSequence& sequence) const {
  if (sequence.tokens.size() != sequence.labels.size()) throw DimensionError("ner: token/label length mismatch");
  const Matrix e = emissions(sequence.tokens);
  const auto gold = label_indices(sequence.labels);
  return crf_.log_partition(e) - crf_.path_score(e, gold);
}

double NerModel::accumulate_gradients(const LabeledSequence& sequence, Rng* dropout_rng, double scale) {
  if (sequence.tokens.size() != sequence.labels.size()) throw DimensionError("ner: token/label length mismatch");
  Pass pass;
  run(vocab_.encode(sequence.tokens), dropout_rng, pass);
  const auto gold = label_indices(sequence.labels);
  Matrix d_emissions;
  const double nll = crf_.neg_log_likelihood(pass.emissions, gold, &d_emissions, scale);

  const std::size_t n = pass.ids.size(), h = config_.hidden;
  std::vector<Vec> d_fwd(n, Vec(h, 0.0)), d_bwd(n, Vec(h, 0.0));
  for (std::size_t t = 0; t < n; ++t) {
    Vec d_out(2 * h, 0.0);
    emit_.backward(pass.outputs[t], d_emissions.row(t), d_out);
    if (!pass.masks[t].empty()) nn::apply_mask(d_out, pass.masks[t]);
    std::copy(d_out.begin(), d_out.begin() + h, d_fwd[t].begin());
    std::copy(d_out.begin() + h, d_out.end(), d_bwd[t].begin());
  }
  std::vector<Vec> d_proj(n, Vec(config_.proj, 0.0));
  Vec dh_next(h, 0.0), dc_next(h, 0.0), dh_prev(h), dc_prev(h);
  for (std::size_t t = n; t-- > 0;) {
    for (std::size_t j = 0; j < h; ++j) d_fwd[t][j] += dh_next[j];
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    forward_.backward(pass.fwd[t], d_fwd[t], dc_next, d_proj[t], dh_prev, dc_prev);
    dh_next.swap(dh_prev);
    dc_next.swap(dc_prev);
  }
  std::fill(dh_next.begin(), dh_next.end(), 0.0);
  std::fill(dc_next.begin(), dc_next.end(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < h; ++j) d_bwd[t][j] += dh_next[j];
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    backward_.backward(pass.bwd[t], d_bwd[t], dc_next, d_proj[t], dh_prev, dc_prev);
    dh_next.swap(dh_prev);
    dc_next.swap(dc_prev);
  }
  Vec d_embed(embed_.dim());
  for (std::size_t t = 0; t < n; ++t) {
    std::fill(d_embed.begin(), d_embed.end(), 0.0);
    proj_.backward(embed_.lookup(pass.ids[t]), d_proj[t], d_embed);
    embed_.backward(pass.ids[t], d_embed);
  }
  return nll;
}

Checkpoint NerModel::to_checkpoint() const {
  json meta = {
      {"proj", config_.proj},
      {"hidden", config_.hidden},
      {"dropout", config_.dropout},
      {"embedding_dim", embed_.dim()},
      {"fine_tune_embeddings", config_.fine_tune_embeddings},
      {"tokens", non_special(vocab_.tokens())},
  };
  auto* self = const_cast<NerModel*>(this);
  return Checkpoint::capture(ModelKind::kNer, meta.dump(), self->params());
}

NerModel NerModel::from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != ModelKind::kNer) throw Error("checkpoint does not hold an NER model");
  const json meta = json::parse(ck.metadata);
  NerConfig config;
  config.proj = meta.at("proj").get<std::size_t>();
  config.hidden = meta.at("hidden").get<std::size_t>();
  config.dropout = meta.at("dropout").get<double>();
  config.fine_tune_embeddings = meta.at("fine_tune_embeddings").get<bool>();
  const auto dim = meta.at("embedding_dim").get<std::size_t>();
  NerModel model(Vocabulary(meta.at("tokens").get<std::vector<std::string>>()), config);
  model.embed_ = nn::Embedding("ner.embed", model.vocab_.size(), dim);
  model.embed_.table.frozen = !config.fine_tune_embeddings;
  model.proj_ = nn::Linear("ner.proj", dim, config.proj);
  ck.restore(model.params());
  return model;
}

NerModel train_ner(const std::vector<LabeledSequence>& train, const EmbeddingTable& semantic,
                   const NerConfig& config, TrainHistory* history,
                   const std::vector<LabeledSequence>* valid) {
  std::vector<const LabeledSequence*> usable;
  for (const auto& s : train) {
    if (s.tokens.size() != s.labels.size()) throw DimensionError("ner: token/label length mismatch");
    for (EntityLabel l : s.labels) {
      if (static_cast<std::size_t>(l) >= kEntityLabelCount) throw Error("ner: label outside the enumeration");
    }
    if (!s.tokens.empty()) usable.push_back(&s);
  }
  if (usable.empty()) throw Error("train_ner: empty corpus");

  NerModel model(semantic, config);
  nn::ParamList params = model.params();
  nn::OptimizerState state;
  state.learning_rate = config.learning_rate;
  state.decay_factor = config.decay_factor;
  state.patience = config.patience;
  state.floor = config.lr_floor;
  state.max_epochs = static_cast<int>(config.epochs);
  Rng order_rng(config.seed + 1);
  Rng dropout_rng(config.seed + 2);
  const std::size_t batch = std::max<std::size_t>(config.batch_size, 1);

  auto mean_loss = [&](const std::vector<LabeledSequence>& set) {
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& s : set) {
      if (s.tokens.empty()) continue;
      total += model.loss(s);
      tokens += s.tokens.size();
    }
    return tokens ? total / static_cast<double>(tokens) : 0.0;
  };

  while (!state.halted && config.epochs > 0) {
    order_rng.shuffle(usable);
    double epoch_total = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t b = 0; b < usable.size(); b += batch) {
      const std::size_t end = std::min(usable.size(), b + batch);
      nn::zero_grads(params);
      const double scale = 1.0 / static_cast<double>(end - b);
      for (std::size_t i = b; i < end; ++i) {
        epoch_total += model.accumulate_gradients(*usable[i], &dropout_rng, scale);
        epoch_tokens += usable[i]->tokens.size();
      }
      nn::sgd_step(params, {state.learning_rate, config.clip_norm});
    }
    const double epoch_loss = epoch_total / static_cast<double>(epoch_tokens);
    const double valid_loss = valid ? mean_loss(*valid) : epoch_loss;
    if (history) {
      history->epoch_losses.push_back(epoch_loss);
      history->valid_losses.push_back(valid_loss);
    }
    state = nn::plateau_decay(state, valid_loss);
    if (config.verbose) {
      std::clog << "ner epoch " << state.epoch << " loss/token " << epoch_loss << " valid " << valid_loss
                << " lr " << state.learning_rate << "\n";
    }
  }
  if (history) history->final_state = state;
  return model;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

NerEvaluation score_labels(const std::vector<std::vector<EntityLabel>>& gold,
                           const std::vector<std::vector<EntityLabel>>& predicted) {
  if (gold.size() != predicted.size()) throw DimensionError("score_labels: sequence count mismatch");
  NerEvaluation ev;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != predicted[s].size()) throw DimensionError("score_labels: sequence length mismatch");
    for (std::size_t t = 0; t < gold[s].size(); ++t) {
      auto& g = ev.per_label[static_cast<std::size_t>(gold[s][t])];
      auto& p = ev.per_label[static_cast<std::size_t>(predicted[s][t])];
      ++g.support;
      ++p.predicted;
      if (gold[s][t] == predicted[s][t]) {
        ++g.correct;
        ++correct;
      }
      ++ev.tokens;
    }
  }
  for (auto& l : ev.per_label) {
    l.precision = ratio(l.correct, l.predicted);
    l.recall = ratio(l.correct, l.support);
    l.f1 = harmonic(l.precision, l.recall);
  }
  // Every token carries exactly one gold and one predicted label, so the
  // micro-averaged precision and recall coincide.
  ev.micro_precision = ratio(correct, ev.tokens);
  ev.micro_recall = ratio(correct, ev.tokens);
  ev.micro_f1 = harmonic(ev.micro_precision, ev.micro_recall);
  return ev;
}

NerEvaluation evaluate_ner(const NerModel& model, const std::vector<LabeledSequence>& gold) {
  std::vector<std::vector<EntityLabel>> g, p;
  for (const auto& s : gold) {
    if (s.tokens.empty()) continue;
    g.push_back(s.labels);
    p.push_back(model.predict(s.tokens));
  }
  return score_labels(g, p);
}

std::string NerEvaluation::to_json() const {
  json labels = json::object();
  for (std::size_t i = 0; i < kEntityLabelCount; ++i) {
    const auto& l = per_label[i];
    labels[std::string(label_name(all_labels()[i]))] = {
        {"precision", l.precision}, {"recall", l.recall}, {"f1", l.f1}, {"support", l.support}};
  }
  json out = {{"micro_precision", micro_precision},
              {"micro_recall", micro_recall},
              {"micro_f1", micro_f1},
              {"tokens", tokens},
              {"labels", labels}};
  return out.dump(2) + "\n";
}

std::string NerEvaluation::to_table() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-22s %9s %9s %9s %9s\n", "label", "precision", "recall", "f1", "support");
  out += buf;
  for (std::size_t i = 0; i < kEntityLabelCount; ++i) {
    const auto& l = per_label[i];
    if (l.support == 0 && l.predicted == 0) continue;
    std::snprintf(buf, sizeof(buf), "%-22s %9.4f %9.4f %9.4f %9zu\n",
                  std::string(label_name(all_labels()[i])).c_str(), l.precision, l.recall, l.f1, l.support);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-22s %9.4f %9.4f %9.4f %9zu\n", "micro", micro_precision, micro_recall,
                micro_f1, tokens);
  out += buf;
  return out;
}

EmbeddingTable build_syntactic_table(const NerModel& model,
                                     const std::vector<std::vector<std::string>>& corpus,
                                     const Vocabulary& vocab, std::uint64_t seed,
                                     std::size_t occurrence_cap,
                                     std::vector<std::string>* fallback_tokens) {
  MeanTableBuilder builder(vocab, model.output_dim(), occurrence_cap);
  for (const auto& tokens : corpus) {
    if (tokens.empty()) continue;
    if (std::none_of(tokens.begin(), tokens.end(), [&](const std::string& t) { return builder.wants(t); })) {
      continue;
    }
    const Matrix states = model.contextual_states(tokens);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (builder.wants(tokens[i])) builder.add(tokens[i], states.row(i));
    }
  }
  return builder.finish(seed, fallback_tokens);
}

}  // namespace lamner
