#include "lamner/char_lm.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <json.hpp>

#include "lamner/error.hpp"

namespace lamner {

using nlohmann::json;

CharVocabulary::CharVocabulary() : chars_{0, '\n'}, lookup_(256, kUnknown) {
  lookup_['\n'] = kNewline;
}

CharVocabulary CharVocabulary::from_bytes(const std::vector<unsigned char>& observed) {
  CharVocabulary v;
  std::vector<unsigned char> sorted = observed;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (unsigned char c : sorted) {
    if (c == '\n' || c == 0) continue;
    v.lookup_[c] = v.chars_.size();
    v.chars_.push_back(c);
  }
  return v;
}

CharVocabulary CharVocabulary::build(const std::vector<std::string>& lines) {
  std::vector<bool> seen(256, false);
  for (const auto& line : lines) {
    for (char c : line) seen[static_cast<unsigned char>(c)] = true;
  }
  std::vector<unsigned char> observed;
  for (std::size_t c = 0; c < 256; ++c) {
    if (seen[c]) observed.push_back(static_cast<unsigned char>(c));
  }
  return from_bytes(observed);
}

std::vector<unsigned char> CharVocabulary::observed() const {
  return {chars_.begin() + 2, chars_.end()};
}

namespace {

struct Sequences {
  std::vector<std::size_t> fwd_in, fwd_target, bwd_in, bwd_target;
};

Sequences make_sequences(const CharVocabulary& vocab, std::string_view line) {
  Sequences s;
  const std::size_t n = line.size();
  for (std::size_t t = 0; t < n; ++t) {
    s.fwd_in.push_back(vocab.index(line[t]));
    s.fwd_target.push_back(t + 1 < n ? vocab.index(line[t + 1]) : CharVocabulary::kNewline);
    s.bwd_in.push_back(vocab.index(line[n - 1 - t]));
    s.bwd_target.push_back(t + 1 < n ? vocab.index(line[n - 2 - t]) : CharVocabulary::kNewline);
  }
  return s;
}

}  // namespace

CharLm::CharLm(CharVocabulary vocab, const CharLmConfig& config)
    : vocab_(std::move(vocab)),
      config_(config),
      embed_("charlm.embed", vocab_.size(), config.char_dim),
      forward_{nn::LstmCell("charlm.fwd.lstm", config.char_dim, config.hidden),
               nn::Linear("charlm.fwd.out", config.hidden, vocab_.size())},
      backward_{nn::LstmCell("charlm.bwd.lstm", config.char_dim, config.hidden),
                nn::Linear("charlm.bwd.out", config.hidden, vocab_.size())} {
  Rng rng(config.seed);
  embed_.table.init_uniform(config.char_dim, rng);
  forward_.cell.init(rng);
  forward_.out.init(rng);
  backward_.cell.init(rng);
  backward_.out.init(rng);
}

nn::ParamList CharLm::params() {
  nn::ParamList out = embed_.params();
  for (Direction* d : {&forward_, &backward_}) {
    for (nn::Param* p : d->cell.params()) out.push_back(p);
    for (nn::Param* p : d->out.params()) out.push_back(p);
  }
  return out;
}

Matrix CharLm::direction_states(const Direction& dir, const std::vector<std::size_t>& inputs) const {
  const std::size_t h = config_.hidden;
  Matrix states(inputs.size(), h);
  Vec hs(h, 0.0), cs(h, 0.0);
  nn::LstmCell::Cache cache;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    dir.cell.step(embed_.lookup(inputs[t]), hs, cs, cache);
    hs = cache.h;
    cs = cache.c;
    std::copy(hs.begin(), hs.end(), states.row(t).begin());
  }
  return states;
}

double CharLm::direction_loss(const Direction& dir, const std::vector<std::size_t>& inputs,
                              const std::vector<std::size_t>& targets) const {
  Matrix states = direction_states(dir, inputs);
  double total = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Vec logits = dir.out.forward(states.row(t));
    total += nn::log_sum_exp(logits) - logits[targets[t]];
  }
  return total;
}

double CharLm::direction_pass(Direction& dir, const std::vector<std::size_t>& inputs,
                              const std::vector<std::size_t>& targets, Rng* dropout_rng,
                              double scale) {
  const std::size_t h = config_.hidden;
  const std::size_t window = std::max<std::size_t>(config_.bptt, 1);
  Vec hs(h, 0.0), cs(h, 0.0);
  double total = 0.0;
  std::vector<nn::LstmCell::Cache> caches;
  std::vector<Vec> masks;
  std::vector<Vec> dlogits;
  for (std::size_t begin = 0; begin < inputs.size(); begin += window) {
    const std::size_t end = std::min(inputs.size(), begin + window);
    const std::size_t len = end - begin;
    caches.assign(len, {});
    masks.assign(len, {});
    dlogits.assign(len, {});
    for (std::size_t k = 0; k < len; ++k) {
      dir.cell.step(embed_.lookup(inputs[begin + k]), hs, cs, caches[k]);
      hs = caches[k].h;
      cs = caches[k].c;
      Vec dropped = hs;
      if (dropout_rng) {
        masks[k] = nn::dropout_mask(h, config_.dropout, *dropout_rng);
        nn::apply_mask(dropped, masks[k]);
      }
      Vec logits = dir.out.forward(dropped);
      auto xent = nn::softmax_xent(logits, targets[begin + k]);
      total += xent.loss;
      for (double& g : xent.grad) g *= scale;
      dlogits[k] = std::move(xent.grad);
    }
    // Truncated backpropagation inside the window.
    Vec dh_next(h, 0.0), dc_next(h, 0.0);
    for (std::size_t k = len; k-- > 0;) {
      Vec dropped = caches[k].h;
      if (!masks[k].empty()) nn::apply_mask(dropped, masks[k]);
      Vec dh(h, 0.0);
      dir.out.backward(dropped, dlogits[k], dh);
      if (!masks[k].empty()) nn::apply_mask(dh, masks[k]);
      for (std::size_t j = 0; j < h; ++j) dh[j] += dh_next[j];
      Vec dx(config_.char_dim, 0.0);
      Vec dh_prev(h, 0.0), dc_prev(h, 0.0);
      dir.cell.backward(caches[k], dh, dc_next, dx, dh_prev, dc_prev);
      embed_.backward(inputs[begin + k], dx);
      dh_next = std::move(dh_prev);
      dc_next = std::move(dc_prev);
    }
  }
  return total;
}

std::pair<double, std::size_t> CharLm::accumulate_gradients(const std::vector<const std::string*>& lines,
                                                            Rng* dropout_rng, double scale) {
  double total = 0.0;
  std::size_t chars = 0;
  for (const std::string* line : lines) {
    if (line->empty()) continue;
    const Sequences s = make_sequences(vocab_, *line);
    total += direction_pass(forward_, s.fwd_in, s.fwd_target, dropout_rng, scale);
    total += direction_pass(backward_, s.bwd_in, s.bwd_target, dropout_rng, scale);
    chars += line->size();
  }
  return {total, chars};
}

double CharLm::loss(const std::vector<std::string>& lines) const {
  double total = 0.0;
  std::size_t chars = 0;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    const Sequences s = make_sequences(vocab_, line);
    total += direction_loss(forward_, s.fwd_in, s.fwd_target);
    total += direction_loss(backward_, s.bwd_in, s.bwd_target);
    chars += line.size();
  }
  return chars ? total / (2.0 * static_cast<double>(chars)) : 0.0;
}

LineStates CharLm::run(std::string_view line) const {
  const Sequences s = make_sequences(vocab_, line);
  LineStates out;
  out.forward = direction_states(forward_, s.fwd_in);
  Matrix reversed = direction_states(backward_, s.bwd_in);
  out.backward = Matrix(line.size(), config_.hidden);
  for (std::size_t t = 0; t < line.size(); ++t) {
    auto src = reversed.row(line.size() - 1 - t);
    std::copy(src.begin(), src.end(), out.backward.row(t).begin());
  }
  return out;
}

Vec CharLm::next_char_probs(std::string_view prefix) const {
  if (prefix.empty()) throw Error("next_char_probs: empty prefix");
  std::vector<std::size_t> inputs;
  for (char c : prefix) inputs.push_back(vocab_.index(c));
  Matrix states = direction_states(forward_, inputs);
  return nn::softmax(forward_.out.forward(states.row(inputs.size() - 1)));
}

std::string CharLm::generate(std::string_view prefix, std::size_t max_len) const {
  if (prefix.empty()) throw Error("generate: empty prefix");
  const std::size_t h = config_.hidden;
  Vec hs(h, 0.0), cs(h, 0.0);
  nn::LstmCell::Cache cache;
  std::string out(prefix);
  std::size_t next = 0;
  auto feed = [&](char c) {
    forward_.cell.step(embed_.lookup(vocab_.index(c)), hs, cs, cache);
    hs = cache.h;
    cs = cache.c;
    Vec logits = forward_.out.forward(hs);
    next = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  };
  for (char c : prefix) feed(c);
  while (out.size() < max_len) {
    if (next == CharVocabulary::kNewline || next == CharVocabulary::kUnknown) break;
    const char c = vocab_.character(next);
    out.push_back(c);
    feed(c);
  }
  return out;
}

Vec CharLm::token_embedding(const LineStates& states, std::size_t start, std::size_t end) const {
  if (end <= start) throw Error("token_embedding: empty span");
  if (end > states.forward.rows()) throw Error("token_embedding: span exceeds text");
  std::size_t back = start;
  if (config_.anchor == BackwardAnchor::kBeforeFirstChar && start > 0) back = start - 1;
  return concat(states.forward.row(end - 1), states.backward.row(back));
}

Vec CharLm::token_embedding(std::string_view text, std::size_t start, std::size_t end) const {
  if (end <= start) throw Error("token_embedding: empty span");
  if (end > text.size()) throw Error("token_embedding: span exceeds text");
  return token_embedding(run(text), start, end);
}

Checkpoint CharLm::to_checkpoint() const {
  json meta = {
      {"char_dim", config_.char_dim},
      {"hidden", config_.hidden},
      {"dropout", config_.dropout},
      {"bptt", config_.bptt},
      {"anchor", config_.anchor == BackwardAnchor::kAtFirstChar ? "at-first-char" : "before-first-char"},
      {"chars", vocab_.observed()},
  };
  auto* self = const_cast<CharLm*>(this);
  return Checkpoint::capture(ModelKind::kCharLm, meta.dump(), self->params());
}

CharLm CharLm::from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != ModelKind::kCharLm) throw Error("checkpoint does not hold a character language model");
  const json meta = json::parse(ck.metadata);
  CharLmConfig config;
  config.char_dim = meta.at("char_dim").get<std::size_t>();
  config.hidden = meta.at("hidden").get<std::size_t>();
  config.dropout = meta.at("dropout").get<double>();
  config.bptt = meta.at("bptt").get<std::size_t>();
  config.anchor = meta.at("anchor").get<std::string>() == "before-first-char" ? BackwardAnchor::kBeforeFirstChar
                                                                               : BackwardAnchor::kAtFirstChar;
  CharLm model(CharVocabulary::from_bytes(meta.at("chars").get<std::vector<unsigned char>>()), config);
  ck.restore(model.params());
  return model;
}

CharLm train_char_lm(const std::vector<std::string>& lines, const CharLmConfig& config,
                     TrainHistory* history, const std::vector<std::string>* valid_lines) {
  std::vector<const std::string*> usable;
  for (const auto& l : lines) {
    if (!l.empty()) usable.push_back(&l);
  }
  if (usable.empty()) throw Error("train_char_lm: empty corpus");

  CharLm model(CharVocabulary::build(lines), config);
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

  while (!state.halted && config.epochs > 0) {
    order_rng.shuffle(usable);
    double epoch_total = 0.0;
    std::size_t epoch_chars = 0;
    for (std::size_t b = 0; b < usable.size(); b += batch) {
      std::vector<const std::string*> chunk(usable.begin() + b,
                                            usable.begin() + std::min(usable.size(), b + batch));
      std::size_t chars = 0;
      for (const auto* l : chunk) chars += l->size();
      nn::zero_grads(params);
      auto [total, n] = model.accumulate_gradients(chunk, &dropout_rng, 1.0 / (2.0 * chars));
      nn::sgd_step(params, {state.learning_rate, config.clip_norm});
      epoch_total += total;
      epoch_chars += n;
    }
    const double epoch_loss = epoch_total / (2.0 * static_cast<double>(epoch_chars));
    const double valid = valid_lines ? model.loss(*valid_lines) : epoch_loss;
    if (history) {
      history->epoch_losses.push_back(epoch_loss);
      history->valid_losses.push_back(valid);
    }
    state = nn::plateau_decay(state, valid);
    if (config.verbose) {
      std::clog << "char-lm epoch " << state.epoch << " loss " << epoch_loss << " valid " << valid
                << " lr " << state.learning_rate << "\n";
    }
  }
  if (history) history->final_state = state;
  return model;
}

EmbeddingTable build_semantic_table(const CharLm& model,
                                    const std::vector<std::vector<std::string>>& corpus,
                                    const Vocabulary& vocab, std::uint64_t seed,
                                    std::size_t occurrence_cap,
                                    std::vector<std::string>* fallback_tokens) {
  MeanTableBuilder builder(vocab, model.embedding_dim(), occurrence_cap);
  for (const auto& tokens : corpus) {
    if (tokens.empty()) continue;
    if (std::none_of(tokens.begin(), tokens.end(), [&](const std::string& t) { return builder.wants(t); })) {
      continue;
    }
    const std::string line = code_line(tokens);
    const LineStates states = model.run(line);
    const auto spans = code_line_spans(tokens);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].empty() || !builder.wants(tokens[i])) continue;
      builder.add(tokens[i], model.token_embedding(states, spans[i].first, spans[i].second));
    }
  }
  return builder.finish(seed, fallback_tokens);
}

}  // namespace lamner
