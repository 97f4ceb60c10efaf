#include "lamner/summarizer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include <json.hpp>

#include "lamner/error.hpp"

namespace lamner {

using nlohmann::json;

std::string_view mode_name(SummarizerMode mode) {
  switch (mode) {
    case SummarizerMode::kLamner: return "lamner";
    case SummarizerMode::kLam: return "lam";
    case SummarizerMode::kNer: return "ner";
    case SummarizerMode::kStatic: return "static";
  }
  return "lamner";
}

SummarizerMode parse_mode(std::string_view name) {
  if (name == "lamner") return SummarizerMode::kLamner;
  if (name == "lam") return SummarizerMode::kLam;
  if (name == "ner") return SummarizerMode::kNer;
  if (name == "static") return SummarizerMode::kStatic;
  throw Error("unknown summarizer mode '" + std::string(name) + "' (expected lamner, lam, ner or static)");
}

EmbeddingTable code_table_for_mode(SummarizerMode mode, const EmbeddingTable* semantic,
                                   const EmbeddingTable* syntactic) {
  const std::string name(mode_name(mode));
  const bool need_semantic = mode != SummarizerMode::kNer;
  const bool need_syntactic = mode != SummarizerMode::kLam;
  if (need_semantic && !semantic) throw Error("mode " + name + " requires a semantic table");
  if (need_syntactic && !syntactic) throw Error("mode " + name + " requires a syntactic table");
  switch (mode) {
    case SummarizerMode::kLam: return *semantic;
    case SummarizerMode::kNer: return *syntactic;
    default: return concat_tables(*semantic, *syntactic);
  }
}

SummarizerModel::SummarizerModel(Vocabulary code_vocab, Vocabulary comment_vocab, std::size_t code_dim,
                                 const SummarizerConfig& config)
    : code_vocab_(std::move(code_vocab)),
      comment_vocab_(std::move(comment_vocab)),
      config_(config),
      code_embed_("summ.code_embed", code_vocab_.size(), code_dim),
      enc_forward_("summ.enc.fwd", code_dim, config.enc_hidden),
      enc_backward_("summ.enc.bwd", code_dim, config.enc_hidden),
      bridge_("summ.bridge", 2 * config.enc_hidden, config.dec_hidden),
      attn_query_("summ.attn.query", config.dec_hidden, config.attention_dim),
      attn_key_("summ.attn.key", config.attention_dim, 2 * config.enc_hidden),
      attn_v_("summ.attn.v", 1, config.attention_dim),
      comment_embed_("summ.comment_embed", comment_vocab_.size(), config.comment_dim),
      decoder_("summ.dec", config.comment_dim + 2 * config.enc_hidden, config.dec_hidden),
      readout_("summ.readout", config.dec_hidden + 2 * config.enc_hidden + config.comment_dim,
               comment_vocab_.size()) {
  code_embed_.table.frozen = config.mode == SummarizerMode::kStatic;
}

SummarizerModel::SummarizerModel(Vocabulary code_vocab, Vocabulary comment_vocab,
                                 const EmbeddingTable& code_table, const SummarizerConfig& config)
    : SummarizerModel(std::move(code_vocab), std::move(comment_vocab), code_table.dim(), config) {
  if (config.code_dim != 0 && config.code_dim != code_table.dim()) {
    throw DimensionError("mode " + std::string(mode_name(config.mode)) + " expects a " +
                         std::to_string(config.code_dim) + "-wide code table, got " +
                         std::to_string(code_table.dim()));
  }
  if (code_table.dim() == 0) throw DimensionError("code table has zero width");
  Rng rng(config.seed);
  for (std::size_t i = 0; i < code_vocab_.size(); ++i) {
    auto dst = code_embed_.table.value.row(i);
    if (auto r = code_table.find(code_vocab_.token(i))) {
      auto src = code_table.row(*r);
      std::copy(src.begin(), src.end(), dst.begin());
    } else {
      for (double& v : dst) v = rng.uniform(-0.05, 0.05);
    }
  }
  enc_forward_.init(rng);
  enc_backward_.init(rng);
  bridge_.init(rng);
  attn_query_.init(rng);
  attn_key_.init_uniform(attn_key_.value.cols(), rng);
  attn_v_.init_uniform(attn_v_.value.cols(), rng);
  comment_embed_.table.init_uniform(config.comment_dim, rng);
  decoder_.init(rng);
  readout_.init(rng);
}

nn::ParamList SummarizerModel::params() {
  nn::ParamList out = code_embed_.params();
  auto append = [&](const nn::ParamList& list) { out.insert(out.end(), list.begin(), list.end()); };
  append(enc_forward_.params());
  append(enc_backward_.params());
  append(bridge_.params());
  append(attn_query_.params());
  out.push_back(&attn_key_);
  out.push_back(&attn_v_);
  append(comment_embed_.params());
  append(decoder_.params());
  append(readout_.params());
  return out;
}

nn::Param& SummarizerModel::param(const std::string& name) {
  for (nn::Param* p : params()) {
    if (p->name == name) return *p;
  }
  throw Error("summarizer has no parameter '" + name + "'");
}

namespace {

struct EncoderPass {
  std::vector<nn::GruCell::Cache> fwd, bwd;  // bwd[t] is the cache at position t
  Matrix states;
  Vec h_last, pre_bridge, h_final;
};

void run_encoder(const nn::Embedding& embed, const nn::GruCell& fwd, const nn::GruCell& bwd,
                 const nn::Linear& bridge, const std::vector<std::size_t>& ids, EncoderPass& pass) {
  const std::size_t n = ids.size(), h = fwd.hidden_size();
  if (n == 0) throw Error("encode: empty code sequence");
  pass.fwd.assign(n, {});
  pass.bwd.assign(n, {});
  pass.states = Matrix(n, 2 * h);
  Vec hs(h, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    fwd.step(embed.lookup(ids[t]), hs, pass.fwd[t]);
    hs = pass.fwd[t].h;
    std::copy(hs.begin(), hs.end(), pass.states.row(t).begin());
  }
  std::fill(hs.begin(), hs.end(), 0.0);
  for (std::size_t t = n; t-- > 0;) {
    bwd.step(embed.lookup(ids[t]), hs, pass.bwd[t]);
    hs = pass.bwd[t].h;
    std::copy(hs.begin(), hs.end(), pass.states.row(t).begin() + h);
  }
  pass.h_last = concat(pass.fwd[n - 1].h, pass.bwd[0].h);
  pass.pre_bridge = bridge.forward(pass.h_last);
  pass.h_final.resize(pass.pre_bridge.size());
  for (std::size_t i = 0; i < pass.pre_bridge.size(); ++i) pass.h_final[i] = std::tanh(pass.pre_bridge[i]);
}

// Alignment intermediate values for one decoding step.
struct AttentionPass {
  Vec query;
  Matrix hidden;  // n x attention_dim, tanh(query + key_j)
  Vec weights;
  Vec context;
};

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Matrix SummarizerModel::attention_keys(const Matrix& encoder_states) const {
  Matrix keys(encoder_states.rows(), config_.attention_dim);
  for (std::size_t j = 0; j < encoder_states.rows(); ++j) {
    matvec_acc(attn_key_.value, encoder_states.row(j), keys.row(j));
  }
  return keys;
}

namespace {

void run_attention(const nn::Linear& query_layer, const Matrix& v, const Matrix& keys,
                   std::span<const double> state, const Matrix& states, AttentionPass& pass) {
  const std::size_t n = states.rows(), a = keys.cols();
  if (n == 0) throw Error("attend: no encoder states");
  pass.query = query_layer.forward(state);
  pass.hidden = Matrix(n, a);
  Vec scores(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto row = pass.hidden.row(j);
    auto key = keys.row(j);
    for (std::size_t k = 0; k < a; ++k) row[k] = std::tanh(pass.query[k] + key[k]);
    scores[j] = dot(v.data(), row);
  }
  pass.weights = nn::softmax(scores);
  pass.context.assign(states.cols(), 0.0);
  for (std::size_t j = 0; j < n; ++j) axpy(pass.weights[j], states.row(j), pass.context);
}

}  // namespace

EncoderOutput SummarizerModel::encode(const std::vector<std::size_t>& code_ids) const {
  EncoderPass pass;
  run_encoder(code_embed_, enc_forward_, enc_backward_, bridge_, code_ids, pass);
  return {std::move(pass.states), std::move(pass.h_last), std::move(pass.h_final)};
}

Attention SummarizerModel::attend(std::span<const double> state, const Matrix& encoder_states) const {
  AttentionPass pass;
  run_attention(attn_query_, attn_v_.value, attention_keys(encoder_states), state, encoder_states, pass);
  return {std::move(pass.context), std::move(pass.weights)};
}

DecodeStep SummarizerModel::decode_step(std::size_t prev_token, std::span<const double> state,
                                        const Matrix& encoder_states) const {
  if (prev_token >= comment_vocab_.size()) throw Error("decode_step: token index out of range");
  Attention att = attend(state, encoder_states);
  auto emb = comment_embed_.lookup(prev_token);
  nn::GruCell::Cache cache;
  decoder_.step(concat(emb, att.context), state, cache);
  Vec readout = concat(cache.h, att.context);
  readout.insert(readout.end(), emb.begin(), emb.end());
  return {readout_.forward(readout), std::move(cache.h), std::move(att.weights)};
}

Generation SummarizerModel::generate(const std::vector<std::string>& code_tokens,
                                     std::optional<std::size_t> max_len,
                                     std::optional<std::size_t> beam_width) const {
  const std::size_t limit = max_len.value_or(config_.max_len);
  const std::size_t width = std::max<std::size_t>(beam_width.value_or(config_.beam_width), 1);
  const std::vector<std::size_t> ids = code_vocab_.encode(code_tokens);
  if (width > 1) return beam_search(ids, limit, width);

  Generation gen;
  gen.attention = Matrix(0, ids.size());
  if (limit == 0) return gen;
  const EncoderOutput enc = encode(ids);
  const Matrix keys = attention_keys(enc.states);
  Vec state = enc.h_final;
  std::size_t prev = Vocabulary::kSos;
  std::vector<Vec> rows;
  AttentionPass att;
  nn::GruCell::Cache cache;
  while (gen.ids.size() < limit) {
    run_attention(attn_query_, attn_v_.value, keys, state, enc.states, att);
    auto emb = comment_embed_.lookup(prev);
    decoder_.step(concat(emb, att.context), state, cache);
    Vec readout = concat(cache.h, att.context);
    readout.insert(readout.end(), emb.begin(), emb.end());
    const std::size_t next = argmax(readout_.forward(readout));
    if (next == Vocabulary::kEos) break;
    gen.ids.push_back(next);
    gen.tokens.push_back(comment_vocab_.token(next));
    rows.push_back(att.weights);
    state = cache.h;
    prev = next;
  }
  gen.attention = Matrix(rows.size(), ids.size());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), gen.attention.row(r).begin());
  return gen;
}

Generation SummarizerModel::beam_search(const std::vector<std::size_t>& ids, std::size_t max_len,
                                        std::size_t width) const {
  struct Hypothesis {
    double score = 0.0;
    std::vector<std::size_t> tokens;
    std::vector<Vec> rows;
    Vec state;
  };
  Generation gen;
  gen.attention = Matrix(0, ids.size());
  if (max_len == 0) return gen;
  const EncoderOutput enc = encode(ids);
  const Matrix keys = attention_keys(enc.states);
  std::vector<Hypothesis> alive{{0.0, {}, {}, enc.h_final}};
  std::vector<Hypothesis> finished;
  AttentionPass att;
  nn::GruCell::Cache cache;
  for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& hyp : alive) {
      const std::size_t prev = hyp.tokens.empty() ? Vocabulary::kSos : hyp.tokens.back();
      run_attention(attn_query_, attn_v_.value, keys, hyp.state, enc.states, att);
      auto emb = comment_embed_.lookup(prev);
      decoder_.step(concat(emb, att.context), hyp.state, cache);
      Vec readout = concat(cache.h, att.context);
      readout.insert(readout.end(), emb.begin(), emb.end());
      const Vec logits = readout_.forward(readout);
      const double lse = nn::log_sum_exp(logits);
      std::vector<std::size_t> order(logits.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      const std::size_t keep = std::min(width, order.size());
      std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                        [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
      for (std::size_t k = 0; k < keep; ++k) {
        Hypothesis next{hyp.score + logits[order[k]] - lse, hyp.tokens, hyp.rows, cache.h};
        if (order[k] == Vocabulary::kEos) {
          finished.push_back(std::move(next));
        } else {
          next.tokens.push_back(order[k]);
          next.rows.push_back(att.weights);
          candidates.push_back(std::move(next));
        }
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
    if (candidates.size() > width) candidates.resize(width);
    alive = std::move(candidates);
    if (!finished.empty() && !alive.empty()) {
      double best_finished = -std::numeric_limits<double>::infinity();
      for (const auto& f : finished) best_finished = std::max(best_finished, f.score);
      // Scores only decrease as hypotheses grow, so no live beam can overtake.
      if (alive.front().score < best_finished) break;
    }
  }
  finished.insert(finished.end(), alive.begin(), alive.end());
  const auto best = std::max_element(finished.begin(), finished.end(),
                                     [](const Hypothesis& a, const Hypothesis& b) { return a.score < b.score; });
  gen.ids = best->tokens;
  for (std::size_t id : gen.ids) gen.tokens.push_back(comment_vocab_.token(id));
  gen.attention = Matrix(best->rows.size(), ids.size());
  for (std::size_t r = 0; r < best->rows.size(); ++r) {
    std::copy(best->rows[r].begin(), best->rows[r].end(), gen.attention.row(r).begin());
  }
  return gen;
}

namespace {

std::vector<std::size_t> target_ids(const Vocabulary& vocab, const std::vector<std::string>& comment) {
  std::vector<std::size_t> out = vocab.encode(comment);
  out.push_back(Vocabulary::kEos);
  return out;
}

}  // namespace

double SummarizerModel::loss(const ParallelPair& pair) const {
  const auto ids = code_vocab_.encode(pair.code_tokens);
  const auto targets = target_ids(comment_vocab_, pair.comment_tokens);
  const EncoderOutput enc = encode(ids);
  const Matrix keys = attention_keys(enc.states);
  Vec state = enc.h_final;
  std::size_t prev = Vocabulary::kSos;
  AttentionPass att;
  nn::GruCell::Cache cache;
  double total = 0.0;
  for (std::size_t target : targets) {
    run_attention(attn_query_, attn_v_.value, keys, state, enc.states, att);
    auto emb = comment_embed_.lookup(prev);
    decoder_.step(concat(emb, att.context), state, cache);
    Vec readout = concat(cache.h, att.context);
    readout.insert(readout.end(), emb.begin(), emb.end());
    const Vec logits = readout_.forward(readout);
    total += nn::log_sum_exp(logits) - logits[target];
    state = cache.h;
    prev = target;
  }
  return total / static_cast<double>(targets.size());
}

double SummarizerModel::accumulate_gradients(const ParallelPair& pair, Rng* dropout_rng, double scale) {
  const auto ids = code_vocab_.encode(pair.code_tokens);
  const auto targets = target_ids(comment_vocab_, pair.comment_tokens);
  const std::size_t n = ids.size(), steps = targets.size();
  const std::size_t he = config_.enc_hidden, hd = config_.dec_hidden, ec = config_.comment_dim;
  const std::size_t ctx_dim = 2 * he;

  EncoderPass enc;
  run_encoder(code_embed_, enc_forward_, enc_backward_, bridge_, ids, enc);
  // Dropout on the encoder outputs seen by attention.
  Matrix states = enc.states;
  Matrix state_mask;
  if (dropout_rng) {
    state_mask = Matrix(n, ctx_dim);
    for (std::size_t j = 0; j < n; ++j) {
      Vec m = nn::dropout_mask(ctx_dim, config_.dropout, *dropout_rng);
      std::copy(m.begin(), m.end(), state_mask.row(j).begin());
      nn::apply_mask(states.row(j), m);
    }
  }
  const Matrix keys = attention_keys(states);

  std::vector<AttentionPass> atts(steps);
  std::vector<nn::GruCell::Cache> caches(steps);
  std::vector<Vec> readouts(steps), masks(steps), dlogits(steps), prev_states(steps);
  std::vector<std::size_t> prevs(steps);
  Vec state = enc.h_final;
  std::size_t prev = Vocabulary::kSos;
  double total = 0.0;
  const double step_scale = scale / static_cast<double>(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    prevs[t] = prev;
    prev_states[t] = state;
    run_attention(attn_query_, attn_v_.value, keys, state, states, atts[t]);
    auto emb = comment_embed_.lookup(prev);
    decoder_.step(concat(emb, atts[t].context), state, caches[t]);
    Vec readout = concat(caches[t].h, atts[t].context);
    readout.insert(readout.end(), emb.begin(), emb.end());
    if (dropout_rng) {
      masks[t] = nn::dropout_mask(readout.size(), config_.dropout, *dropout_rng);
      nn::apply_mask(readout, masks[t]);
    }
    auto xent = nn::softmax_xent(readout_.forward(readout), targets[t]);
    total += xent.loss;
    for (double& g : xent.grad) g *= step_scale;
    dlogits[t] = std::move(xent.grad);
    readouts[t] = std::move(readout);
    state = caches[t].h;
    prev = targets[t];
  }

  Matrix d_states(n, ctx_dim);
  Matrix d_keys(n, config_.attention_dim);
  Vec ds_next(hd, 0.0);
  for (std::size_t t = steps; t-- > 0;) {
    Vec d_readout(readouts[t].size(), 0.0);
    readout_.backward(readouts[t], dlogits[t], d_readout);
    if (!masks[t].empty()) nn::apply_mask(d_readout, masks[t]);
    Vec ds(d_readout.begin(), d_readout.begin() + hd);
    Vec d_ctx(d_readout.begin() + hd, d_readout.begin() + hd + ctx_dim);
    Vec d_emb(d_readout.begin() + hd + ctx_dim, d_readout.end());
    for (std::size_t k = 0; k < hd; ++k) ds[k] += ds_next[k];

    Vec d_input(ec + ctx_dim, 0.0);
    Vec ds_prev(hd, 0.0);
    decoder_.backward(caches[t], ds, d_input, ds_prev);
    for (std::size_t k = 0; k < ec; ++k) d_emb[k] += d_input[k];
    for (std::size_t k = 0; k < ctx_dim; ++k) d_ctx[k] += d_input[ec + k];
    comment_embed_.backward(prevs[t], d_emb);

    // Attention backward.
    const AttentionPass& att = atts[t];
    Vec d_weights(n);
    for (std::size_t j = 0; j < n; ++j) {
      d_weights[j] = dot(d_ctx, states.row(j));
      axpy(att.weights[j], d_ctx, d_states.row(j));
    }
    const double mean = dot(att.weights, d_weights);
    Vec d_query(config_.attention_dim, 0.0);
    auto v = attn_v_.value.data();
    auto dv = attn_v_.grad.data();
    for (std::size_t j = 0; j < n; ++j) {
      const double d_score = att.weights[j] * (d_weights[j] - mean);
      auto hidden = att.hidden.row(j);
      auto dk = d_keys.row(j);
      for (std::size_t k = 0; k < hidden.size(); ++k) {
        dv[k] += d_score * hidden[k];
        const double d_pre = d_score * v[k] * (1.0 - hidden[k] * hidden[k]);
        d_query[k] += d_pre;
        dk[k] += d_pre;
      }
    }
    attn_query_.backward(prev_states[t], d_query, ds_prev);
    ds_next = std::move(ds_prev);
  }
  for (std::size_t j = 0; j < n; ++j) {
    outer_acc(d_keys.row(j), states.row(j), attn_key_.grad);
    matvec_t_acc(attn_key_.value, d_keys.row(j), d_states.row(j));
  }
  if (dropout_rng) {
    for (std::size_t j = 0; j < n; ++j) nn::apply_mask(d_states.row(j), state_mask.row(j));
  }

  // Bridge: h_final = tanh(W h_last + b).
  Vec d_pre(hd);
  for (std::size_t k = 0; k < hd; ++k) d_pre[k] = ds_next[k] * (1.0 - enc.h_final[k] * enc.h_final[k]);
  Vec d_last(ctx_dim, 0.0);
  bridge_.backward(enc.h_last, d_pre, d_last);
  for (std::size_t k = 0; k < he; ++k) {
    d_states(n - 1, k) += d_last[k];
    d_states(0, he + k) += d_last[he + k];
  }

  const bool embed_trainable = !code_embed_.table.frozen;
  std::vector<Vec> dx(n, Vec(code_embed_.dim(), 0.0));
  Vec dh_next(he, 0.0), dh_prev(he);
  for (std::size_t t = n; t-- > 0;) {
    Vec dh(d_states.row(t).begin(), d_states.row(t).begin() + he);
    for (std::size_t k = 0; k < he; ++k) dh[k] += dh_next[k];
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    enc_forward_.backward(enc.fwd[t], dh, dx[t], dh_prev);
    dh_next.swap(dh_prev);
  }
  std::fill(dh_next.begin(), dh_next.end(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    Vec dh(d_states.row(t).begin() + he, d_states.row(t).end());
    for (std::size_t k = 0; k < he; ++k) dh[k] += dh_next[k];
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    enc_backward_.backward(enc.bwd[t], dh, dx[t], dh_prev);
    dh_next.swap(dh_prev);
  }
  if (embed_trainable) {
    for (std::size_t t = 0; t < n; ++t) code_embed_.backward(ids[t], dx[t]);
  }
  return total / static_cast<double>(steps);
}

Checkpoint SummarizerModel::to_checkpoint() const {
  const auto strip = [](const Vocabulary& v) {
    return std::vector<std::string>(v.tokens().begin() + Vocabulary::kSpecialCount, v.tokens().end());
  };
  json meta = {
      {"mode", mode_name(config_.mode)},
      {"code_dim", code_embed_.dim()},
      {"enc_hidden", config_.enc_hidden},
      {"dec_hidden", config_.dec_hidden},
      {"comment_dim", config_.comment_dim},
      {"attention_dim", config_.attention_dim},
      {"dropout", config_.dropout},
      {"max_len", config_.max_len},
      {"beam_width", config_.beam_width},
      {"code_tokens", strip(code_vocab_)},
      {"comment_tokens", strip(comment_vocab_)},
  };
  auto* self = const_cast<SummarizerModel*>(this);
  return Checkpoint::capture(ModelKind::kSummarizer, meta.dump(), self->params());
}

SummarizerModel SummarizerModel::from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != ModelKind::kSummarizer) throw Error("checkpoint does not hold a summarizer");
  const json meta = json::parse(ck.metadata);
  SummarizerConfig config;
  config.mode = parse_mode(meta.at("mode").get<std::string>());
  config.enc_hidden = meta.at("enc_hidden").get<std::size_t>();
  config.dec_hidden = meta.at("dec_hidden").get<std::size_t>();
  config.comment_dim = meta.at("comment_dim").get<std::size_t>();
  config.attention_dim = meta.at("attention_dim").get<std::size_t>();
  config.dropout = meta.at("dropout").get<double>();
  config.max_len = meta.at("max_len").get<std::size_t>();
  config.beam_width = meta.at("beam_width").get<std::size_t>();
  config.code_dim = meta.at("code_dim").get<std::size_t>();
  SummarizerModel model(Vocabulary(meta.at("code_tokens").get<std::vector<std::string>>()),
                        Vocabulary(meta.at("comment_tokens").get<std::vector<std::string>>()), config.code_dim,
                        config);
  ck.restore(model.params());
  return model;
}

void train_summarizer(SummarizerModel& model, const std::vector<ParallelPair>& train,
                      const SummarizerConfig& config, TrainHistory* history,
                      const std::vector<ParallelPair>* valid, const SummarizerHooks& hooks) {
  std::vector<const ParallelPair*> usable;
  for (const auto& p : train) {
    if (!p.code_tokens.empty()) usable.push_back(&p);
  }
  if (usable.empty()) throw Error("train_summarizer: empty corpus");
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

  auto mean_loss = [&](const std::vector<ParallelPair>& set) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& p : set) {
      if (p.code_tokens.empty()) continue;
      total += model.loss(p);
      ++count;
    }
    return count ? total / static_cast<double>(count) : 0.0;
  };

  while (!state.halted && config.epochs > 0) {
    order_rng.shuffle(usable);
    double epoch_total = 0.0;
    for (std::size_t b = 0; b < usable.size(); b += batch) {
      const std::size_t end = std::min(usable.size(), b + batch);
      nn::zero_grads(params);
      const double scale = 1.0 / static_cast<double>(end - b);
      for (std::size_t i = b; i < end; ++i) {
        epoch_total += model.accumulate_gradients(*usable[i], &dropout_rng, scale);
      }
      nn::sgd_step(params, {state.learning_rate, config.clip_norm});
    }
    const double epoch_loss = epoch_total / static_cast<double>(usable.size());
    const double valid_loss = valid && !valid->empty() ? mean_loss(*valid) : epoch_loss;
    if (history) {
      history->epoch_losses.push_back(epoch_loss);
      history->valid_losses.push_back(valid_loss);
    }
    state = nn::plateau_decay(state, valid_loss);
    if (config.verbose) {
      std::clog << "summarizer epoch " << state.epoch << " loss " << epoch_loss << " valid " << valid_loss
                << " lr " << state.learning_rate << "\n";
    }
    if (hooks.on_epoch) hooks.on_epoch(model, state.epoch);
  }
  if (history) history->final_state = state;
}

SummarizerModel train_summarizer(const std::vector<ParallelPair>& train, const Vocabulary& code_vocab,
                                 const Vocabulary& comment_vocab, const EmbeddingTable& code_table,
                                 const SummarizerConfig& config, TrainHistory* history,
                                 const std::vector<ParallelPair>* valid, const SummarizerHooks& hooks) {
  SummarizerModel model(code_vocab, comment_vocab, code_table, config);
  train_summarizer(model, train, config, history, valid, hooks);
  return model;
}

std::string format_attention(const Matrix& attention, const std::vector<std::string>& code_tokens,
                             const std::vector<std::string>& comment_tokens) {
  if (attention.rows() != comment_tokens.size() ||
      (attention.rows() > 0 && attention.cols() != code_tokens.size())) {
    throw DimensionError("attention matrix does not match the token labels");
  }
  std::string out = std::to_string(attention.rows()) + " " + std::to_string(code_tokens.size()) + "\n";
  if (attention.rows() == 0) return out;
  for (std::size_t r = 0; r < attention.rows(); ++r) {
    auto row = attention.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ' ';
      out += format_double(row[c]);
    }
    out += '\n';
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += '\t';
      s += v[i];
    }
    return s + "\n";
  };
  out += join(comment_tokens);
  out += join(code_tokens);
  return out;
}

void export_attention(const Matrix& attention, const std::vector<std::string>& code_tokens,
                      const std::vector<std::string>& comment_tokens, const std::filesystem::path& path) {
  write_file_atomic(path, format_attention(attention, code_tokens, comment_tokens));
}

}  // namespace lamner
