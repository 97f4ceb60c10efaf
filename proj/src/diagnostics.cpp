#include "lamner/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lamner/char_lm.hpp"
#include "lamner/crf.hpp"
#include "lamner/error.hpp"
#include "lamner/lexer.hpp"
#include "lamner/ner.hpp"
#include "lamner/nn.hpp"
#include "lamner/summarizer.hpp"

namespace lamner {
namespace {

// Extended-precision re-implementation of every forward pass, used as the
// numeric side of the finite-difference checks. Written independently of the
// production kernels and reading parameters by name.
using Real = long double;
using RVec = std::vector<Real>;

class Params {
 public:
  explicit Params(const nn::ParamList& list) {
    for (nn::Param* p : list) by_name_[p->name] = p;
  }
  const Matrix& operator[](const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw Error("reference: missing parameter " + name);
    return it->second->value;
  }

 private:
  std::map<std::string, const nn::Param*> by_name_;
};

RVec widen(std::span<const double> v) { return RVec(v.begin(), v.end()); }

// rows [begin, begin + count) of W times x
RVec mul(const Matrix& w, const RVec& x, std::size_t begin, std::size_t count) {
  RVec y(count, 0.0L);
  for (std::size_t r = 0; r < count; ++r) {
    Real s = 0.0L;
    for (std::size_t c = 0; c < x.size(); ++c) s += static_cast<Real>(w(begin + r, c)) * x[c];
    y[r] = s;
  }
  return y;
}

RVec affine(const Matrix& w, const Matrix& b, const RVec& x) {
  RVec y = mul(w, x, 0, w.rows());
  for (std::size_t r = 0; r < y.size(); ++r) y[r] += b(r, 0);
  return y;
}

Real logistic(Real a) { return 1.0L / (1.0L + std::exp(-a)); }

Real lse(const RVec& v) {
  Real m = *std::max_element(v.begin(), v.end());
  Real s = 0.0L;
  for (Real x : v) s += std::exp(x - m);
  return m + std::log(s);
}

Real xent(const RVec& logits, std::size_t target) { return lse(logits) - logits[target]; }

RVec join(const RVec& a, const RVec& b) {
  RVec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// Gates i, f, o, g stacked in that order.
void lstm_step(const Params& p, const std::string& name, const RVec& x, RVec& h, RVec& c) {
  const std::size_t n = h.size();
  const Matrix& w = p[name + ".w"];
  const Matrix& u = p[name + ".u"];
  const Matrix& b = p[name + ".b"];
  RVec a = mul(w, x, 0, 4 * n);
  RVec ah = mul(u, h, 0, 4 * n);
  for (std::size_t k = 0; k < 4 * n; ++k) a[k] += ah[k] + b(k, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const Real i = logistic(a[k]), f = logistic(a[n + k]), o = logistic(a[2 * n + k]);
    const Real g = std::tanh(a[3 * n + k]);
    c[k] = f * c[k] + i * g;
    h[k] = o * std::tanh(c[k]);
  }
}

// Gates z, r, n stacked in that order; the candidate sees r * h.
void gru_step(const Params& p, const std::string& name, const RVec& x, RVec& h) {
  const std::size_t n = h.size();
  const Matrix& w = p[name + ".w"];
  const Matrix& u = p[name + ".u"];
  const Matrix& b = p[name + ".b"];
  const RVec wx = mul(w, x, 0, 3 * n);
  const RVec uh = mul(u, h, 0, 2 * n);
  RVec z(n), r(n), rh(n);
  for (std::size_t k = 0; k < n; ++k) {
    z[k] = logistic(wx[k] + uh[k] + b(k, 0));
    r[k] = logistic(wx[n + k] + uh[n + k] + b(n + k, 0));
    rh[k] = r[k] * h[k];
  }
  const RVec urh = mul(u, rh, 2 * n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const Real cand = std::tanh(wx[2 * n + k] + urh[k] + b(2 * n + k, 0));
    h[k] = (1.0L - z[k]) * h[k] + z[k] * cand;
  }
}

Real crf_nll(const Matrix& tr, const std::vector<RVec>& emissions, const std::vector<std::size_t>& gold) {
  const std::size_t k = emissions[0].size(), bos = k, eos = k + 1;
  RVec alpha(k);
  for (std::size_t y = 0; y < k; ++y) alpha[y] = tr(bos, y) + emissions[0][y];
  for (std::size_t t = 1; t < emissions.size(); ++t) {
    RVec next(k);
    for (std::size_t y = 0; y < k; ++y) {
      RVec terms(k);
      for (std::size_t q = 0; q < k; ++q) terms[q] = alpha[q] + tr(q, y);
      next[y] = lse(terms) + emissions[t][y];
    }
    alpha = next;
  }
  for (std::size_t y = 0; y < k; ++y) alpha[y] += tr(y, eos);
  Real gold_score = static_cast<Real>(tr(bos, gold[0])) + tr(gold.back(), eos);
  for (std::size_t t = 0; t < gold.size(); ++t) {
    gold_score += emissions[t][gold[t]];
    if (t > 0) gold_score += tr(gold[t - 1], gold[t]);
  }
  return lse(alpha) - gold_score;
}


void randomize(nn::Param& p, Rng& rng, double scale = 1.0) {
  for (double& v : p.value.data()) v = rng.uniform(-scale, scale);
}

Vec random_vec(std::size_t n, Rng& rng) {
  Vec v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

Real rdot(const Vec& a, const RVec& b) {
  Real s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double linear_case(std::uint64_t seed) {
  Rng rng(seed);
  nn::Linear layer("linear", 5, 4);
  layer.init(rng);
  nn::Param input("input", 5, 1);
  randomize(input, rng);
  const Vec coef = random_vec(4, rng);
  nn::ParamList params = layer.params();
  params.push_back(&input);
  const Params named(params);
  auto loss = [&] {
    return rdot(coef, affine(named["linear.weight"], named["linear.bias"], widen(named["input"].data())));
  };
  auto grads = [&] {
    nn::zero_grads(params);
    layer.backward(input.value.data(), coef, input.grad.data());
  };
  return nn::grad_check(loss, grads, params);
}

double softmax_case(std::uint64_t seed) {
  Rng rng(seed);
  nn::Param logits("logits", 7, 1);
  randomize(logits, rng, 3.0);
  const std::size_t target = rng.index(7);
  auto loss = [&] { return xent(widen(logits.value.data()), target); };
  auto grads = [&] {
    logits.zero_grad();
    auto r = nn::softmax_xent(logits.value.data(), target);
    std::copy(r.grad.begin(), r.grad.end(), logits.grad.data().begin());
  };
  return nn::grad_check(loss, grads, {&logits});
}

double embedding_case(std::uint64_t seed) {
  Rng rng(seed);
  nn::Embedding embed("embed", 6, 3);
  randomize(embed.table, rng);
  const std::vector<std::size_t> ids{1, 4, 1, 0};
  std::vector<Vec> coef;
  for (std::size_t i = 0; i < ids.size(); ++i) coef.push_back(random_vec(3, rng));
  auto loss = [&] {
    Real s = 0.0L;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const RVec row = widen(embed.table.value.row(ids[i]));
      s += rdot(coef[i], row);
      for (Real x : row) s += 0.5L * x * x;
    }
    return s;
  };
  auto grads = [&] {
    embed.table.zero_grad();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Vec g = coef[i];
      axpy(1.0, embed.lookup(ids[i]), g);
      embed.backward(ids[i], g);
    }
  };
  return nn::grad_check(loss, grads, {&embed.table});
}

double lstm_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = 3, h = 4, steps = 4;
  nn::LstmCell cell("lstm", in, h);
  cell.init(rng);
  nn::Param inputs("inputs", steps, in);
  randomize(inputs, rng);
  std::vector<Vec> coef_h, coef_c;
  for (std::size_t t = 0; t < steps; ++t) {
    coef_h.push_back(random_vec(h, rng));
    coef_c.push_back(random_vec(h, rng));
  }
  nn::ParamList params = cell.params();
  params.push_back(&inputs);
  const Params named(params);
  auto loss = [&] {
    RVec hs(h, 0.0L), cs(h, 0.0L);
    Real s = 0.0L;
    for (std::size_t t = 0; t < steps; ++t) {
      lstm_step(named, "lstm", widen(inputs.value.row(t)), hs, cs);
      s += rdot(coef_h[t], hs) + rdot(coef_c[t], cs);
    }
    return s;
  };
  auto grads = [&] {
    nn::zero_grads(params);
    std::vector<nn::LstmCell::Cache> caches(steps);
    Vec hs(h, 0.0), cs(h, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      cell.step(inputs.value.row(t), hs, cs, caches[t]);
      hs = caches[t].h;
      cs = caches[t].c;
    }
    Vec dh_next(h, 0.0), dc_next(h, 0.0);
    for (std::size_t t = steps; t-- > 0;) {
      Vec dh = coef_h[t], dc = coef_c[t];
      axpy(1.0, dh_next, dh);
      axpy(1.0, dc_next, dc);
      Vec dh_prev(h, 0.0), dc_prev(h, 0.0);
      cell.backward(caches[t], dh, dc, inputs.grad.row(t), dh_prev, dc_prev);
      dh_next = dh_prev;
      dc_next = dc_prev;
    }
  };
  return nn::grad_check(loss, grads, params);
}

double gru_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = 3, h = 4, steps = 4;
  nn::GruCell cell("gru", in, h);
  cell.init(rng);
  nn::Param inputs("inputs", steps, in);
  randomize(inputs, rng);
  std::vector<Vec> coef;
  for (std::size_t t = 0; t < steps; ++t) coef.push_back(random_vec(h, rng));
  nn::ParamList params = cell.params();
  params.push_back(&inputs);
  const Params named(params);
  auto loss = [&] {
    RVec hs(h, 0.0L);
    Real s = 0.0L;
    for (std::size_t t = 0; t < steps; ++t) {
      gru_step(named, "gru", widen(inputs.value.row(t)), hs);
      s += rdot(coef[t], hs);
    }
    return s;
  };
  auto grads = [&] {
    nn::zero_grads(params);
    std::vector<nn::GruCell::Cache> caches(steps);
    Vec hs(h, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      cell.step(inputs.value.row(t), hs, caches[t]);
      hs = caches[t].h;
    }
    Vec dh_next(h, 0.0);
    for (std::size_t t = steps; t-- > 0;) {
      Vec dh = coef[t];
      axpy(1.0, dh_next, dh);
      Vec dh_prev(h, 0.0);
      cell.backward(caches[t], dh, inputs.grad.row(t), dh_prev);
      dh_next = dh_prev;
    }
  };
  return nn::grad_check(loss, grads, params);
}

double crf_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t labels = 1 + rng.index(5), length = 1 + rng.index(6);
  Crf crf(labels);
  randomize(crf.transitions, rng);
  nn::Param emissions("emissions", length, labels);
  randomize(emissions, rng, 2.0);
  std::vector<std::size_t> gold(length);
  for (auto& g : gold) g = rng.index(labels);
  auto loss = [&] {
    std::vector<RVec> e;
    for (std::size_t t = 0; t < length; ++t) e.push_back(widen(emissions.value.row(t)));
    return crf_nll(crf.transitions.value, e, gold);
  };
  auto grads = [&] {
    crf.transitions.zero_grad();
    Matrix d;
    crf.neg_log_likelihood(emissions.value, gold, &d);
    emissions.grad = d;
  };
  return nn::grad_check(loss, grads, {&crf.transitions, &emissions});
}

// Mean next-character loss of one direction over one line, in nats.
Real char_direction_loss(const Params& p, const std::string& dir, const std::vector<std::size_t>& ids,
                         std::size_t hidden, std::size_t newline) {
  RVec hs(hidden, 0.0L), cs(hidden, 0.0L);
  Real s = 0.0L;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    lstm_step(p, "charlm." + dir + ".lstm", widen(p["charlm.embed"].row(ids[t])), hs, cs);
    const RVec logits = affine(p["charlm." + dir + ".out.weight"], p["charlm." + dir + ".out.bias"], hs);
    s += xent(logits, t + 1 < ids.size() ? ids[t + 1] : newline);
  }
  return s;
}

double char_lm_case(std::uint64_t seed) {
  const std::vector<std::string> lines{"ab ba", "bca"};
  CharLmConfig config;
  config.char_dim = 3;
  config.hidden = 4;
  config.seed = seed;
  CharLm model(CharVocabulary::build(lines), config);
  std::vector<const std::string*> ptrs{&lines[0], &lines[1]};
  const double chars = 8.0;
  nn::ParamList params = model.params();
  const Params named(params);
  auto loss = [&] {
    Real s = 0.0L;
    for (const auto& line : lines) {
      std::vector<std::size_t> ids;
      for (char c : line) ids.push_back(model.vocab().index(c));
      s += char_direction_loss(named, "fwd", ids, config.hidden, CharVocabulary::kNewline);
      std::reverse(ids.begin(), ids.end());
      s += char_direction_loss(named, "bwd", ids, config.hidden, CharVocabulary::kNewline);
    }
    return s / (2.0L * chars);
  };
  auto grads = [&] {
    nn::zero_grads(params);
    model.accumulate_gradients(ptrs, nullptr, 1.0 / (2.0 * chars));
  };
  return nn::grad_check(loss, grads, params);
}

EmbeddingTable random_table(const std::vector<std::string>& tokens, std::size_t dim, Rng& rng) {
  EmbeddingTable table(dim);
  for (const auto& t : tokens) table.add(t, random_vec(dim, rng));
  return table;
}

Real ner_loss(const Params& p, const std::vector<std::size_t>& ids, const std::vector<std::size_t>& gold,
              std::size_t hidden) {
  const std::size_t n = ids.size();
  std::vector<RVec> proj(n);
  for (std::size_t t = 0; t < n; ++t) {
    proj[t] = affine(p["ner.proj.weight"], p["ner.proj.bias"], widen(p["ner.embed"].row(ids[t])));
  }
  std::vector<RVec> fwd(n), bwd(n);
  RVec hs(hidden, 0.0L), cs(hidden, 0.0L);
  for (std::size_t t = 0; t < n; ++t) {
    lstm_step(p, "ner.fwd.lstm", proj[t], hs, cs);
    fwd[t] = hs;
  }
  hs.assign(hidden, 0.0L);
  cs.assign(hidden, 0.0L);
  for (std::size_t t = n; t-- > 0;) {
    lstm_step(p, "ner.bwd.lstm", proj[t], hs, cs);
    bwd[t] = hs;
  }
  std::vector<RVec> emissions(n);
  for (std::size_t t = 0; t < n; ++t) {
    emissions[t] = affine(p["ner.emit.weight"], p["ner.emit.bias"], join(fwd[t], bwd[t]));
  }
  return crf_nll(p["ner.crf.transitions"], emissions, gold);
}

double ner_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> tokens{"public", "int", "size", "(", ")", "{"};
  EmbeddingTable table = random_table(tokens, 4, rng);
  NerConfig config;
  config.proj = 3;
  config.hidden = 3;
  config.seed = seed;
  NerModel model(table, config);
  LabeledSequence seq;
  seq.tokens = {"public", "int", "size", "(", ")", "{", "unseen"};
  std::vector<std::size_t> gold;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    gold.push_back(rng.index(kEntityLabelCount));
    seq.labels.push_back(all_labels()[gold.back()]);
  }
  const auto ids = model.vocab().encode(seq.tokens);
  nn::ParamList params = model.params();
  const Params named(params);
  auto loss = [&] { return ner_loss(named, ids, gold, config.hidden); };
  auto grads = [&] {
    nn::zero_grads(params);
    model.accumulate_gradients(seq, nullptr, 1.0);
  };
  return nn::grad_check(loss, grads, params);
}

Real summarizer_loss(const Params& p, const std::vector<std::size_t>& code, const std::vector<std::size_t>& targets,
                     const SummarizerConfig& config) {
  const std::size_t n = code.size(), he = config.enc_hidden;
  std::vector<RVec> fwd(n), bwd(n);
  RVec hs(he, 0.0L);
  for (std::size_t t = 0; t < n; ++t) {
    gru_step(p, "summ.enc.fwd", widen(p["summ.code_embed"].row(code[t])), hs);
    fwd[t] = hs;
  }
  hs.assign(he, 0.0L);
  for (std::size_t t = n; t-- > 0;) {
    gru_step(p, "summ.enc.bwd", widen(p["summ.code_embed"].row(code[t])), hs);
    bwd[t] = hs;
  }
  std::vector<RVec> memory(n), keys(n);
  for (std::size_t t = 0; t < n; ++t) {
    memory[t] = join(fwd[t], bwd[t]);
    keys[t] = mul(p["summ.attn.key"], memory[t], 0, config.attention_dim);
  }
  RVec state = affine(p["summ.bridge.weight"], p["summ.bridge.bias"], join(fwd[n - 1], bwd[0]));
  for (Real& v : state) v = std::tanh(v);
  const Matrix& v = p["summ.attn.v"];
  std::size_t prev = Vocabulary::kSos;
  Real total = 0.0L;
  for (std::size_t target : targets) {
    const RVec query = affine(p["summ.attn.query.weight"], p["summ.attn.query.bias"], state);
    RVec scores(n);
    for (std::size_t j = 0; j < n; ++j) {
      Real s = 0.0L;
      for (std::size_t k = 0; k < query.size(); ++k) s += v(0, k) * std::tanh(query[k] + keys[j][k]);
      scores[j] = s;
    }
    const Real norm = lse(scores);
    RVec context(2 * he, 0.0L);
    for (std::size_t j = 0; j < n; ++j) {
      const Real w = std::exp(scores[j] - norm);
      for (std::size_t k = 0; k < context.size(); ++k) context[k] += w * memory[j][k];
    }
    const RVec emb = widen(p["summ.comment_embed"].row(prev));
    gru_step(p, "summ.dec", join(emb, context), state);
    const RVec logits = affine(p["summ.readout.weight"], p["summ.readout.bias"], join(join(state, context), emb));
    total += xent(logits, target);
    prev = target;
  }
  return total / static_cast<Real>(targets.size());
}

// Micro summarizer: decoder hidden 8, 12-token vocabularies, 5-token code.
double summarizer_case(std::uint64_t seed, bool single_step) {
  Rng rng(seed);
  std::vector<std::string> code, comment;
  for (int i = 0; i < 8; ++i) {
    code.push_back("c" + std::to_string(i));
    comment.push_back("w" + std::to_string(i));
  }
  SummarizerConfig config;
  config.enc_hidden = 4;
  config.dec_hidden = 8;
  config.comment_dim = 5;
  config.attention_dim = 6;
  config.seed = seed;
  SummarizerModel model(Vocabulary(code), Vocabulary(comment), random_table(code, 6, rng), config);
  ParallelPair pair;
  for (int i = 0; i < 5; ++i) pair.code_tokens.push_back("c" + std::to_string(rng.index(9)));
  if (!single_step) {
    for (int i = 0; i < 4; ++i) pair.comment_tokens.push_back("w" + std::to_string(rng.index(9)));
  }
  const auto code_ids = model.code_vocab().encode(pair.code_tokens);
  auto targets = model.comment_vocab().encode(pair.comment_tokens);
  targets.push_back(Vocabulary::kEos);
  nn::ParamList params = model.params();
  const Params named(params);
  auto loss = [&] { return summarizer_loss(named, code_ids, targets, config); };
  auto grads = [&] {
    nn::zero_grads(params);
    model.accumulate_gradients(pair, nullptr, 1.0);
  };
  return nn::grad_check(loss, grads, params);
}

}  // namespace

const std::vector<GradientCase>& gradient_cases() {
  static const std::vector<GradientCase> cases{
      {"linear", 1e-6, linear_case},
      {"softmax-xent", 1e-6, softmax_case},
      {"embedding", 1e-6, embedding_case},
      {"lstm", 1e-4, lstm_case},
      {"gru", 1e-4, gru_case},
      {"crf", 1e-4, crf_case},
      {"char-lm", 1e-4, char_lm_case},
      {"ner", 1e-4, ner_case},
      {"decode-step", 1e-4, [](std::uint64_t s) { return summarizer_case(s, true); }},
      {"summarizer", 1e-4, [](std::uint64_t s) { return summarizer_case(s, false); }},
  };
  return cases;
}

CrfOracleReport crf_oracle_check(std::size_t instances, std::uint64_t seed, std::size_t max_len,
                                 std::size_t max_labels) {
  CrfOracleReport out;
  Rng rng(seed);
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t len = 1 + rng.index(max_len);
    const std::size_t labels = 1 + rng.index(max_labels);
    Crf crf(labels);
    for (double& v : crf.transitions.value.data()) v = rng.uniform(-2.0, 2.0);
    Matrix emissions(len, labels);
    for (double& v : emissions.data()) v = rng.uniform(-2.0, 2.0);

    const Matrix& tr = crf.transitions.value;
    auto score = [&](const std::vector<std::size_t>& path) {
      Real s = static_cast<Real>(tr(labels, path[0])) + static_cast<Real>(tr(path.back(), labels + 1));
      for (std::size_t t = 0; t < len; ++t) {
        s += emissions(t, path[t]);
        if (t > 0) s += tr(path[t - 1], path[t]);
      }
      return s;
    };

    std::vector<std::size_t> path(len, 0);
    std::vector<Real> scores;
    Real best = -std::numeric_limits<Real>::infinity();
    while (true) {
      const Real s = score(path);
      scores.push_back(s);
      best = std::max(best, s);
      std::size_t pos = 0;
      while (pos < len && ++path[pos] == labels) path[pos++] = 0;
      if (pos == len) break;
    }
    Real total = 0;
    for (Real s : scores) total += std::exp(s - best);
    const Real log_z = best + std::log(total);

    out.max_log_partition_error = std::max(
        out.max_log_partition_error,
        static_cast<double>(std::fabs(static_cast<Real>(crf.log_partition(emissions)) - log_z)));
    const auto decoded = crf.viterbi(emissions);
    bool ok = decoded.size() == len;
    for (std::size_t l : decoded) ok = ok && l < labels;
    if (ok) {
      const double gap = static_cast<double>(best - score(decoded));
      out.max_viterbi_gap = std::max(out.max_viterbi_gap, gap);
      ok = gap <= 1e-9;
    }
    if (!ok) ++out.viterbi_failures;
    ++out.instances;
  }
  return out;
}

std::vector<LexerGoldenCase> parse_lexer_golden(std::string_view text) {
  std::vector<LexerGoldenCase> cases;
  enum { kOutside, kSource, kExpected } state = kOutside;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.rfind("=== ", 0) == 0) {
      cases.push_back({line.substr(4), "", {}});
      state = kSource;
    } else if (state == kSource && line == "---") {
      if (!cases.back().source.empty()) cases.back().source.pop_back();
      state = kExpected;
    } else if (state == kSource) {
      cases.back().source += line + "\n";
    } else if (state == kExpected && !line.empty()) {
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos) throw DatasetError("golden entry without TAB", line_no);
      cases.back().expected.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    } else if (state == kExpected) {
      state = kOutside;
    } else if (!line.empty() && line[0] != '#') {
      throw DatasetError("text outside a golden case", line_no);
    }
  }
  if (state == kSource) throw DatasetError("golden case without expectations", line_no);
  return cases;
}

std::vector<std::string> check_lexer_golden(const std::vector<LexerGoldenCase>& cases) {
  std::vector<std::string> problems;
  for (const auto& c : cases) {
    TokenizedMethod method;
    try {
      method = lex_and_label(c.source);
    } catch (const Error& e) {
      problems.push_back(c.name + ": " + e.what());
      continue;
    }
    if (method.tokens.size() != c.expected.size()) {
      problems.push_back(c.name + ": " + std::to_string(method.tokens.size()) + " tokens, expected " +
                         std::to_string(c.expected.size()));
    }
    const std::size_t n = std::min(method.tokens.size(), c.expected.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& t = method.tokens[i];
      const std::string got = t.label ? std::string(label_name(*t.label)) : "<none>";
      if (t.text != c.expected[i].first || got != c.expected[i].second) {
        problems.push_back(c.name + " token " + std::to_string(i) + ": got '" + t.text + "' " + got +
                           ", expected '" + c.expected[i].first + "' " + c.expected[i].second);
      }
    }
  }
  return problems;
}

namespace {

Tokens split_words(const std::string& text) {
  std::istringstream in(text);
  Tokens out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<EvalPair> golden_eval_pairs(const nlohmann::json& list) {
  std::vector<EvalPair> pairs;
  for (const auto& p : list) {
    pairs.push_back({split_words(p.at("candidate").get<std::string>()),
                     {split_words(p.at("reference").get<std::string>())}});
  }
  return pairs;
}

}  // namespace

std::vector<std::string> check_metric_golden(std::string_view golden_json, std::string_view golden_report,
                                             const MetricOptions& options, std::size_t* checks) {
  std::vector<std::string> problems;
  std::size_t count = 0;
  auto expect = [&](const std::string& what, double got, double want, double tol) {
    ++count;
    if (!(std::fabs(got - want) <= tol)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), ": got %.9f expected %.9f", got, want);
      problems.push_back(what + buf);
    }
  };

  auto one = [](const char* candidate, const char* reference) {
    return std::vector<EvalPair>{{split_words(candidate), {split_words(reference)}}};
  };
  expect("bleu-2 hand example", bleu(one("a b c d", "a b x d"), 2), 50.0, 1e-6);
  expect("rouge-l hand example", rouge_l(one("the cat ran", "the cat sat")), 200.0 / 3.0, 1e-6);
  expect("meteor identity", meteor(one("w x y z", "w x y z"), options), 99.21875, 1e-6);
  expect("meteor reversed", meteor(one("z y x w", "w x y z"), options), 50.0, 1e-6);
  {
    std::vector<EvalPair> pairs{{split_words("open the file now"), {split_words("open the file now")}},
                                {split_words("close stream"), {split_words("flush buffer")}}};
    expect("cider self-similarity", cider_scores(pairs, options)[0], 10.0, 1e-6);
  }

  const auto doc = nlohmann::json::parse(golden_json);
  const auto pairs = golden_eval_pairs(doc.at("pairs"));
  const auto ciders = cider_scores(pairs, options);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& g = doc["pairs"][i];
    const std::string name = g.at("name").get<std::string>();
    for (int n = 1; n <= 4; ++n) {
      const std::string key = "bleu" + std::to_string(n);
      expect(name + " " + key, bleu({pairs[i]}, n), g.at(key).get<double>(), 1e-6);
    }
    expect(name + " rouge_l", rouge_l({pairs[i]}), g.at("rouge_l").get<double>(), 1e-6);
    expect(name + " meteor", meteor({pairs[i]}, options), g.at("meteor").get<double>(), 1e-6);
    expect(name + " cider", ciders[i], g.at("cider_in_corpus").get<double>(), 1e-6);
  }

  const auto& toy = doc.at("cider_toy");
  const auto toy_scores = cider_scores(golden_eval_pairs(toy.at("pairs")), options);
  for (std::size_t i = 0; i < toy_scores.size(); ++i) {
    expect("cider two-pair corpus " + std::to_string(i), toy_scores[i], toy.at("scores")[i].get<double>(), 1e-9);
  }

  ++count;
  if (report(pairs, options).to_json() != golden_report) problems.push_back("golden report differs");
  if (checks) *checks = count;
  return problems;
}

}  // namespace lamner
