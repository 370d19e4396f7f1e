#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ldmi/errors.hpp"
#include "ldmi/loss_monitor.hpp"
#include "ldmi/model.hpp"
#include "ldmi/numeric.hpp"
#include "ldmi/occurrences.hpp"
#include "ldmi/random.hpp"
#include "ldmi/sampler.hpp"

namespace ldmi {

inline constexpr double kAdagradEps = 1e-8;

// Full skip-gram negative-sampling loss of one occurrence:
//   -sum_j log sigmoid(<w, c_j>) - sum_k log sigmoid(-<w, c_k>)
// where w is the center's sense-labeled input vector, j runs over the
// context and k over the supplied negatives.
template <typename Real>
double occurrence_loss(const SenseModel<Real>& model, const Occurrence& occ,
                       std::span<const WordId> negatives) {
  auto w = model.input(occ.center, occ.sense);
  double loss = 0.0;
  for (WordId j : occ.context) loss -= log_sigmoid(dot(w, model.context(j)));
  for (WordId k : negatives) loss -= log_sigmoid(-dot(w, model.context(k)));
  return loss;
}

// Scratch space reused across sgd_step calls; one per training thread.
struct TrainWorkspace {
  std::vector<double> center_grad;
  std::vector<WordId> touched;               // context-side words with gradients
  std::vector<double> touched_grad;          // |touched| x dim
  std::unordered_map<WordId, int> touched_slot;
  std::vector<WordId> drawn;                 // all negatives drawn this step
  bool record_full_loss = false;             // also evaluate the full step loss
  double last_full_loss = 0.0;
};

namespace detail {

// Accumulates the gradient of the full occurrence loss, evaluated at the
// current parameters, into per-vector buffers. Duplicate words (repeated
// context members, repeated negative draws) fold into one buffer slot.
template <typename Real>
double accumulate_gradients(const SenseModel<Real>& model, const Occurrence& occ,
                            std::span<const WordId> negatives, TrainWorkspace& ws) {
  const int d = model.dim();
  auto w = model.input(occ.center, occ.sense);
  ws.center_grad.assign(std::size_t(d), 0.0);
  ws.touched.clear();
  ws.touched_grad.clear();
  ws.touched_slot.clear();
  ws.last_full_loss = 0.0;

  auto slot_of = [&](WordId id) {
    auto [it, inserted] = ws.touched_slot.try_emplace(id, int(ws.touched.size()));
    if (inserted) {
      ws.touched.push_back(id);
      ws.touched_grad.resize(ws.touched.size() * std::size_t(d), 0.0);
    }
    return it->second;
  };

  double positive_logloss = 0.0;
  for (WordId j : occ.context) {
    auto cj = model.context(j);
    const double s = dot(w, cj);
    const double logsig = log_sigmoid(s);
    positive_logloss -= logsig;
    if (ws.record_full_loss) ws.last_full_loss -= logsig;
    const double g = sigmoid(s) - 1.0;  // d/ds of -log sigmoid(s)
    const int slot = slot_of(j);  // may grow touched_grad; take data() after
    double* gw = ws.center_grad.data();
    double* gj = ws.touched_grad.data() + std::size_t(slot) * std::size_t(d);
    for (int c = 0; c < d; ++c) {
      gw[c] += g * double(cj[std::size_t(c)]);
      gj[c] += g * double(w[std::size_t(c)]);
    }
  }
  for (WordId k : negatives) {
    auto ck = model.context(k);
    const double s = dot(w, ck);
    if (ws.record_full_loss) ws.last_full_loss -= log_sigmoid(-s);
    const double g = sigmoid(s);  // d/ds of -log sigmoid(-s)
    const int slot = slot_of(k);
    double* gw = ws.center_grad.data();
    double* gk = ws.touched_grad.data() + std::size_t(slot) * std::size_t(d);
    for (int c = 0; c < d; ++c) {
      gw[c] += g * double(ck[std::size_t(c)]);
      gk[c] += g * double(w[std::size_t(c)]);
    }
  }
  return occ.context.empty() ? 0.0 : positive_logloss / double(occ.context.size());
}

template <typename Real>
void adagrad_apply(std::span<Real> vec, std::span<Real> acc, const double* grad, int d, double lr) {
  for (int c = 0; c < d; ++c) {
    const double g = grad[c];
    const double a = double(acc[std::size_t(c)]) + g * g;
    acc[std::size_t(c)] = Real(a);
    vec[std::size_t(c)] = Real(double(vec[std::size_t(c)]) - lr * g / std::sqrt(a + kAdagradEps));
  }
}

}  // namespace detail

// Gradients of the full occurrence loss with respect to the labeled sense
// vector and every touched context vector, at the current parameters.
struct OccurrenceGradients {
  std::vector<double> center;
  std::vector<std::pair<WordId, std::vector<double>>> context;
};

template <typename Real>
OccurrenceGradients occurrence_gradients(const SenseModel<Real>& model, const Occurrence& occ,
                                         std::span<const WordId> negatives) {
  TrainWorkspace ws;
  detail::accumulate_gradients(model, occ, negatives, ws);
  OccurrenceGradients out;
  out.center = ws.center_grad;
  const int d = model.dim();
  for (std::size_t t = 0; t < ws.touched.size(); ++t) {
    const double* g = ws.touched_grad.data() + t * std::size_t(d);
    out.context.emplace_back(ws.touched[t], std::vector<double>(g, g + d));
  }
  return out;
}

// One AdaGrad step on one occurrence. Negatives are drawn per positive pair
// (sampler.per_target() each), the full-loss gradient is evaluated at the
// visit-time parameters and then applied. Only the labeled sense vector and
// the touched context vectors change. Returns the contextual loss at visit
// time, for the loss ledger.
template <typename Real>
double sgd_step(SenseModel<Real>& model, const Occurrence& occ, const NegativeSampler& sampler,
                std::mt19937_64& rng, TrainWorkspace& ws) {
  ws.drawn.clear();
  for (std::size_t j = 0; j < occ.context.size(); ++j) {
    sampler.draw_excluding(occ, rng, ws.drawn);
  }
  const double ctx_loss = detail::accumulate_gradients(model, occ, ws.drawn, ws);

  const int d = model.dim();
  const double lr = double(model.initial_lr());
  detail::adagrad_apply(model.input(occ.center, occ.sense), model.input_grad(occ.center, occ.sense),
                        ws.center_grad.data(), d, lr);
  for (std::size_t t = 0; t < ws.touched.size(); ++t) {
    const WordId id = ws.touched[t];
    detail::adagrad_apply(model.context(id), model.context_grad(id),
                          ws.touched_grad.data() + t * std::size_t(d), d, lr);
  }
  return ctx_loss;
}

struct TrainOptions {
  int epochs = 1;
  std::uint64_t seed = 1;
  int threads = 1;
};

// Applies sgd_step to every occurrence, epochs times, in a shuffled order
// that is deterministic given the seed. With threads > 1 the shards update
// the model lock-free (hogwild); threads == 1 is the exact sequential mode.
// on_epoch, when set, receives each epoch's contextual-loss ledger.
template <typename Real>
void train_pass(SenseModel<Real>& model, const OccurrenceStore& store,
                const NegativeSampler& sampler, const TrainOptions& opt,
                const std::function<void(int, const LossLedger&)>& on_epoch = {}) {
  if (opt.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (opt.threads < 1) throw ConfigError("threads must be >= 1");

  const std::size_t n = store.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  const auto sense_counts = model.sense_counts();

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    auto shuffle_rng = make_rng(opt.seed, 2 * std::uint64_t(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    const int shards = int(std::min(std::size_t(opt.threads), std::max<std::size_t>(n, 1)));
    std::vector<LossLedger> ledgers(static_cast<std::size_t>(shards), LossLedger{sense_counts});

    auto run_shard = [&](int shard) {
      const std::size_t lo = n * std::size_t(shard) / std::size_t(shards);
      const std::size_t hi = n * std::size_t(shard + 1) / std::size_t(shards);
      auto rng = make_rng(opt.seed, mix_seed(2 * std::uint64_t(epoch) + 1, std::uint64_t(shard)));
      TrainWorkspace ws;
      LossLedger& ledger = ledgers[std::size_t(shard)];
      for (std::size_t i = lo; i < hi; ++i) {
        const std::uint32_t idx = order[i];
        const double loss = sgd_step(model, store.view(idx), sampler, rng, ws);
        ledger.accumulate(store.center(idx), store.sense(idx), loss);
      }
    };

    if (shards == 1) {
      run_shard(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(std::size_t(shards));
      for (int t = 0; t < shards; ++t) pool.emplace_back(run_shard, t);
      for (auto& t : pool) t.join();
      for (int t = 1; t < shards; ++t) ledgers[0].merge(ledgers[std::size_t(t)]);
    }
    if (on_epoch) on_epoch(epoch, ledgers[0]);
  }
}

}  // namespace ldmi
