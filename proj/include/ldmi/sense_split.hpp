#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ldmi/errors.hpp"
#include "ldmi/loss_monitor.hpp"
#include "ldmi/model.hpp"
#include "ldmi/numeric.hpp"
#include "ldmi/occurrences.hpp"
#include "ldmi/random.hpp"
#include "ldmi/trainer.hpp"
#include "ldmi/vocab.hpp"

namespace ldmi {

// One composite vector per occurrence to be clustered; rows are dense
// doubles with cached squared norms.
struct Composites {
  int dim = 0;
  std::vector<double> data;
  std::vector<double> norm_sq;

  std::size_t count() const { return norm_sq.size(); }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * std::size_t(dim), std::size_t(dim)};
  }
  void push(std::span<const double> v) {
    data.insert(data.end(), v.begin(), v.end());
    norm_sq.push_back(dot(v, v));
  }
};

// Composite of one occurrence: the mean of the L2-normalized input vectors
// of its context words (sense 0 when a context word is multi-sense; the
// center's own vector does not participate). Zero-norm context vectors are
// skipped and the divisor reduced. Returns false when no context word has a
// nonzero vector, in which case the occurrence is excluded from clustering.
template <typename Real>
bool composite(const SenseModel<Real>& model, const Occurrence& occ, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  int used = 0;
  for (WordId j : occ.context) {
    auto v = model.input(j, 0);
    const double nrm = l2_norm(v);
    if (nrm == 0.0) continue;
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += double(v[c]) / nrm;
    ++used;
  }
  if (used == 0) return false;
  for (double& x : out) x /= double(used);
  return true;
}

// A k-way partition with maintained per-cluster sizes and composite sums;
// the objective is sum_i |s_i|^2 / n_i (empty clusters contribute 0).
class ClusterSolution {
 public:
  ClusterSolution(int k, int dim, std::size_t n)
      : k_(k), dim_(dim), assign_(n, -1), sizes_(std::size_t(k), 0),
        sums_(std::size_t(k) * std::size_t(dim), 0.0), sums_sq_(std::size_t(k), 0.0) {}

  // Random balanced initial assignment, deterministic per seed.
  static ClusterSolution balanced(const Composites& c, int k, std::uint64_t seed) {
    if (k < 1) throw ConfigError("cluster count must be >= 1");
    if (c.count() < std::size_t(k)) throw ConfigError("fewer occurrences than clusters");
    ClusterSolution s(k, c.dim, c.count());
    std::vector<std::uint32_t> idx(c.count());
    std::iota(idx.begin(), idx.end(), 0u);
    auto rng = make_rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t p = 0; p < idx.size(); ++p) s.place(c, idx[p], int(p % std::size_t(k)));
    return s;
  }

  int k() const { return k_; }
  std::size_t total() const { return assign_.size(); }
  int assignment(std::size_t u) const { return assign_[u]; }
  const std::vector<int>& assignments() const { return assign_; }
  std::size_t size(int i) const { return sizes_[std::size_t(i)]; }
  std::span<const double> sum(int i) const {
    return {sums_.data() + std::size_t(i) * std::size_t(dim_), std::size_t(dim_)};
  }

  double objective() const {
    double obj = 0.0;
    for (int i = 0; i < k_; ++i) {
      if (sizes_[std::size_t(i)] > 0) obj += sums_sq_[std::size_t(i)] / double(sizes_[std::size_t(i)]);
    }
    return obj;
  }

  // Objective change if occurrence u moved to cluster `to`; -inf when the
  // move would empty its current cluster.
  double move_delta(const Composites& c, std::size_t u, int to) const {
    const int from = assign_[u];
    if (to == from) return 0.0;
    if (sizes_[std::size_t(from)] <= 1) return -std::numeric_limits<double>::infinity();
    auto cu = c.row(u);
    const double cc = c.norm_sq[u];
    const double nf = double(sizes_[std::size_t(from)]);
    const double nt = double(sizes_[std::size_t(to)]);
    const double from_new = (sums_sq_[std::size_t(from)] - 2.0 * dot(sum(from), cu) + cc) / (nf - 1.0);
    const double to_new = (sums_sq_[std::size_t(to)] + 2.0 * dot(sum(to), cu) + cc) / (nt + 1.0);
    const double from_old = sums_sq_[std::size_t(from)] / nf;
    const double to_old = nt > 0.0 ? sums_sq_[std::size_t(to)] / nt : 0.0;
    return from_new + to_new - from_old - to_old;
  }

  void apply_move(const Composites& c, std::size_t u, int to) {
    const int from = assign_[u];
    auto cu = c.row(u);
    double* sf = sums_.data() + std::size_t(from) * std::size_t(dim_);
    double* st = sums_.data() + std::size_t(to) * std::size_t(dim_);
    for (int d = 0; d < dim_; ++d) {
      sf[d] -= cu[std::size_t(d)];
      st[d] += cu[std::size_t(d)];
    }
    --sizes_[std::size_t(from)];
    ++sizes_[std::size_t(to)];
    assign_[u] = to;
    refresh_sum_sq(from);
    refresh_sum_sq(to);
  }

  // Rebuilds sums from the assignment; used by tests to bound drift.
  void recompute(const Composites& c) {
    std::fill(sums_.begin(), sums_.end(), 0.0);
    std::fill(sizes_.begin(), sizes_.end(), 0);
    for (std::size_t u = 0; u < assign_.size(); ++u) {
      auto cu = c.row(u);
      double* s = sums_.data() + std::size_t(assign_[u]) * std::size_t(dim_);
      for (int d = 0; d < dim_; ++d) s[d] += cu[std::size_t(d)];
      ++sizes_[std::size_t(assign_[u])];
    }
    for (int i = 0; i < k_; ++i) refresh_sum_sq(i);
  }

  void place(const Composites& c, std::size_t u, int to) {
    auto cu = c.row(u);
    double* s = sums_.data() + std::size_t(to) * std::size_t(dim_);
    for (int d = 0; d < dim_; ++d) s[d] += cu[std::size_t(d)];
    ++sizes_[std::size_t(to)];
    assign_[u] = to;
    refresh_sum_sq(to);
  }

  void set_assignment_unchecked(std::size_t u, int to) { assign_[u] = to; }

 private:
  void refresh_sum_sq(int i) {
    sums_sq_[std::size_t(i)] = dot(sum(i), sum(i));
  }

  int k_;
  int dim_;
  std::vector<int> assign_;
  std::vector<std::size_t> sizes_;
  std::vector<double> sums_;
  std::vector<double> sums_sq_;
};

inline double i1_objective(const ClusterSolution& s) { return s.objective(); }

inline constexpr double kMoveEps = 1e-12;

// Greedy incremental refinement: repeated shuffled passes, each occurrence
// moving to the cluster with the best objective gain when that gain exceeds
// kMoveEps. A move that would empty a cluster is forbidden; on an exact tie
// the occurrence stays put. Returns the number of passes run.
inline int greedy_refine(const Composites& c, ClusterSolution& s, int max_passes,
                         std::uint64_t seed) {
  if (c.count() < 2) throw ConfigError("refinement needs at least 2 occurrences");
  auto rng = make_rng(seed);
  std::vector<std::uint32_t> order(c.count());
  std::iota(order.begin(), order.end(), 0u);
  int pass = 0;
  while (pass < max_passes) {
    ++pass;
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t moves = 0;
    for (std::uint32_t u : order) {
      const int from = s.assignment(u);
      int best_to = from;
      double best_delta = kMoveEps;
      for (int to = 0; to < s.k(); ++to) {
        if (to == from) continue;
        const double delta = s.move_delta(c, u, to);
        if (delta > best_delta) {
          best_delta = delta;
          best_to = to;
        }
      }
      if (best_to != from) {
        s.apply_move(c, u, best_to);
        ++moves;
      }
    }
    if (moves == 0) break;
  }
  return pass;
}

// Spherical k-means over the unit-normalized composites: assign to the
// max-cosine centroid, recompute normalized mean centroids, iterate to a
// fixed point or the pass cap. A degenerate (zero) centroid is reseeded from
// the point farthest from its own centroid.
inline ClusterSolution spherical_kmeans(const Composites& c, int k, std::uint64_t seed,
                                        int max_iters = 100) {
  if (k < 2) throw ConfigError("spherical k-means needs k >= 2");
  const std::size_t n = c.count();
  if (n < std::size_t(k)) throw ConfigError("fewer occurrences than clusters");
  const int d = c.dim;

  std::vector<double> unit(n * std::size_t(d), 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    const double nrm = std::sqrt(c.norm_sq[u]);
    if (nrm == 0.0) continue;
    auto row = c.row(u);
    for (int i = 0; i < d; ++i) unit[u * std::size_t(d) + std::size_t(i)] = row[std::size_t(i)] / nrm;
  }
  auto unit_row = [&](std::size_t u) {
    return std::span<const double>(unit.data() + u * std::size_t(d), std::size_t(d));
  };

  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  auto rng = make_rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> centroids(std::size_t(k) * std::size_t(d));
  for (int i = 0; i < k; ++i) {
    auto r = unit_row(idx[std::size_t(i)]);
    std::copy(r.begin(), r.end(), centroids.begin() + std::size_t(i) * std::size_t(d));
  }

  std::vector<int> assign(n, -1);
  std::vector<double> sim(n, 0.0);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::size_t changed = 0;
    for (std::size_t u = 0; u < n; ++u) {
      int best = 0;
      double best_sim = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < k; ++i) {
        std::span<const double> cent(centroids.data() + std::size_t(i) * std::size_t(d),
                                     std::size_t(d));
        const double s = dot(unit_row(u), cent);
        if (s > best_sim) {
          best_sim = s;
          best = i;
        }
      }
      if (assign[u] != best) ++changed;
      assign[u] = best;
      sim[u] = best_sim;
    }

    std::fill(centroids.begin(), centroids.end(), 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      auto r = unit_row(u);
      double* cent = centroids.data() + std::size_t(assign[u]) * std::size_t(d);
      for (int i = 0; i < d; ++i) cent[i] += r[std::size_t(i)];
    }
    bool reseeded = false;
    std::vector<char> used_as_seed(n, 0);
    for (int i = 0; i < k; ++i) {
      double* cent = centroids.data() + std::size_t(i) * std::size_t(d);
      std::span<const double> cs(cent, std::size_t(d));
      const double nrm = l2_norm(cs);
      if (nrm > 0.0) {
        for (int j = 0; j < d; ++j) cent[j] /= nrm;
        continue;
      }
      // farthest point: lowest similarity to its assigned centroid
      std::size_t far = n;
      double far_sim = std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u < n; ++u) {
        if (used_as_seed[u]) continue;
        if (sim[u] < far_sim) {
          far_sim = sim[u];
          far = u;
        }
      }
      if (far == n) throw InvariantError("spherical k-means could not reseed a centroid");
      used_as_seed[far] = 1;
      auto r = unit_row(far);
      std::copy(r.begin(), r.end(), cent);
      reseeded = true;
    }
    if (changed == 0 && !reseeded) break;
  }

  ClusterSolution s(k, d, n);
  for (std::size_t u = 0; u < n; ++u) s.set_assignment_unchecked(u, assign[u]);
  s.recompute(c);
  return s;
}

enum class Clusterer { kI1, kSpherical };

inline const char* clusterer_name(Clusterer c) {
  return c == Clusterer::kI1 ? "i1" : "spherical";
}

inline std::optional<Clusterer> clusterer_from_name(std::string_view name) {
  if (name == "i1") return Clusterer::kI1;
  if (name == "spherical") return Clusterer::kSpherical;
  return std::nullopt;
}

struct SplitOptions {
  int min_cluster_size = 5;        // a split producing a smaller cluster is rejected
  std::size_t sample_cap = 50000;  // cluster a sample, assign the rest by cosine
  int max_passes = 50;
  int restarts = 8;                // i1 descents per split; best objective wins
  double nudge = 0.01;             // child-vector displacement toward its cluster centroid
};

// Best of several seeded balanced-init greedy descents.
inline ClusterSolution cluster_i1(const Composites& comp, int k, const SplitOptions& opt,
                                  std::uint64_t seed) {
  ClusterSolution best(k, comp.dim, comp.count());
  double best_obj = -1.0;
  const int restarts = std::max(1, opt.restarts);
  for (int r = 0; r < restarts; ++r) {
    ClusterSolution s = ClusterSolution::balanced(comp, k, mix_seed(seed, 2, std::uint64_t(r)));
    greedy_refine(comp, s, opt.max_passes, mix_seed(seed, 3, std::uint64_t(r)));
    if (s.objective() > best_obj) {
      best_obj = s.objective();
      best = s;
    }
  }
  return best;
}

struct SplitRecord {
  WordId word;
  int old_sense;
  int new_sense;
  std::size_t n0;
  std::size_t n1;
  double objective;
};

// Partitions the occurrences of (word, sense) into two clusters. Cluster 0
// keeps the existing sense id, cluster 1 gets a fresh one; every affected
// occurrence's label is rewritten. The new sense vector starts at the parent
// vector nudged toward its own cluster's composite centroid; the parent's
// AdaGrad state is copied. On refusal the model and store are untouched and
// the reason is reported through skip_reason.
template <typename Real>
std::optional<SplitRecord> split_word(SenseModel<Real>& model, OccurrenceStore& store, WordId word,
                                      int sense, Clusterer clusterer, const SplitOptions& opt,
                                      std::uint64_t seed, std::string* skip_reason = nullptr) {
  auto refuse = [&](const std::string& why) -> std::optional<SplitRecord> {
    if (skip_reason) *skip_reason = why;
    return std::nullopt;
  };

  std::vector<std::uint32_t> occ_idx;
  for (std::uint32_t i : store.of_center(word)) {
    if (store.sense(i) == sense) occ_idx.push_back(i);
  }
  if (occ_idx.size() < 2 * std::size_t(opt.min_cluster_size)) {
    return refuse("too few occurrences (" + std::to_string(occ_idx.size()) + ")");
  }

  const int d = model.dim();
  std::vector<double> scratch(static_cast<std::size_t>(d));
  std::vector<std::uint32_t> usable;
  usable.reserve(occ_idx.size());
  for (std::uint32_t i : occ_idx) {
    if (composite(model, store.view(i), scratch)) usable.push_back(i);
  }
  if (usable.size() < 2 * std::size_t(opt.min_cluster_size)) {
    return refuse("too few clusterable occurrences (" + std::to_string(usable.size()) + ")");
  }

  // Cluster at most sample_cap occurrences; the remainder is assigned to the
  // nearer cluster sum by cosine afterwards.
  std::vector<std::uint32_t> sample = usable;
  std::vector<std::uint32_t> remainder;
  if (sample.size() > opt.sample_cap) {
    auto rng = make_rng(seed, 1);
    std::shuffle(sample.begin(), sample.end(), rng);
    remainder.assign(sample.begin() + std::ptrdiff_t(opt.sample_cap), sample.end());
    sample.resize(opt.sample_cap);
  }

  Composites comp;
  comp.dim = d;
  comp.data.reserve(sample.size() * std::size_t(d));
  for (std::uint32_t i : sample) {
    composite(model, store.view(i), scratch);
    comp.push(scratch);
  }

  ClusterSolution sol = clusterer == Clusterer::kSpherical
                            ? spherical_kmeans(comp, 2, mix_seed(seed, 2))
                            : cluster_i1(comp, 2, opt, seed);

  std::vector<std::uint32_t> cluster1;
  std::size_t n0 = sol.size(0);
  std::size_t n1 = sol.size(1);
  for (std::size_t u = 0; u < sample.size(); ++u) {
    if (sol.assignment(u) == 1) cluster1.push_back(sample[u]);
  }
  for (std::uint32_t i : remainder) {
    composite(model, store.view(i), scratch);
    const double c0 = cosine(std::span<const double>(scratch), sol.sum(0));
    const double c1 = cosine(std::span<const double>(scratch), sol.sum(1));
    if (c1 > c0) {
      cluster1.push_back(i);
      ++n1;
    } else {
      ++n0;
    }
  }
  if (n0 < std::size_t(opt.min_cluster_size) || n1 < std::size_t(opt.min_cluster_size)) {
    return refuse("degenerate split (" + std::to_string(n0) + "/" + std::to_string(n1) + ")");
  }

  // child = parent + nudge * normalize(centroid1 - centroid0)
  std::vector<double> dir(static_cast<std::size_t>(d));
  for (int c = 0; c < d; ++c) {
    dir[std::size_t(c)] = sol.sum(1)[std::size_t(c)] / double(sol.size(1)) -
                          sol.sum(0)[std::size_t(c)] / double(sol.size(0));
  }
  const double dn = l2_norm(dir);
  auto parent = model.input(word, sense);
  auto parent_grad = model.input_grad(word, sense);
  std::vector<Real> child(parent.begin(), parent.end());
  if (dn > 0.0) {
    for (int c = 0; c < d; ++c) {
      child[std::size_t(c)] = Real(double(parent[std::size_t(c)]) + opt.nudge * dir[std::size_t(c)] / dn);
    }
  }
  std::vector<Real> child_grad(parent_grad.begin(), parent_grad.end());
  const int new_sense = model.add_sense(word, child, child_grad);
  for (std::uint32_t i : cluster1) store.set_sense(i, new_sense);

  return SplitRecord{word, sense, new_sense, n0, n1, sol.objective()};
}

inline void write_split_record(std::ostream& out, const SplitRecord& r, const Vocabulary& vocab) {
  out << vocab.token(r.word) << '\t' << r.old_sense << '\t' << r.new_sense << '\t' << r.n0 << '\t'
      << r.n1 << '\t' << std::setprecision(10) << r.objective << '\n';
}

inline std::uint64_t block_train_seed(std::uint64_t seed, int block) {
  return mix_seed(seed, 0xb10c, std::uint64_t(block));
}

inline std::uint64_t split_seed(std::uint64_t seed, int block, WordId word, int sense) {
  return mix_seed(mix_seed(seed, 0x5b117, std::uint64_t(block)),
                  (std::uint64_t(std::uint32_t(word)) << 8) ^ std::uint64_t(sense));
}

struct LdmiOptions {
  int outer_iters = 3;
  int epochs_per_check = 5;
  CandidateFilter filter{};
  Clusterer clusterer = Clusterer::kI1;
  SplitOptions split{};
  std::uint64_t seed = 1;
  int threads = 1;
};

struct LdmiCallbacks {
  // Ledger of the final epoch before each identification step.
  std::function<void(int iteration, const LossLedger&)> on_identification;
  std::function<void(int iteration, const SplitRecord&)> on_split;
  std::function<void(int iteration, WordId word, int sense, const std::string& reason)> on_skip;
};

// The outer loop: each iteration trains for epochs_per_check passes, gathers
// contextual losses during the final pass, selects candidates, and splits
// each into two sense clusters. After x iterations every word has at most
// 2^x senses.
template <typename Real>
void ldmi_iterate(SenseModel<Real>& model, OccurrenceStore& store, const NegativeSampler& sampler,
                  const Vocabulary& vocab, const LdmiOptions& opt, const LdmiCallbacks& cb = {}) {
  if (opt.outer_iters < 1) throw ConfigError("outer iterations must be >= 1");
  for (int it = 0; it < opt.outer_iters; ++it) {
    LossLedger ledger;
    TrainOptions topt{opt.epochs_per_check, block_train_seed(opt.seed, it), opt.threads};
    const int last_epoch = opt.epochs_per_check - 1;
    train_pass(model, store, sampler, topt, [&](int epoch, const LossLedger& l) {
      if (epoch == last_epoch) ledger = l;
    });
    if (cb.on_identification) cb.on_identification(it, ledger);

    for (const Candidate& cand : select_candidates(ledger, vocab, opt.filter)) {
      std::string reason;
      auto rec = split_word(model, store, cand.word, cand.sense, opt.clusterer, opt.split,
                            split_seed(opt.seed, it, cand.word, cand.sense), &reason);
      if (rec) {
        if (cb.on_split) cb.on_split(it, *rec);
      } else if (cb.on_skip) {
        cb.on_skip(it, cand.word, cand.sense, reason);
      }
    }
  }
}

}  // namespace ldmi
