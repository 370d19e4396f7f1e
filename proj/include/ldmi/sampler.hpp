#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ldmi/errors.hpp"
#include "ldmi/occurrences.hpp"
#include "ldmi/vocab.hpp"

namespace ldmi {

// Frequency^alpha negative sampler over a cumulative table, so sampling
// probabilities are exactly proportional to frequency^alpha.
class NegativeSampler {
 public:
  NegativeSampler(const Vocabulary& vocab, int per_target, double alpha = 0.75)
      : per_target_(per_target) {
    if (per_target < 0) throw ConfigError("negatives per target must be >= 0");
    if (vocab.size() == 0) throw ConfigError("cannot sample from an empty vocabulary");
    cum_.reserve(std::size_t(vocab.size()));
    double running = 0.0;
    for (WordId w = 0; w < vocab.size(); ++w) {
      running += std::pow(double(vocab.frequency(w)), alpha);
      cum_.push_back(running);
    }
  }

  int per_target() const { return per_target_; }

  WordId draw(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, cum_.back());
    auto it = std::upper_bound(cum_.begin(), cum_.end(), u(rng));
    if (it == cum_.end()) --it;
    return WordId(it - cum_.begin());
  }

  // Appends up to per_target() negatives for one positive pair. Draws equal
  // to the center or any context member are rejected; a slot whose retries
  // are exhausted (tiny vocabularies) is dropped.
  void draw_excluding(const Occurrence& occ, std::mt19937_64& rng,
                      std::vector<WordId>& out) const {
    for (int k = 0; k < per_target_; ++k) {
      for (int attempt = 0; attempt < 16; ++attempt) {
        WordId n = draw(rng);
        if (n == occ.center) continue;
        if (std::find(occ.context.begin(), occ.context.end(), n) != occ.context.end()) continue;
        out.push_back(n);
        break;
      }
    }
  }

 private:
  std::vector<double> cum_;
  int per_target_;
};

}  // namespace ldmi
