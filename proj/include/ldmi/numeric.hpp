#pragma once

#include <cmath>
#include <cstddef>

namespace ldmi {

// Numerically stable logistic function.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

template <typename A, typename B>
double dot(const A& a, const B& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::size_t(a.size()); ++i) {
    s += double(a[i]) * double(b[i]);
  }
  return s;
}

template <typename A>
double l2_norm(const A& a) {
  return std::sqrt(dot(a, a));
}

// Cosine similarity; zero vectors compare as 0.
template <typename A, typename B>
double cosine(const A& a, const B& b) {
  double na = l2_norm(a);
  double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace ldmi
