// Copyright 2026 The HRA Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hra_lab/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "hra_lab/errors.hpp"

namespace hra_lab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kBruteForceCap = 1e6;

void check_instance(const Tensor& log_probs, std::span<const int> labels) {
  if (log_probs.rank() != 2 || log_probs.cols() < 2) {
    throw DimensionError("CTC log-probs must be T×(V+1) with V >= 1, got " +
                         shape_string(log_probs.shape()));
  }
  if (labels.empty()) throw ContractError("CTC needs at least one label");
  const int vocab = static_cast<int>(log_probs.cols()) - 1;
  for (int l : labels) {
    if (l < 0 || l >= vocab) {
      throw ContractError("CTC label " + std::to_string(l) + " outside [0, " +
                          std::to_string(vocab) + ")");
    }
  }
}

// Extended sequence: blank, l1, blank, l2, ..., lS, blank.
std::vector<int> extend(std::span<const int> labels, int blank) {
  std::vector<int> ext(2 * labels.size() + 1, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  return ext;
}

// Whether state s may be entered from s-2 (skipping the blank between).
bool can_skip(const std::vector<int>& ext, std::size_t s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

}  // namespace

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

std::size_t ctc_min_frames(std::span<const int> labels) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < labels.size(); ++i) repeats += labels[i] == labels[i - 1];
  return labels.size() + repeats;
}

CtcResult ctc_loss(const Tensor& log_probs, std::span<const int> labels) {
  check_instance(log_probs, labels);
  const std::size_t T = log_probs.rows();
  const int blank = static_cast<int>(log_probs.cols()) - 1;
  if (T < ctc_min_frames(labels)) {
    return {std::numeric_limits<double>::infinity(), Tensor(log_probs.shape()), false};
  }
  const std::vector<int> ext = extend(labels, blank);
  const std::size_t S = ext.size();

  std::vector<double> alpha(T * S, kNegInf), beta(T * S, kNegInf);
  auto a = [&](std::size_t t, std::size_t s) -> double& { return alpha[t * S + s]; };
  auto b = [&](std::size_t t, std::size_t s) -> double& { return beta[t * S + s]; };
  auto lp = [&](std::size_t t, std::size_t s) { return log_probs.at(t, ext[s]); };

  a(0, 0) = lp(0, 0);
  a(0, 1) = lp(0, 1);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = a(t - 1, s);
      if (s >= 1) acc = log_sum_exp(acc, a(t - 1, s - 1));
      if (can_skip(ext, s, blank)) acc = log_sum_exp(acc, a(t - 1, s - 2));
      if (acc != kNegInf) a(t, s) = acc + lp(t, s);
    }
  }
  b(T - 1, S - 1) = lp(T - 1, S - 1);
  b(T - 1, S - 2) = lp(T - 1, S - 2);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = b(t + 1, s);
      if (s + 1 < S) acc = log_sum_exp(acc, b(t + 1, s + 1));
      if (s + 2 < S && can_skip(ext, s + 2, blank)) acc = log_sum_exp(acc, b(t + 1, s + 2));
      if (acc != kNegInf) b(t, s) = acc + lp(t, s);
    }
  }
  const double log_total = log_sum_exp(a(T - 1, S - 1), a(T - 1, S - 2));
  if (log_total == kNegInf) {
    return {std::numeric_limits<double>::infinity(), Tensor(log_probs.shape()), false};
  }

  // alpha_t(s)·beta_t(s) counts the emission at t twice; dividing it out
  // gives the mass of paths through (t, s).
  Tensor grad(log_probs.shape());
  const std::size_t K = log_probs.cols();
  std::vector<double> occupancy(K);
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < S; ++s) {
      const double v = a(t, s) + b(t, s) - lp(t, s);
      if (a(t, s) != kNegInf && b(t, s) != kNegInf) {
        occupancy[ext[s]] = log_sum_exp(occupancy[ext[s]], v);
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      grad.at(t, k) = occupancy[k] == kNegInf ? 0.0 : -std::exp(occupancy[k] - log_total);
    }
  }
  return {-log_total, std::move(grad), true};
}

double ctc_brute_force(const Tensor& log_probs, std::span<const int> labels) {
  check_instance(log_probs, labels);
  const std::size_t T = log_probs.rows();
  const std::size_t K = log_probs.cols();
  const int blank = static_cast<int>(K) - 1;
  if (std::pow(static_cast<double>(K), static_cast<double>(T)) > kBruteForceCap) {
    throw ContractError("ctc_brute_force: (V+1)^T exceeds 10^6");
  }
  std::vector<int> path(T, 0);
  std::vector<int> collapsed;
  double log_total = kNegInf;
  while (true) {
    collapsed.clear();
    int prev = -1;
    for (int sym : path) {
      if (sym != prev && sym != blank) collapsed.push_back(sym);
      prev = sym;
    }
    if (std::equal(collapsed.begin(), collapsed.end(), labels.begin(), labels.end())) {
      double lp = 0.0;
      for (std::size_t t = 0; t < T; ++t) lp += log_probs.at(t, path[t]);
      log_total = log_sum_exp(log_total, lp);
    }
    // Odometer increment over base K.
    std::size_t pos = 0;
    while (pos < T && ++path[pos] == static_cast<int>(K)) path[pos++] = 0;
    if (pos == T) break;
  }
  return log_total == kNegInf ? std::numeric_limits<double>::infinity() : -log_total;
}

NodeId ctc_loss(Graph& g, NodeId log_probs, std::span<const int> labels) {
  CtcResult r = ctc_loss(g.value(log_probs), labels);
  if (!r.feasible) {
    throw ContractError("CTC instance is infeasible: " + std::to_string(g.value(log_probs).rows()) +
                        " frames cannot emit " + std::to_string(labels.size()) + " labels");
  }
  Tensor grad = std::move(r.grad);
  return g.custom({log_probs}, Tensor::scalar(r.loss),
                  [grad = std::move(grad)](const Graph&, NodeId, const Tensor& g_out) {
                    return std::vector<Tensor>{scale(grad, g_out.item())};
                  });
}

NodeId ctc_loss_taped(Graph& g, NodeId log_probs, std::span<const int> labels) {
  const Tensor& lpv = g.value(log_probs);
  check_instance(lpv, labels);
  const std::size_t T = lpv.rows();
  const std::size_t K = lpv.cols();
  const int blank = static_cast<int>(K) - 1;
  if (T < ctc_min_frames(labels)) throw ContractError("CTC instance is infeasible");
  const std::vector<int> ext = extend(labels, blank);
  const std::size_t S = ext.size();

  // Unreachable states are absent (nullopt) instead of holding -inf.
  std::vector<std::optional<NodeId>> prev(S), cur(S);
  auto emit = [&](std::size_t t, std::size_t s) { return g.pick(log_probs, t * K + ext[s]); };
  prev[0] = emit(0, 0);
  prev[1] = emit(0, 1);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<NodeId> terms;
      if (prev[s]) terms.push_back(*prev[s]);
      if (s >= 1 && prev[s - 1]) terms.push_back(*prev[s - 1]);
      if (can_skip(ext, s, blank) && prev[s - 2]) terms.push_back(*prev[s - 2]);
      cur[s] = terms.empty() ? std::nullopt
                             : std::optional<NodeId>(g.add(g.logsumexp(terms), emit(t, s)));
    }
    std::swap(prev, cur);
  }
  std::vector<NodeId> finals;
  if (prev[S - 1]) finals.push_back(*prev[S - 1]);
  if (prev[S - 2]) finals.push_back(*prev[S - 2]);
  return g.scale(g.logsumexp(finals), -1.0);
}

std::vector<int> greedy_decode(const Tensor& log_probs) {
  const std::size_t K = log_probs.cols();
  const int blank = static_cast<int>(K) - 1;
  std::vector<int> out;
  int prev = -1;
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    int best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (log_probs.at(t, k) > log_probs.at(t, best)) best = static_cast<int>(k);
    }
    if (best != prev && best != blank) out.push_back(best);
    prev = best;
  }
  return out;
}

std::size_t edit_distance(std::span<const int> a, std::span<const int> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

}  // namespace hra_lab
