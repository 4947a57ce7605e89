/* Copyright 2026 The altkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// CTC in log space: the collapse map, forward-backward loss and gradient,
// and incremental prefix scoring for beam search.
//
// The prefix scorer keeps the standard split per frame t:
//   r_nb[t]  log prob that frames 0..t collapse to the prefix and the
//            alignment ends with the prefix's last symbol
//   r_b[t]   same, but the alignment ends with blank
// Extending prefix g by c uses phi[t] = r_b[t] (+ r_nb[t] when c differs
// from g's last symbol), giving
//   r_nb'[t] = (r_nb'[t-1] + phi[t-1]) * p(t, c)
//   r_b'[t]  = (r_nb'[t-1] + r_b'[t-1]) * p(t, blank)
// The running score is the prefix probability (mass of every completion);
// finalizing consumes all T frames and yields the exact sequence
// probability, matching -ctc_loss.

#ifndef ALT_CTC_HPP_
#define ALT_CTC_HPP_

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "alt/array.hpp"
#include "alt/autograd.hpp"
#include "alt/common.hpp"
#include "alt/text.hpp"

namespace alt {

inline double log_add(double a, double b) {
  if (a <= kLogFloor) return b;
  if (b <= kLogFloor) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Merges adjacent duplicates, then removes blanks. Order matters.
inline TokenSequence ctc_collapse(const TokenSequence& alignment, int blank_id) {
  TokenSequence out;
  int prev = -1;
  for (int id : alignment) {
    if (id != prev && id != blank_id) out.push_back(id);
    prev = id;
  }
  return out;
}

// Minimum frame count an alignment of `target` needs: one frame per label
// plus a separating blank between adjacent repeats.
inline int ctc_min_frames(const TokenSequence& target) {
  int n = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

inline bool ctc_feasible(int frames, const TokenSequence& target) {
  return ctc_min_frames(target) <= frames;
}

struct CtcLossResult {
  double loss = 0.0;   // -log P(target | posteriors); +inf when infeasible
  bool feasible = true;
};

namespace detail {

inline void check_ctc_inputs(const Array& logp, const TokenSequence& target, int blank_id) {
  if (logp.rank() != 2) throw ShapeMismatch("ctc: posteriors must be (T, V)");
  int v = logp.shape[1];
  if (blank_id < 0 || blank_id >= v) throw InvalidId("ctc: blank id out of range");
  for (int id : target) {
    if (id < 0 || id >= v) throw InvalidId("ctc: target id " + std::to_string(id));
    if (id == blank_id) throw InvalidExtension("ctc: blank inside a label sequence");
  }
}

// Blank-interleaved target: [b, w1, b, w2, ..., wN, b].
inline std::vector<int> interleave(const TokenSequence& target, int blank_id) {
  std::vector<int> lp(2 * target.size() + 1, blank_id);
  for (std::size_t i = 0; i < target.size(); ++i) lp[2 * i + 1] = target[i];
  return lp;
}

// Forward variables. alpha(t, u) includes the emission at frame t.
inline std::vector<std::vector<double>> ctc_alpha(const Array& logp, const std::vector<int>& lp,
                                                  int blank_id) {
  int t_max = logp.shape[0];
  int u_max = static_cast<int>(lp.size());
  std::vector<std::vector<double>> alpha(t_max, std::vector<double>(u_max, kLogFloor));
  alpha[0][0] = logp.at(0, lp[0]);
  if (u_max > 1) alpha[0][1] = logp.at(0, lp[1]);
  for (int t = 1; t < t_max; ++t) {
    for (int u = 0; u < u_max; ++u) {
      double acc = alpha[t - 1][u];
      if (u > 0) acc = log_add(acc, alpha[t - 1][u - 1]);
      if (u > 1 && lp[u] != blank_id && lp[u] != lp[u - 2])
        acc = log_add(acc, alpha[t - 1][u - 2]);
      alpha[t][u] = acc <= kLogFloor ? kLogFloor : acc + logp.at(t, lp[u]);
    }
  }
  return alpha;
}

// Backward variables, same emission convention as alpha.
inline std::vector<std::vector<double>> ctc_beta(const Array& logp, const std::vector<int>& lp,
                                                 int blank_id) {
  int t_max = logp.shape[0];
  int u_max = static_cast<int>(lp.size());
  std::vector<std::vector<double>> beta(t_max, std::vector<double>(u_max, kLogFloor));
  beta[t_max - 1][u_max - 1] = logp.at(t_max - 1, lp[u_max - 1]);
  if (u_max > 1) beta[t_max - 1][u_max - 2] = logp.at(t_max - 1, lp[u_max - 2]);
  for (int t = t_max - 2; t >= 0; --t) {
    for (int u = 0; u < u_max; ++u) {
      double acc = beta[t + 1][u];
      if (u + 1 < u_max) acc = log_add(acc, beta[t + 1][u + 1]);
      if (u + 2 < u_max && lp[u] != blank_id && lp[u] != lp[u + 2])
        acc = log_add(acc, beta[t + 1][u + 2]);
      beta[t][u] = acc <= kLogFloor ? kLogFloor : acc + logp.at(t, lp[u]);
    }
  }
  return beta;
}

}  // namespace detail

// Eq.-style CTC loss: -log of the total probability of every alignment that
// collapses to `target`, by forward recursion in log space.
inline CtcLossResult ctc_loss(const Array& logp, const TokenSequence& target, int blank_id) {
  detail::check_ctc_inputs(logp, target, blank_id);
  int t_max = logp.shape[0];
  if (t_max < 1) throw ShapeMismatch("ctc_loss: no frames");
  if (!ctc_feasible(t_max, target))
    return {std::numeric_limits<double>::infinity(), false};
  std::vector<int> lp = detail::interleave(target, blank_id);
  auto alpha = detail::ctc_alpha(logp, lp, blank_id);
  int u_max = static_cast<int>(lp.size());
  double logprob = alpha[t_max - 1][u_max - 1];
  if (u_max > 1) logprob = log_add(logprob, alpha[t_max - 1][u_max - 2]);
  if (logprob <= kLogFloor) return {std::numeric_limits<double>::infinity(), false};
  return {-logprob, true};
}

// Gradient of ctc_loss with respect to the log-probability entries,
// treating them as unconstrained (softmax coupling comes from composing
// with log_softmax on the tape).
inline Array ctc_gradient(const Array& logp, const TokenSequence& target, int blank_id) {
  detail::check_ctc_inputs(logp, target, blank_id);
  int t_max = logp.shape[0];
  if (!ctc_feasible(t_max, target))
    throw StateMismatch("ctc_gradient: infeasible target");
  std::vector<int> lp = detail::interleave(target, blank_id);
  auto alpha = detail::ctc_alpha(logp, lp, blank_id);
  auto beta = detail::ctc_beta(logp, lp, blank_id);
  int u_max = static_cast<int>(lp.size());
  double logprob = alpha[t_max - 1][u_max - 1];
  if (u_max > 1) logprob = log_add(logprob, alpha[t_max - 1][u_max - 2]);
  Array grad = Array::zeros(logp.shape);
  for (int t = 0; t < t_max; ++t) {
    // gamma(t, u) = alpha + beta - emission (both include the frame-t term).
    std::vector<double> per_v(logp.shape[1], kLogFloor);
    for (int u = 0; u < u_max; ++u) {
      double gamma = alpha[t][u] + beta[t][u] - logp.at(t, lp[u]);
      if (alpha[t][u] <= kLogFloor || beta[t][u] <= kLogFloor) continue;
      per_v[lp[u]] = log_add(per_v[lp[u]], gamma);
    }
    for (int v = 0; v < logp.shape[1]; ++v) {
      if (per_v[v] <= kLogFloor) continue;
      grad.at(t, v) = -std::exp(per_v[v] - logprob);
    }
  }
  return grad;
}

// Tape operator wrapping ctc_loss; target must be feasible (callers check
// with ctc_feasible and exclude flagged utterances from batch means).
inline Var ctc_loss_op(const Var& logp, const TokenSequence& target, int blank_id) {
  CtcLossResult res = ctc_loss(logp.value(), target, blank_id);
  if (!res.feasible) throw StateMismatch("ctc_loss_op: infeasible target; check ctc_feasible first");
  Tape& t = *logp.tape;
  std::size_t li = logp.idx, oi = t.size();
  return t.apply(Array::scalar(res.loss), [li, oi, target, blank_id](Tape& tp) {
    double g = tp.grad_ref(oi).data[0];
    Array grad = ctc_gradient(tp.value(li), target, blank_id);
    Array& dl = tp.grad_ref(li);
    for (std::size_t i = 0; i < grad.data.size(); ++i) dl.data[i] += g * grad.data[i];
  });
}

// Greedy (best path) decoding: frame-wise argmax, then collapse.
inline TokenSequence ctc_greedy(const Array& logp, int blank_id) {
  if (logp.rank() != 2) throw ShapeMismatch("ctc_greedy: posteriors must be (T, V)");
  TokenSequence path(logp.shape[0]);
  for (int t = 0; t < logp.shape[0]; ++t) {
    int best = 0;
    for (int v = 1; v < logp.shape[1]; ++v)
      if (logp.at(t, v) > logp.at(t, best)) best = v;
    path[t] = best;
  }
  return ctc_collapse(path, blank_id);
}

// ---------------------------------------------------------------------------
// Incremental prefix scoring
// ---------------------------------------------------------------------------

struct CtcPrefixState {
  std::vector<double> r_nb;  // per frame, ends-with-label mass (log)
  std::vector<double> r_b;   // per frame, ends-with-blank mass (log)
  int last_token = -1;       // -1 for the empty prefix
  double prefix_score = 0.0; // log prefix probability of the current prefix
};

// State for the empty prefix over all frames.
inline CtcPrefixState ctc_prefix_init(const Array& logp, int blank_id) {
  if (logp.rank() != 2) throw ShapeMismatch("ctc_prefix_init: posteriors must be (T, V)");
  int t_max = logp.shape[0];
  CtcPrefixState s;
  s.r_nb.assign(t_max, kLogFloor);
  s.r_b.assign(t_max, 0.0);
  double acc = 0.0;
  for (int t = 0; t < t_max; ++t) {
    acc += logp.at(t, blank_id);
    s.r_b[t] = acc;
  }
  s.last_token = -1;
  s.prefix_score = 0.0;  // every complete string extends the empty prefix
  return s;
}

// Extends the prefix by one non-blank token. Returns the new state; its
// prefix_score is the log probability that the emitted string starts with
// the extended prefix.
inline CtcPrefixState ctc_prefix_extend(const Array& logp, int blank_id,
                                        const CtcPrefixState& state, int token) {
  int t_max = logp.shape[0];
  if (static_cast<int>(state.r_b.size()) != t_max)
    throw StateMismatch("ctc_prefix_extend: state built over different posteriors");
  if (token == blank_id) throw InvalidExtension("ctc_prefix_extend: blank as a label");
  if (token < 0 || token >= logp.shape[1])
    throw InvalidId("ctc_prefix_extend: token " + std::to_string(token));
  CtcPrefixState out;
  out.r_nb.assign(t_max, kLogFloor);
  out.r_b.assign(t_max, kLogFloor);
  out.last_token = token;
  bool parent_empty = state.last_token < 0;
  double psi = kLogFloor;
  double prev_nb = kLogFloor, prev_b = kLogFloor;
  for (int t = 0; t < t_max; ++t) {
    // Mass of the parent prefix at t-1 able to start this token at t.
    double phi_prev;
    if (t == 0) {
      phi_prev = parent_empty ? 0.0 : kLogFloor;
    } else {
      phi_prev = state.r_b[t - 1];
      if (token != state.last_token) phi_prev = log_add(phi_prev, state.r_nb[t - 1]);
    }
    double emit = logp.at(t, token);
    double nb = log_add(prev_nb, phi_prev);
    nb = nb <= kLogFloor ? kLogFloor : nb + emit;
    double b = log_add(prev_nb, prev_b);
    b = b <= kLogFloor ? kLogFloor : b + logp.at(t, blank_id);
    out.r_nb[t] = nb;
    out.r_b[t] = b;
    if (phi_prev > kLogFloor) psi = log_add(psi, phi_prev + emit);
    prev_nb = nb;
    prev_b = b;
  }
  out.prefix_score = psi;
  return out;
}

// Sequence probability of the prefix consuming all frames; equals
// -ctc_loss(logp, prefix) for the same posteriors.
inline double ctc_prefix_finalize(const Array& logp, const CtcPrefixState& state) {
  if (static_cast<int>(state.r_b.size()) != logp.shape[0])
    throw StateMismatch("ctc_prefix_finalize: state built over different posteriors");
  int t_last = logp.shape[0] - 1;
  return log_add(state.r_nb[t_last], state.r_b[t_last]);
}

}  // namespace alt

#endif  // ALT_CTC_HPP_
