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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "alt/array.hpp"
#include "alt/autograd.hpp"
#include "alt/optim.hpp"
#include "alt/rng.hpp"
#include "test_util.hpp"

namespace {

using alt::Array;
using alt::Rng;
using alt::Tape;
using alt::Var;
using alt_test::check_gradients;
using alt_test::random_array;

TEST(Array, ShapeChecks) {
  Array a = Array::zeros({2, 3});
  EXPECT_EQ(a.numel(), 6u);
  EXPECT_THROW(Array({2, 3}, {1.0}), alt::ShapeMismatch);
  a.at(1, 2) = 5.0;
  EXPECT_DOUBLE_EQ(a.data[5], 5.0);
}

TEST(Rng, DeterministicAndSplittable) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng c(42);
  Rng child = c.split(7);
  Rng child2 = c.split(7);
  EXPECT_EQ(child.next_u64(), child2.next_u64());
  // Splitting does not advance the parent.
  Rng d(42);
  EXPECT_EQ(c.next_u64(), d.next_u64());
}

TEST(Ops, LogSumExpOfTwoZeros) {
  Tape t;
  Var x = t.leaf(Array::vec({0.0, 0.0}));
  EXPECT_NEAR(alt::logsumexp(x).value().data[0], std::log(2.0), 1e-12);
}

TEST(Ops, SoftmaxOfConstantVector) {
  Tape t;
  Var x = t.leaf(Array::vec({1.7, 1.7, 1.7, 1.7}));
  Array y = alt::softmax(x).value();
  for (double v : y.data) EXPECT_NEAR(v, 0.25, 1e-12);
}

TEST(Ops, LogSoftmaxRowsNormalize) {
  Rng rng(3);
  Tape t;
  Var x = t.leaf(random_array({5, 7}, rng, -4.0, 4.0));
  Array y = alt::log_softmax(x).value();
  for (int r = 0; r < 5; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 7; ++c) acc += std::exp(y.at(r, c));
    EXPECT_NEAR(std::log(acc), 0.0, 1e-10);
  }
}

// Naive direct-summation convolution, the independent oracle for conv1d.
Array conv1d_naive(const Array& x, const Array& w, const Array& b, int stride, int pad) {
  int cin = x.shape[0], len = x.shape[1];
  int cout = w.shape[0], k = w.shape[2];
  int lout = (len + 2 * pad - k) / stride + 1;
  Array out = Array::zeros({cout, lout});
  for (int co = 0; co < cout; ++co)
    for (int t = 0; t < lout; ++t) {
      double acc = b.at(co);
      for (int ci = 0; ci < cin; ++ci)
        for (int kk = 0; kk < k; ++kk) {
          int src = t * stride + kk - pad;
          if (src >= 0 && src < len)
            acc += w.data[(static_cast<std::size_t>(co) * cin + ci) * k + kk] * x.at(ci, src);
        }
      out.at(co, t) = acc;
    }
  return out;
}

TEST(Ops, Conv1dMatchesNaiveOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    int cin = 1 + static_cast<int>(rng.uniform_int(3));
    int cout = 1 + static_cast<int>(rng.uniform_int(4));
    int k = 1 + static_cast<int>(rng.uniform_int(4));
    int stride = 1 + static_cast<int>(rng.uniform_int(3));
    int pad = static_cast<int>(rng.uniform_int(3));
    int len = k + static_cast<int>(rng.uniform_int(20));
    Array x = random_array({cin, len}, rng);
    Array w = random_array({cout, cin, k}, rng);
    Array b = random_array({cout}, rng);
    Tape t;
    Array got = alt::conv1d(t.leaf(x), t.leaf(w), t.leaf(b), stride, pad).value();
    Array want = conv1d_naive(x, w, b, stride, pad);
    ASSERT_EQ(got.shape, want.shape);
    int lout = (len + 2 * pad - k) / stride + 1;
    ASSERT_EQ(got.shape[1], lout);
    for (std::size_t i = 0; i < got.data.size(); ++i)
      EXPECT_NEAR(got.data[i], want.data[i], 1e-12);
  }
}

TEST(Backward, SumGivesOnes) {
  Tape t;
  Var w = t.leaf(Array::vec({1.0, -2.0, 3.0}));
  t.backward(alt::sum(w));
  for (double g : w.grad().data) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Backward, HalfDotSelfGivesSelf) {
  Tape t;
  Array a0 = Array::vec({0.5, -1.5, 2.0, 0.25});
  Var a = t.leaf(a0);
  t.backward(alt::scale(alt::dot(a, a), 0.5));
  for (std::size_t i = 0; i < a0.data.size(); ++i) EXPECT_NEAR(a.grad().data[i], a0.data[i], 1e-12);
}

TEST(Backward, SharedSubexpressionAccumulates) {
  Tape t;
  Var x = t.leaf(Array::scalar(3.0));
  t.backward(alt::add(x, x));
  EXPECT_DOUBLE_EQ(x.grad().data[0], 2.0);
}

TEST(Backward, NonScalarRootThrows) {
  Tape t;
  Var x = t.leaf(Array::vec({1.0, 2.0}));
  EXPECT_THROW(t.backward(x), alt::NonScalarRoot);
}

// Every operator in the core set, finite-difference checked at 10 random
// points each.
TEST(GradCheck, CoreOperatorSet) {
  Rng rng(1234);
  struct Case {
    const char* name;
    std::function<void(Rng&)> run;
  };

  auto check = [](const std::vector<Array>& inputs, alt_test::ScalarGraph g, const char* name) {
    auto res = check_gradients(inputs, g);
    EXPECT_TRUE(res.ok) << name << ": " << res.detail;
  };

  for (int point = 0; point < 10; ++point) {
    Rng r = rng.split(point);
    // matmul, three shape signatures
    {
      Array a = random_array({3, 4}, r), b = random_array({4, 2}, r);
      Array w = random_array({3, 2}, r);
      check({a, b},
            [w](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::matmul(v[0], v[1]), t.leaf(w)));
            },
            "matmul(2,2)");
      Array av = random_array({4}, r);
      Array wv = random_array({2}, r);
      check({av, b},
            [wv](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::matmul(v[0], v[1]), t.leaf(wv)));
            },
            "matmul(1,2)");
      Array bv = random_array({4}, r);
      Array wm = random_array({3}, r);
      check({a, bv},
            [wm](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::matmul(v[0], v[1]), t.leaf(wm)));
            },
            "matmul(2,1)");
    }
    // elementwise binary, same shape and row broadcast
    {
      Array a = random_array({3, 4}, r), b = random_array({3, 4}, r);
      Array bias = random_array({4}, r);
      Array w = random_array({3, 4}, r);
      auto proj = [w](Tape& t, Var x) { return alt::sum(alt::mul(x, t.leaf(w))); };
      check({a, b}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::add(v[0], v[1])); }, "add");
      check({a, b}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::sub(v[0], v[1])); }, "sub");
      check({a, b}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::mul(v[0], v[1])); }, "mul");
      Array bpos = random_array({3, 4}, r, 0.5, 2.0);
      check({a, bpos}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::divide(v[0], v[1])); }, "divide");
      check({a, bias}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::add(v[0], v[1])); }, "add bcast");
      check({a, bias}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::mul(v[0], v[1])); }, "mul bcast");
      check({a}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::scale(v[0], -1.7)); }, "scale");
    }
    // unary maps
    {
      Array x = random_array({2, 5}, r, -2.0, 2.0);
      Array w = random_array({2, 5}, r);
      auto proj = [w](Tape& t, Var y) { return alt::sum(alt::mul(y, t.leaf(w))); };
      check({x}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::tanh_op(v[0])); }, "tanh");
      check({x}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::sigmoid(v[0])); }, "sigmoid");
      check({x}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::gelu(v[0])); }, "gelu");
      check({x}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::leaky_relu(v[0], 0.1)); }, "leaky_relu");
      check({x}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::exp_op(v[0])); }, "exp");
      Array xp = random_array({2, 5}, r, 0.1, 3.0);
      check({xp}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::log_op(v[0])); }, "log");
      check({xp}, [&](Tape& t, const std::vector<Var>& v) { return proj(t, alt::sqrt_op(v[0])); }, "sqrt");
    }
    // softmax family
    {
      Array x = random_array({3, 5}, r, -3.0, 3.0);
      Array w = random_array({3, 5}, r);
      Array wv = random_array({3}, r);
      check({x},
            [w](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::softmax(v[0]), t.leaf(w)));
            },
            "softmax");
      check({x},
            [w](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::log_softmax(v[0]), t.leaf(w)));
            },
            "log_softmax");
      check({x},
            [wv](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::logsumexp(v[0]), t.leaf(wv)));
            },
            "logsumexp");
    }
    // layer_norm
    {
      Array x = random_array({3, 6}, r, -2.0, 2.0);
      Array gain = random_array({6}, r, 0.5, 1.5);
      Array bias = random_array({6}, r);
      Array w = random_array({3, 6}, r);
      check({x, gain, bias},
            [w](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::layer_norm(v[0], v[1], v[2]), t.leaf(w)));
            },
            "layer_norm");
    }
    // conv1d
    {
      Array x = random_array({2, 9}, r);
      Array w = random_array({3, 2, 3}, r);
      Array b = random_array({3}, r);
      Array proj = random_array({3, 4}, r);  // lout = (9-3)/2+1 = 4
      check({x, w, b},
            [proj](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::conv1d(v[0], v[1], v[2], 2, 0), t.leaf(proj)));
            },
            "conv1d");
      Array proj_pad = random_array({3, 11}, r);  // pad 2: lout = (9+4-3)/1+1 = 11
      check({x, w, b},
            [proj_pad](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::conv1d(v[0], v[1], v[2], 1, 2), t.leaf(proj_pad)));
            },
            "conv1d pad");
    }
    // shape ops
    {
      Array x = random_array({4, 3}, r);
      Array w = random_array({3, 4}, r);
      check({x},
            [w](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::transpose(v[0]), t.leaf(w)));
            },
            "transpose");
      Array w2 = random_array({2, 3}, r);
      check({x},
            [w2](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::slice(v[0], 0, 1, 3), t.leaf(w2)));
            },
            "slice rows");
      Array w3 = random_array({4, 2}, r);
      check({x},
            [w3](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::slice(v[0], 1, 0, 2), t.leaf(w3)));
            },
            "slice cols");
      Array y = random_array({4, 3}, r);
      Array wc = random_array({8, 3}, r);
      check({x, y},
            [wc](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::concat({v[0], v[1]}, 0), t.leaf(wc)));
            },
            "concat rows");
      Array w4 = random_array({12}, r);
      check({x},
            [w4](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::reshape(v[0], {12}), t.leaf(w4)));
            },
            "reshape");
    }
    // reductions
    {
      Array x = random_array({3, 3}, r);
      check({x}, [](Tape&, const std::vector<Var>& v) { return alt::sum(v[0]); }, "sum");
      check({x}, [](Tape&, const std::vector<Var>& v) { return alt::mean(v[0]); }, "mean");
    }
    // embedding + mask_rows
    {
      Array table = random_array({5, 3}, r);
      std::vector<int> ids = {1, 4, 1, 0};
      Array w = random_array({4, 3}, r);
      check({table},
            [w, ids](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::embedding_lookup(v[0], ids), t.leaf(w)));
            },
            "embedding_lookup");
      Array z = random_array({4, 3}, r);
      Array emb = random_array({3}, r);
      std::vector<bool> mask = {true, false, false, true};
      check({z, emb},
            [w, mask](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::mask_rows(v[0], mask, v[1]), t.leaf(w)));
            },
            "mask_rows");
    }
    // recurrent cells as whole operators
    {
      int in = 3, hd = 4;
      Array x = random_array({in}, r), h = random_array({hd}, r);
      Array wx = random_array({in, 3 * hd}, r, -0.5, 0.5);
      Array wh = random_array({hd, 3 * hd}, r, -0.5, 0.5);
      Array b = random_array({3 * hd}, r, -0.2, 0.2);
      Array w = random_array({hd}, r);
      check({x, h, wx, wh, b},
            [w](Tape& t, const std::vector<Var>& v) {
              return alt::sum(alt::mul(alt::gru_cell(v[0], v[1], v[2], v[3], v[4]), t.leaf(w)));
            },
            "gru_cell");
      Array c = random_array({hd}, r);
      Array wx4 = random_array({in, 4 * hd}, r, -0.5, 0.5);
      Array wh4 = random_array({hd, 4 * hd}, r, -0.5, 0.5);
      Array b4 = random_array({4 * hd}, r, -0.2, 0.2);
      check({x, h, c, wx4, wh4, b4},
            [w](Tape& t, const std::vector<Var>& v) {
              auto out = alt::lstm_cell(v[0], v[1], v[2], v[3], v[4], v[5]);
              return alt::sum(alt::mul(alt::add(out.h, out.c), t.leaf(w)));
            },
            "lstm_cell");
    }
  }
}

// Random composite graphs: mix of ops, gradient vs finite differences.
TEST(GradCheck, RandomCompositeGraphs) {
  Rng rng(777);
  for (int trial = 0; trial < 10; ++trial) {
    Rng r = rng.split(trial);
    Array a = random_array({3, 4}, r, -1.5, 1.5);
    Array b = random_array({4, 3}, r, -1.5, 1.5);
    Array c = random_array({3}, r);
    auto res = check_gradients({a, b, c}, [](Tape& t, const std::vector<Var>& v) {
      Var m = alt::matmul(v[0], v[1]);               // (3,3)
      Var s = alt::softmax(alt::tanh_op(m));         // (3,3)
      Var row = alt::matmul(s, v[2]);                // (3)
      Var ln = alt::logsumexp(alt::add(m, alt::scale(m, 0.5)));  // (3)
      return alt::add(alt::mean(alt::gelu(row)), alt::sum(alt::mul(ln, t.leaf(Array::vec({0.3, -0.2, 0.1})))));
    });
    EXPECT_TRUE(res.ok) << res.detail;
  }
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  alt::ParamSet p;
  p.add("w", Array::vec({1.0, -2.0}));
  alt::AdamState st;
  alt::GradMap g;
  g.emplace("w", Array::zeros({2}));
  alt::adam_step(p, g, st, 0.1);
  EXPECT_DOUBLE_EQ(p.at("w").at(0), 1.0);
  EXPECT_DOUBLE_EQ(p.at("w").at(1), -2.0);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, FirstStepIsSignScaled) {
  // From m = v = 0, bias correction makes the first update exactly
  // -lr * g / (|g| + eps-ish); check against hand evaluation.
  double lr = 0.05, g0 = 0.37, eps = 1e-8;
  alt::ParamSet p;
  p.add("w", Array::vec({2.0}));
  alt::AdamState st;
  alt::GradMap g;
  g.emplace("w", Array::vec({g0}));
  alt::adam_step(p, g, st, lr, 0.9, 0.999, eps);
  double m = 0.1 * g0, v = 0.001 * g0 * g0;
  double mhat = m / 0.1, vhat = v / 0.001;
  double want = 2.0 - lr * mhat / (std::sqrt(vhat) + eps);
  EXPECT_NEAR(p.at("w").at(0), want, 1e-15);
  EXPECT_NEAR(p.at("w").at(0), 2.0 - lr * g0 / (std::abs(g0) + eps), 1e-12);
}

TEST(Adam, ConstantGradientStepsBoundedByLr) {
  double lr = 0.01, g0 = -0.8;
  alt::ParamSet p;
  p.add("w", Array::vec({0.0}));
  alt::AdamState st;
  alt::GradMap g;
  g.emplace("w", Array::vec({g0}));
  double prev = 0.0;
  for (int i = 0; i < 200; ++i) {
    alt::adam_step(p, g, st, lr);
    double delta = p.at("w").at(0) - prev;
    prev = p.at("w").at(0);
    EXPECT_LE(std::abs(delta), lr * (1.0 + 1e-6));
  }
  // Sign-like behavior: steps move against the gradient at magnitude ~lr.
  EXPECT_NEAR(std::abs(p.at("w").at(0)), 200 * lr, 200 * lr * 0.05);
}

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
