#include <cmath>
#include <functional>

#include "doctest.h"
#include "dpgan/graph.hpp"
#include "dpgan/rng.hpp"

using namespace dpgan;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.5, double hi = 1.5) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Builds sum(square(y)) so every kind gets checked through a smooth scalar.
NodeId squared_loss(ComputeGraph& g, NodeId y) { return g.apply(OpKind::kSumAll, {g.apply(OpKind::kSquare, {y})}); }

}  // namespace

TEST_CASE("d(x^2)/dx at x=3 is 6") {
  ComputeGraph g;
  NodeId x = g.parameter(Tensor::scalar(3.0), "x");
  NodeId y = g.apply(OpKind::kSquare, {x});
  std::vector<NodeId> wrt{x};
  NodeId dx = g.backward(y, wrt)[0];
  auto out = forward(g, {}, std::vector<NodeId>{dx});
  CHECK(out[0][0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("second order: d^2(x^3)/dx^2 at x=2 is 12 via backward twice") {
  ComputeGraph g;
  NodeId x = g.parameter(Tensor::scalar(2.0), "x");
  NodeId x2 = g.apply(OpKind::kSquare, {x});
  NodeId y = g.apply(OpKind::kMultiply, {x2, x});  // x^3
  std::vector<NodeId> wrt{x};
  NodeId dy = g.backward(y, wrt)[0];
  NodeId d2y = g.backward(dy, wrt)[0];
  auto out = forward(g, {}, std::vector<NodeId>{d2y});
  CHECK(out[0][0] == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("derivative of tanh at 0 is 1") {
  ComputeGraph g;
  NodeId x = g.parameter(Tensor::scalar(0.0), "x");
  NodeId y = g.apply(OpKind::kTanh, {x});
  std::vector<NodeId> wrt{x};
  NodeId dx = g.backward(y, wrt)[0];
  auto out = forward(g, {}, std::vector<NodeId>{dx});
  CHECK(out[0][0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gradient of |W x|^2 wrt W matches central differences on random 4x4 instances") {
  Rng rng(101);
  for (int rep = 0; rep < 10; ++rep) {
    ComputeGraph g;
    NodeId w = g.parameter(random_tensor({4, 4}, rng), "W");
    NodeId x = g.constant(random_tensor({4}, rng));
    NodeId y = g.apply(OpKind::kMatmul, {w, x});
    NodeId loss = squared_loss(g, y);
    std::vector<NodeId> wrt{w};
    CHECK(finite_difference_check(g, loss, wrt, {}, 1e-5) < 1e-6);
  }
}

TEST_CASE("finite differences: linear is near-exact, constant is exact") {
  ComputeGraph g;
  NodeId x = g.parameter(Tensor({3}, {0.3, -0.7, 1.1}), "x");
  NodeId w = g.constant(Tensor({3}, {2.0, -1.0, 0.5}));
  NodeId y = g.apply(OpKind::kSumAll, {g.apply(OpKind::kMultiply, {w, x})});
  std::vector<NodeId> wrt{x};
  CHECK(finite_difference_check(g, y, wrt, {}, 1e-5) < 1e-10);

  ComputeGraph g2;
  NodeId x2 = g2.parameter(Tensor({3}, {0.3, -0.7, 1.1}), "x");
  NodeId c = g2.constant(Tensor::scalar(5.0));
  // constant function of x: 5 + 0 * sum(x)
  NodeId y2 = g2.apply(OpKind::kAdd, {c, g2.apply(OpKind::kScale, {g2.apply(OpKind::kSumAll, {x2})}, {.scale = 0.0})});
  std::vector<NodeId> wrt2{x2};
  CHECK(finite_difference_check(g2, y2, wrt2, {}, 1e-5) == 0.0);
}

TEST_CASE("every op kind: analytic gradients match central finite differences over random instances") {
  // 100+ random instances spread over the full kind list (pre: smooth region
  // sampling for relu/sqrt/reciprocal)
  Rng rng(2024);
  int instances = 0;

  auto check_graph = [&](const std::function<void(ComputeGraph&, std::vector<NodeId>&, NodeId&)>& build) {
    ComputeGraph g;
    std::vector<NodeId> wrt;
    NodeId y = 0;
    build(g, wrt, y);
    NodeId loss = squared_loss(g, y);
    double err = finite_difference_check(g, loss, wrt, {}, 1e-5);
    CHECK(err < 1e-5);
    ++instances;
  };

  for (int rep = 0; rep < 7; ++rep) {
    // add / subtract / multiply
    for (OpKind kind : {OpKind::kAdd, OpKind::kSubtract, OpKind::kMultiply}) {
      check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
        NodeId a = g.parameter(random_tensor({3, 4}, rng), "a");
        NodeId b = g.parameter(random_tensor({3, 4}, rng), "b");
        wrt = {a, b};
        y = g.apply(kind, {a, b});
      });
    }
    // matmul, all three shape patterns
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({3, 4}, rng), "a");
      NodeId b = g.parameter(random_tensor({4, 2}, rng), "b");
      wrt = {a, b};
      y = g.apply(OpKind::kMatmul, {a, b});
    });
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({3, 4}, rng), "a");
      NodeId b = g.parameter(random_tensor({4}, rng), "b");
      wrt = {a, b};
      y = g.apply(OpKind::kMatmul, {a, b});
    });
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({4}, rng), "a");
      NodeId b = g.parameter(random_tensor({4, 3}, rng), "b");
      wrt = {a, b};
      y = g.apply(OpKind::kMatmul, {a, b});
    });
    // transpose
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({3, 5}, rng), "a");
      wrt = {a};
      y = g.apply(OpKind::kTranspose, {a});
    });
    // smooth unaries
    for (OpKind kind : {OpKind::kTanh, OpKind::kSigmoid, OpKind::kSquare}) {
      check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
        NodeId a = g.parameter(random_tensor({2, 3}, rng), "a");
        wrt = {a};
        y = g.apply(kind, {a});
      });
    }
    // relu away from the kink
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      Tensor t = random_tensor({2, 3}, rng);
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (std::abs(t[i]) < 0.2) t[i] += t[i] >= 0 ? 0.25 : -0.25;
      }
      NodeId a = g.parameter(t, "a");
      wrt = {a};
      y = g.apply(OpKind::kRelu, {a});
    });
    // sqrt / reciprocal on positive inputs
    for (OpKind kind : {OpKind::kSqrt, OpKind::kReciprocal}) {
      check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
        NodeId a = g.parameter(random_tensor({5}, rng, 0.5, 2.0), "a");
        wrt = {a};
        y = g.apply(kind, {a});
      });
    }
    // softmax with groups
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({2, 6}, rng), "a");
      wrt = {a};
      y = g.apply(OpKind::kSoftmax, {a}, {.groups = {{0, 4}, {4, 2}}});
    });
    // reductions
    for (OpKind kind : {OpKind::kMeanAll, OpKind::kSumAll}) {
      check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
        NodeId a = g.parameter(random_tensor({3, 3}, rng), "a");
        wrt = {a};
        y = g.apply(kind, {a});
      });
    }
    // concat both axes
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({2, 3}, rng), "a");
      NodeId b = g.parameter(random_tensor({2, 2}, rng), "b");
      wrt = {a, b};
      y = g.apply(OpKind::kConcat, {a, b}, {.axis = 1});
    });
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({2, 3}, rng), "a");
      NodeId b = g.parameter(random_tensor({1, 3}, rng), "b");
      wrt = {a, b};
      y = g.apply(OpKind::kConcat, {a, b}, {.axis = 0});
    });
    // slice
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({4, 5}, rng), "a");
      wrt = {a};
      y = g.apply(OpKind::kSlice, {a}, {.begin = {1, 2}, .end = {3, 5}});
    });
    // scale, broadcast, reshape
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({3, 2}, rng), "a");
      wrt = {a};
      y = g.apply(OpKind::kScale, {a}, {.scale = -2.5});
    });
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({1}, rng), "a");
      wrt = {a};
      y = g.apply(OpKind::kBroadcast, {a}, {.shape = {3, 4}});
    });
    check_graph([&](ComputeGraph& g, std::vector<NodeId>& wrt, NodeId& y) {
      NodeId a = g.parameter(random_tensor({3, 4}, rng), "a");
      wrt = {a};
      y = g.apply(OpKind::kReshape, {a}, {.shape = {12}});
    });
  }
  CHECK(instances >= 100);
}

TEST_CASE("random 2-layer MLP loss passes the finite-difference check") {
  Rng rng(77);
  for (int rep = 0; rep < 5; ++rep) {
    ComputeGraph g;
    std::size_t batch = 3, in = 4, hid = 6;
    NodeId x = g.input({batch, in}, "x");
    NodeId w1 = g.parameter(random_tensor({in, hid}, rng, -0.7, 0.7), "w1");
    NodeId b1 = g.parameter(random_tensor({hid}, rng, -0.3, 0.3), "b1");
    NodeId w2 = g.parameter(random_tensor({hid, 1}, rng, -0.7, 0.7), "w2");
    NodeId b2 = g.parameter(random_tensor({1}, rng, -0.3, 0.3), "b2");
    NodeId ones = g.constant(Tensor::full({batch, 1}, 1.0));
    NodeId b1r = g.apply(OpKind::kReshape, {b1}, {.shape = {1, hid}});
    NodeId h = g.apply(OpKind::kTanh, {g.apply(OpKind::kAdd, {g.apply(OpKind::kMatmul, {x, w1}),
                                                              g.apply(OpKind::kMatmul, {ones, b1r})})});
    NodeId b2r = g.apply(OpKind::kReshape, {b2}, {.shape = {1, 1}});
    NodeId score = g.apply(OpKind::kAdd, {g.apply(OpKind::kMatmul, {h, w2}), g.apply(OpKind::kMatmul, {ones, b2r})});
    NodeId loss = g.apply(OpKind::kMeanAll, {g.apply(OpKind::kSquare, {score})});
    std::vector<NodeId> wrt{w1, b1, w2, b2};
    FeedList feeds{{x, random_tensor({batch, in}, rng)}};
    CHECK(finite_difference_check(g, loss, wrt, feeds, 1e-5) < 1e-5);
  }
}

TEST_CASE("second order: backward-of-backward matches finite differences of the first gradient") {
  // f(x) = sum(tanh(x)^2); compare d(sum_j g_j)/dx_i against central
  // differences of sum_j g_j(x)
  Rng rng(303);
  ComputeGraph g;
  Tensor x0 = random_tensor({5}, rng);
  NodeId x = g.parameter(x0, "x");
  NodeId f = g.apply(OpKind::kSumAll, {g.apply(OpKind::kSquare, {g.apply(OpKind::kTanh, {x})})});
  std::vector<NodeId> wrt{x};
  NodeId grad = g.backward(f, wrt)[0];
  NodeId grad_sum = g.apply(OpKind::kSumAll, {grad});
  NodeId hess_row_sums = g.backward(grad_sum, wrt)[0];

  Evaluator ev(g, {hess_row_sums});
  ev.run();
  Tensor analytic = ev.value(hess_row_sums);

  Evaluator sev(g, {grad_sum});
  double h = 1e-5;
  for (std::size_t j = 0; j < x0.size(); ++j) {
    Tensor& pv = g.parameter_value(x);
    double orig = pv[j];
    pv[j] = orig + h;
    sev.run();
    double fp = sev.value(grad_sum)[0];
    pv[j] = orig - h;
    sev.run();
    double fm = sev.value(grad_sum)[0];
    pv[j] = orig;
    double central = (fp - fm) / (2.0 * h);
    CHECK(std::abs(analytic[j] - central) / std::max(1e-8, std::abs(central)) < 1e-4);
  }
}

TEST_CASE("gradients blocked by step have zero contribution, not missing nodes") {
  ComputeGraph g;
  NodeId x = g.parameter(Tensor::scalar(0.7), "x");
  NodeId y = g.apply(OpKind::kStep, {x});
  std::vector<NodeId> wrt{x};
  NodeId dx = g.backward(y, wrt)[0];
  auto out = forward(g, {}, std::vector<NodeId>{dx});
  CHECK(out[0][0] == 0.0);
}
