#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <functional>

#include "pillarcast/nn.hpp"
#include "test_util.hpp"

using namespace pillarcast;
using namespace pillarcast::testutil;
using nn::NodeId;
using nn::Shape;
using nn::Tape;
using nn::Tensor;

namespace {

// scalarize an op output: loss = sum(out * fixed_mask)
NodeId masked_sum(Tape<double>& tape, NodeId out, Tensor<double>& mask) {
  return tape.sum_all(tape.mul(out, tape.input(mask)));
}

Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0,
                             bool rg = true) {
  Tensor<double> t(s, 0.0, rg);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Runs an FD check for every gradient-requiring tensor the builder uses.
void check_gradients(
    const char* name, std::vector<Tensor<double>*> targets,
    const std::function<NodeId(Tape<double>&)>& build_output, Shape out_shape,
    double tol = 1e-5) {
  Rng mask_rng(7777);
  Tensor<double> mask = random_tensor(out_shape, mask_rng, -1.0, 1.0, false);
  auto run = [&](Tensor<double>* target) {
    return [&, target]() -> std::pair<double, std::vector<double>> {
      Tape<double> tape;
      const NodeId out = build_output(tape);
      REQUIRE(tape.shape(out) == mask.shape);
      const NodeId loss = masked_sum(tape, out, mask);
      tape.backward(loss);
      // the target leaf is whichever input node references its buffer
      std::vector<double> grad;
      for (int id = 0; id < tape.size(); ++id) {
        const auto& node = tape.node(id);
        if (node.op == nn::Op::input && node.vptr == target->data.data()) {
          grad = tape.grad(id);
          break;
        }
      }
      return {tape.scalar_value(loss), grad};
    };
  };
  for (Tensor<double>* target : targets) {
    CAPTURE(name);
    const double err = fd_max_rel_err(*target, run(target));
    CHECK_MESSAGE(err < tol, name << ": fd rel err " << err);
  }
}

}  // namespace

TEST_CASE("relu semantics") {
  Tape<float> tape;
  Tensor<float> x(Shape::vec(3));
  x.data = {-1.0f, 0.0f, 2.0f};
  const NodeId y = tape.relu(tape.input(x));
  const float* v = tape.value(y);
  CHECK(v[0] == 0.0f);
  CHECK(v[1] == 0.0f);
  CHECK(v[2] == 2.0f);
}

TEST_CASE("conv2d with identity delta kernel reproduces the input") {
  Rng rng(4);
  Tape<float> tape;
  Tensor<float> x(Shape::chw(2, 6, 5));
  fill_uniform(x, rng);
  Tensor<float> w(Shape::conv_w(2, 2, 3, 3));
  // kernel = delta at center, identity channel map
  for (int co = 0; co < 2; ++co) w.data[(co * 2 + co) * 9 + 4] = 1.0f;
  const NodeId y = tape.conv2d(tape.input(x), tape.input(w), -1, 1, 1);
  const float* v = tape.value(y);
  for (long i = 0; i < x.shape.numel(); ++i)
    CHECK(v[i] == doctest::Approx(x.data[i]).epsilon(1e-7));
}

TEST_CASE("linear equals an independent matrix-multiply recompute") {
  Rng rng(5);
  const int m = 5, k = 7, n = 4;
  Tape<float> tape;
  Tensor<float> x(Shape::mat(m, k)), w(Shape::mat(k, n)), b(Shape::vec(n));
  fill_uniform(x, rng);
  fill_uniform(w, rng);
  fill_uniform(b, rng);
  const NodeId y = tape.linear(tape.input(x), tape.input(w), tape.input(b));
  const float* v = tape.value(y);
  double worst = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = b.data[j];
      for (int p = 0; p < k; ++p) acc += x.data[i * k + p] * w.data[p * n + j];
      worst = std::max(worst, std::abs(acc - v[i * n + j]));
    }
  CHECK(worst < 1e-6);
}

TEST_CASE("backward basics: sum and half squared norm") {
  Rng rng(6);
  Tape<double> tape;
  Tensor<double> x = random_tensor(Shape::vec(9), rng, -2.0, 2.0);
  const NodeId xid = tape.input(x);
  tape.backward(tape.sum_all(xid));
  for (double g : tape.grad(xid)) CHECK(g == 1.0);

  Tape<double> tape2;
  const NodeId xid2 = tape2.input(x);
  const NodeId loss = tape2.scale_shift(tape2.sum_all(tape2.mul(xid2, xid2)), 0.5);
  tape2.backward(loss);
  const auto& g = tape2.grad(xid2);
  for (size_t i = 0; i < x.data.size(); ++i)
    CHECK(g[i] == doctest::Approx(x.data[i]).epsilon(1e-9));
}

TEST_CASE("backward requires a scalar loss") {
  Tape<double> tape;
  Tensor<double> x(Shape::vec(3), 1.0, true);
  const NodeId id = tape.input(x);
  CHECK_THROWS_AS(tape.backward(id), nn::ContractError);
}

TEST_CASE("shape errors name the op") {
  Tape<float> tape;
  Tensor<float> a(Shape::mat(2, 3)), b(Shape::mat(3, 2));
  CHECK_THROWS_WITH_AS(tape.add(tape.input(a), tape.input(b)),
                       doctest::Contains("add"), nn::ShapeError);
  Tensor<float> w(Shape::mat(4, 2));
  CHECK_THROWS_WITH_AS(tape.linear(tape.input(a), tape.input(w), -1),
                       doctest::Contains("linear"), nn::ShapeError);
}

TEST_CASE("finite differences: elementwise and reduction ops") {
  Rng rng(10);
  Tensor<double> a = random_tensor(Shape::mat(3, 4), rng, 0.3, 1.7);
  Tensor<double> b = random_tensor(Shape::mat(3, 4), rng, 0.4, 1.9);
  const Shape s = Shape::mat(3, 4);

  check_gradients("add", {&a, &b}, [&](Tape<double>& t) {
    return t.add(t.input(a), t.input(b));
  }, s);
  check_gradients("sub", {&a, &b}, [&](Tape<double>& t) {
    return t.sub(t.input(a), t.input(b));
  }, s);
  check_gradients("mul", {&a, &b}, [&](Tape<double>& t) {
    return t.mul(t.input(a), t.input(b));
  }, s);
  check_gradients("divide", {&a, &b}, [&](Tape<double>& t) {
    return t.divide(t.input(a), t.input(b));
  }, s);
  check_gradients("scale_shift", {&a}, [&](Tape<double>& t) {
    return t.scale_shift(t.input(a), -1.75, 0.25);
  }, s);
  check_gradients("relu", {&a}, [&](Tape<double>& t) {
    return t.relu(t.scale_shift(t.input(a), 1.0, -1.0));  // spans the kink region
  }, s);
  check_gradients("sigmoid", {&a}, [&](Tape<double>& t) {
    return t.sigmoid(t.input(a));
  }, s);
  check_gradients("tanh", {&a}, [&](Tape<double>& t) {
    return t.tanh_fn(t.input(a));
  }, s);
  check_gradients("exp", {&a}, [&](Tape<double>& t) {
    return t.exp_fn(t.input(a));
  }, s);
  check_gradients("log", {&a}, [&](Tape<double>& t) {
    return t.log_fn(t.input(a));
  }, s);
  check_gradients("cosh", {&a}, [&](Tape<double>& t) {
    return t.cosh_fn(t.input(a));
  }, s);
  check_gradients("sum", {&a}, [&](Tape<double>& t) {
    return t.sum_all(t.input(a));
  }, Shape::scalar());
  check_gradients("mean", {&a}, [&](Tape<double>& t) {
    return t.mean_all(t.input(a));
  }, Shape::scalar());
  check_gradients("softmax", {&a}, [&](Tape<double>& t) {
    return t.softmax(t.input(a));
  }, s);
}

TEST_CASE("finite differences: linear and conv variants") {
  Rng rng(11);
  Tensor<double> x = random_tensor(Shape::mat(4, 6), rng);
  Tensor<double> w = random_tensor(Shape::mat(6, 3), rng);
  Tensor<double> b = random_tensor(Shape::vec(3), rng);
  check_gradients("linear", {&x, &w, &b}, [&](Tape<double>& t) {
    return t.linear(t.input(x), t.input(w), t.input(b));
  }, Shape::mat(4, 3));

  Tensor<double> cx = random_tensor(Shape::chw(3, 7, 6), rng);
  Tensor<double> cw = random_tensor(Shape::conv_w(2, 3, 3, 3), rng);
  Tensor<double> cb = random_tensor(Shape::vec(2), rng);
  check_gradients("conv3x3_s1", {&cx, &cw, &cb}, [&](Tape<double>& t) {
    return t.conv2d(t.input(cx), t.input(cw), t.input(cb), 1, 1);
  }, Shape::chw(2, 7, 6));
  check_gradients("conv3x3_s2", {&cx, &cw, &cb}, [&](Tape<double>& t) {
    return t.conv2d(t.input(cx), t.input(cw), t.input(cb), 2, 1);
  }, Shape::chw(2, 4, 3));

  Tensor<double> pw = random_tensor(Shape::conv_w(4, 3, 1, 1), rng);
  Tensor<double> pb = random_tensor(Shape::vec(4), rng);
  check_gradients("conv1x1", {&cx, &pw, &pb}, [&](Tape<double>& t) {
    return t.conv2d(t.input(cx), t.input(pw), t.input(pb), 1, 0);
  }, Shape::chw(4, 7, 6));
}

TEST_CASE("finite differences: batchnorm in both modes") {
  Rng rng(12);
  Tensor<double> x = random_tensor(Shape::mat(8, 5), rng, -1.5, 2.0);
  Tensor<double> gamma = random_tensor(Shape::vec(5), rng, 0.5, 1.5);
  Tensor<double> beta = random_tensor(Shape::vec(5), rng, -0.3, 0.3);
  std::vector<double> rm(5, 0.1), rv(5, 0.9);

  check_gradients("batchnorm_train", {&x, &gamma, &beta}, [&](Tape<double>& t) {
    auto rm_copy = rm;  // forward mutates running stats; keep FD hermetic
    auto rv_copy = rv;
    return t.batchnorm(t.input(x), t.input(gamma), t.input(beta),
                       rm_copy.data(), rv_copy.data(), true);
  }, Shape::mat(8, 5));
  check_gradients("batchnorm_eval", {&x, &gamma, &beta}, [&](Tape<double>& t) {
    return t.batchnorm(t.input(x), t.input(gamma), t.input(beta), rm.data(),
                       rv.data(), false);
  }, Shape::mat(8, 5));
}

TEST_CASE("finite differences: shape and gather ops") {
  Rng rng(13);
  Tensor<double> x = random_tensor(Shape::mat(5, 8), rng);
  check_gradients("slice_cols", {&x}, [&](Tape<double>& t) {
    return t.slice_cols(t.input(x), 2, 6);
  }, Shape::mat(5, 4));
  check_gradients("take_row", {&x}, [&](Tape<double>& t) {
    return t.take_row(t.input(x), 3);
  }, Shape::mat(1, 8));
  check_gradients("transpose2d", {&x}, [&](Tape<double>& t) {
    return t.transpose2d(t.input(x));
  }, Shape::mat(8, 5));
  check_gradients("reshape", {&x}, [&](Tape<double>& t) {
    return t.reshape(t.input(x), Shape::vec(40));
  }, Shape::vec(40));

  Tensor<double> c = random_tensor(Shape::chw(2, 6, 6), rng);
  check_gradients("avg_pool2", {&c}, [&](Tape<double>& t) {
    return t.avg_pool2(t.input(c));
  }, Shape::chw(2, 3, 3));
  check_gradients("upsample_nearest2", {&c}, [&](Tape<double>& t) {
    return t.upsample_nearest2(t.input(c));
  }, Shape::chw(2, 12, 12));
  check_gradients("resize_nearest", {&c}, [&](Tape<double>& t) {
    return t.resize_nearest(t.input(c), 10, 7);
  }, Shape::chw(2, 10, 7));
  check_gradients("extract_patch", {&c}, [&](Tape<double>& t) {
    return t.extract_patch(t.input(c), 1, 4, 2);  // overlaps the border
  }, Shape::chw(2, 5, 5));

  Tensor<double> d = random_tensor(Shape::chw(3, 6, 6), rng);
  check_gradients("concat_chan", {&c, &d}, [&](Tape<double>& t) {
    return t.concat_chan(t.input(c), t.input(d));
  }, Shape::chw(5, 6, 6));
  Tensor<double> va = random_tensor(Shape::mat(1, 4), rng);
  Tensor<double> vb = random_tensor(Shape::mat(1, 7), rng);
  check_gradients("concat_vec", {&va, &vb}, [&](Tape<double>& t) {
    return t.concat_vec(t.input(va), t.input(vb));
  }, Shape::mat(1, 11));
}

TEST_CASE("finite differences: segment max and loss ops") {
  Rng rng(14);
  Tensor<double> x = random_tensor(Shape::mat(12, 4), rng);
  static const std::vector<int> seg = {0, 1, 2, 0, 1, 2, 3, 3, 0, 1, 2, 3};
  check_gradients("segment_max", {&x}, [&](Tape<double>& t) {
    return t.segment_max(t.input(x), seg.data(), 5);  // segment 4 empty
  }, Shape::mat(5, 4));

  Tensor<double> p = random_tensor(Shape::vec(20), rng, 0.05, 0.95);
  static std::vector<double> target;
  target.assign(20, 0.0);
  Rng trng(15);
  for (double& v : target) v = trng.uniform() < 0.5 ? 0.0 : 1.0;
  check_gradients("bce_sum", {&p}, [&](Tape<double>& t) {
    return t.bce_sum(t.input(p), target.data());
  }, Shape::scalar());

  Tensor<double> logits = random_tensor(Shape::mat(1, 6), rng, -2.0, 2.0);
  check_gradients("ce_logits", {&logits}, [&](Tape<double>& t) {
    return t.ce_logits(t.input(logits), 2);
  }, Shape::scalar());
}

TEST_CASE("max_over_set routes gradient to the lowest-index winner on ties") {
  Tape<double> tape;
  Tensor<double> x(Shape::mat(3, 2), 0.0, true);
  x.data = {0.5, 0.2, 0.5, 0.9, 0.1, 0.9};  // rows 0 and 1 tie in column 0
  static const std::vector<int> seg = {0, 0, 0};
  const NodeId xid = tape.input(x);
  const NodeId y = tape.segment_max(xid, seg.data(), 1);
  tape.backward(tape.sum_all(y));
  const auto& g = tape.grad(xid);
  CHECK(g[0] == 1.0);  // column 0 winner: row 0 (tie with row 1)
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 1.0);  // column 1 winner: row 1
  CHECK(g[5] == 0.0);
}

TEST_CASE("empty pillar maps to zeros; duplication and permutation invariance") {
  Rng rng(16);
  Tensor<float> x(Shape::mat(6, 3), 0.0f);
  fill_uniform(x, rng);
  static const std::vector<int> seg = {2, 0, 2, 0, 2, 0};
  Tape<float> tape;
  const NodeId y = tape.segment_max(tape.input(x), seg.data(), 3);
  const float* v = tape.value(y);
  for (int j = 0; j < 3; ++j) CHECK(v[3 + j] == 0.0f);  // segment 1 empty

  // duplicate every point: identical output
  Tensor<float> x2(Shape::mat(12, 3), 0.0f);
  std::copy(x.data.begin(), x.data.end(), x2.data.begin());
  std::copy(x.data.begin(), x.data.end(), x2.data.begin() + x.data.size());
  static std::vector<int> seg2;
  seg2.assign(seg.begin(), seg.end());
  seg2.insert(seg2.end(), seg.begin(), seg.end());
  Tape<float> tape2;
  const float* v2 = tape2.value(tape2.segment_max(tape2.input(x2), seg2.data(), 3));
  CHECK(std::memcmp(v, v2, 9 * sizeof(float)) == 0);
}

TEST_CASE("clip_grad_norm") {
  SUBCASE("below threshold: unchanged") {
    std::vector<std::vector<float>> g = {{0.03f, 0.04f}};  // norm 0.05
    const double norm = nn::clip_grad_norm(g, 0.1);
    CHECK(norm == doctest::Approx(0.05));
    CHECK(g[0][0] == 0.03f);
    CHECK(g[0][1] == 0.04f);
  }
  SUBCASE("above threshold: scaled to max_norm") {
    std::vector<std::vector<float>> g = {{0.3f, 0.4f}};  // norm 0.5
    nn::clip_grad_norm(g, 0.1);
    CHECK(g[0][0] == doctest::Approx(0.06f));
    CHECK(g[0][1] == doctest::Approx(0.08f));
  }
  SUBCASE("post-clip global norm equals min(g, max_norm)") {
    Rng rng(17);
    std::vector<std::vector<float>> g(3);
    for (auto& v : g) {
      v.resize(11);
      for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    nn::clip_grad_norm(g, 0.1);
    double sq = 0.0;
    for (auto& v : g)
      for (float x : v) sq += static_cast<double>(x) * x;
    CHECK(std::sqrt(sq) == doctest::Approx(0.1).epsilon(1e-6));
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged bitwise") {
    nn::ParamStore<float> store;
    Tensor<float>& p = store.add("p", Shape::vec(4));
    p.data = {1.0f, -2.0f, 3.0f, 0.25f};
    const std::vector<float> before = p.data;
    nn::Adam<float> adam(store, {});
    std::vector<std::vector<float>> grads(1);
    for (int i = 0; i < 5; ++i) adam.step(store, grads);
    CHECK(std::memcmp(before.data(), p.data.data(), 4 * sizeof(float)) == 0);
  }
  SUBCASE("step 1 with constant gradient moves by exactly lr (64-bit mode)") {
    nn::ParamStore<double> store;
    Tensor<double>& p = store.add("p", Shape::vec(1));
    p.data = {0.5};
    nn::Adam<double>::Hyper h;
    h.lr = 4e-4;
    nn::Adam<double> adam(store, h);
    adam.step(store, {{1.0}});
    CHECK(std::abs(0.5 - p.data[0] - 4e-4) < 1e-9);
  }
  SUBCASE("descends w^2 monotonically") {
    nn::ParamStore<float> store;
    Tensor<float>& p = store.add("w", Shape::vec(1));
    p.data = {1.0f};
    nn::Adam<float>::Hyper h;
    h.lr = 0.05;
    nn::Adam<float> adam(store, h);
    float prev = 1.0f;
    for (int i = 0; i < 10; ++i) {
      adam.step(store, {{2.0f * p.data[0]}});
      CHECK(std::abs(p.data[0]) < std::abs(prev));
      prev = p.data[0];
    }
  }
}

TEST_CASE("checkpoint round trip is exact and validates its header") {
  Rng rng(18);
  nn::ParamStore<float> store;
  fill_uniform(store.add("alpha.w", Shape::mat(3, 5)), rng);
  fill_uniform(store.add("alpha.b", Shape::vec(5)), rng);
  fill_uniform(store.add("stats", Shape::vec(7), false), rng);
  const std::string path = "ckpt_test.bin";
  nn::save_checkpoint(store, path);

  nn::ParamStore<float> loaded;
  loaded.add("alpha.w", Shape::mat(3, 5));
  loaded.add("alpha.b", Shape::vec(5));
  loaded.add("stats", Shape::vec(7), false);
  nn::load_checkpoint(loaded, path);
  for (size_t i = 0; i < store.size(); ++i)
    CHECK(std::memcmp(store.entries()[i].tensor.data.data(),
                      loaded.entries()[i].tensor.data.data(),
                      store.entries()[i].tensor.data.size() * sizeof(float)) == 0);

  // magic check
  {
    std::ofstream bad("ckpt_bad.bin", std::ios::binary);
    bad << "NOPE0000";
  }
  CHECK_THROWS_AS(nn::load_checkpoint(loaded, "ckpt_bad.bin"), nn::ContractError);

  // file starts with the magic bytes
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::memcmp(magic, "STPN", 4) == 0);
  std::remove(path.c_str());
  std::remove("ckpt_bad.bin");
}

TEST_CASE("forward determinism: identical inputs give bit-identical outputs") {
  Rng rng(19);
  Tensor<float> x = [] {
    Tensor<float> t(Shape::mat(30, 8));
    return t;
  }();
  fill_uniform(x, rng);
  Tensor<float> w(Shape::mat(8, 6));
  fill_uniform(w, rng);
  auto run = [&] {
    kernels::SerialGuard serial;
    Tape<float> tape;
    const NodeId y = tape.sigmoid(tape.linear(tape.input(x), tape.input(w), -1));
    const float* v = tape.value(y);
    return std::vector<float>(v, v + tape.shape(y).numel());
  };
  const auto a = run();
  const auto b = run();
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("tape rewind reuses node slots") {
  Tensor<float> x(Shape::vec(4), 0.5f);
  Tape<float> tape;
  tape.relu(tape.input(x));
  const int size_first = tape.size();
  tape.rewind();
  tape.relu(tape.input(x));
  CHECK(tape.size() == size_first);
}
