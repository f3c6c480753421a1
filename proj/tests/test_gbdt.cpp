#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sahanet/gbdt.hpp"

using namespace sahanet;
using namespace sahanet::gbdt;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values) v = rng.uniform();
  return m;
}

std::vector<double> random_targets(std::size_t n, Rng& rng) {
  std::vector<double> y(n);
  for (double& v : y) v = rng.uniform(-1.0, 1.0);
  return y;
}

// Independent oracle: exhaustive scan over every (feature, midpoint)
// candidate, scoring by direct two-pass summed child squared error. Ties
// break toward the lowest feature index, then the lowest threshold.
struct Stump {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double left_value = 0.0;
  double right_value = 0.0;
  double sse = 0.0;
};

Stump brute_force_stump(const Matrix& x, const std::vector<double>& y,
                        int min_leaf) {
  Stump best;
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::vector<double> values;
    for (std::size_t r = 0; r < x.rows; ++r) values.push_back(x.at(r, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      double thr = values[k] + 0.5 * (values[k + 1] - values[k]);
      if (thr >= values[k + 1]) thr = values[k];
      double ls = 0.0, rs = 0.0;
      int ln = 0, rn = 0;
      for (std::size_t r = 0; r < x.rows; ++r) {
        if (x.at(r, f) <= thr) {
          ls += y[r];
          ++ln;
        } else {
          rs += y[r];
          ++rn;
        }
      }
      if (ln < min_leaf || rn < min_leaf) continue;
      const double lm = ls / ln, rm = rs / rn;
      double sse = 0.0;
      for (std::size_t r = 0; r < x.rows; ++r) {
        const double mu = x.at(r, f) <= thr ? lm : rm;
        const double d = y[r] - mu;
        sse += d * d;
      }
      if (!best.found || sse < best.sse) {
        best = {true, static_cast<int>(f), thr, lm, rm, sse};
      }
    }
  }
  return best;
}

double mse_of(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("hyperparameter validation") {
  GbdtHyperparams hp;
  hp.n_estimators = 0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = GbdtHyperparams{};
  hp.learning_rate = 0.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = GbdtHyperparams{};
  hp.subsample = 1.5;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}

TEST_CASE("constant targets produce degenerate trees") {
  Rng rng(1);
  const Matrix x = random_matrix(20, 4, rng);
  const std::vector<double> y(20, 0.5);
  GbdtHyperparams hp;
  hp.n_estimators = 10;
  const auto model = fit(x, y, hp);
  CHECK(model.base_value == 0.5);
  for (std::size_t m = 0; m < model.n_trees(); ++m) {
    const std::size_t begin = model.tree_offsets[m];
    CHECK(model.tree_offsets[m + 1] - begin == 1);  // single leaf
    CHECK(model.nodes[begin].value == 0.0);
  }
  for (double p : model.predict(x)) CHECK(p == 0.5);
}

TEST_CASE("depth-1 fits match the exhaustive stump oracle") {
  Rng rng(20240);
  int with_split = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(7);   // 2..8 points
    const std::size_t f = 1 + rng.below(3);   // 1..3 features
    const Matrix x = random_matrix(n, f, rng);
    const std::vector<double> y = random_targets(n, rng);

    GbdtHyperparams hp;
    hp.n_estimators = 1;
    hp.max_depth = 1;
    hp.min_samples_leaf = 1;
    hp.subsample = 1.0;
    hp.learning_rate = 1.0;
    const auto model = fit(x, y, hp);
    const Stump oracle = brute_force_stump(x, y, 1);

    const TreeNode& root = model.nodes[0];
    if (!oracle.found) {
      CHECK(root.feature == -1);
      continue;
    }
    ++with_split;
    REQUIRE(root.feature >= 0);
    CHECK(root.feature == oracle.feature);
    CHECK(root.threshold == oracle.threshold);
    const double base = model.base_value;
    CHECK(model.nodes[static_cast<std::size_t>(root.left)].value + base ==
          doctest::Approx(oracle.left_value).epsilon(1e-9));
    CHECK(model.nodes[static_cast<std::size_t>(root.right)].value + base ==
          doctest::Approx(oracle.right_value).epsilon(1e-9));
  }
  CHECK(with_split > 40);  // the suite actually exercised the split path
}

TEST_CASE("training MSE is non-increasing across stages at full subsample") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = random_matrix(40, 5, rng);
    const std::vector<double> y = random_targets(40, rng);
    GbdtHyperparams hp;
    hp.n_estimators = 30;
    hp.learning_rate = 0.3;
    hp.subsample = 1.0;
    hp.min_samples_leaf = 2;
    const auto model = fit(x, y, hp);
    const auto stages = model.staged_predict(x);
    double prev = mse_of(stages[0], y);
    for (std::size_t m = 1; m < stages.size(); ++m) {
      const double cur = mse_of(stages[m], y);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
    CHECK(prev <= mse_of(std::vector<double>(40, model.base_value), y));
  }
}

TEST_CASE("staged predictions and truncation agree") {
  Rng rng(11);
  const Matrix x = random_matrix(30, 4, rng);
  const std::vector<double> y = random_targets(30, rng);
  GbdtHyperparams hp;
  hp.n_estimators = 12;
  hp.subsample = 0.8;
  hp.rng_seed = 5;
  const auto model = fit(x, y, hp);
  const auto stages = model.staged_predict(x);
  REQUIRE(stages.size() == model.n_trees() + 1);
  for (double p : stages[0]) CHECK(p == model.base_value);
  CHECK(stages.back() == model.predict(x));
  // element m+1 - element m = learning_rate * tree m output
  for (std::size_t m = 0; m < model.n_trees(); ++m) {
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double inc = stages[m + 1][r] - stages[m][r];
      CHECK(inc == doctest::Approx(hp.learning_rate *
                                   model.tree_value(m, x.row(r)))
                       .epsilon(1e-12));
    }
    CHECK(model.truncate(m).predict(x) == stages[m]);
  }
  CHECK(model.truncate(model.n_trees()).predict(x) == model.predict(x));
  CHECK(model.truncate(0).predict(x) ==
        std::vector<double>(x.rows, model.base_value));
  CHECK_THROWS_AS(model.truncate(model.n_trees() + 1), std::out_of_range);
}

TEST_CASE("truncation never changes earlier trees under subsampling") {
  Rng rng(3);
  const Matrix x = random_matrix(50, 6, rng);
  const std::vector<double> y = random_targets(50, rng);
  GbdtHyperparams hp;
  hp.n_estimators = 20;
  hp.subsample = 0.5;
  hp.rng_seed = 77;
  const auto long_fit = fit(x, y, hp);
  hp.n_estimators = 8;
  const auto short_fit = fit(x, y, hp);
  REQUIRE(short_fit.n_trees() == 8);
  for (std::size_t i = 0; i < short_fit.nodes.size(); ++i) {
    CHECK(short_fit.nodes[i].feature == long_fit.nodes[i].feature);
    CHECK(short_fit.nodes[i].threshold == long_fit.nodes[i].threshold);
    CHECK(short_fit.nodes[i].value == long_fit.nodes[i].value);
  }
}

TEST_CASE("determinism") {
  Rng rng(13);
  const Matrix x = random_matrix(60, 5, rng);
  const std::vector<double> y = random_targets(60, rng);
  GbdtHyperparams hp;
  hp.n_estimators = 25;
  hp.subsample = 0.7;
  hp.rng_seed = 123;
  const auto a = fit(x, y, hp);
  const auto b = fit(x, y, hp);
  CHECK(a.predict(x) == b.predict(x));
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].feature == b.nodes[i].feature);
    CHECK(a.nodes[i].threshold == b.nodes[i].threshold);
  }
}

TEST_CASE("leaf occupancy and depth limits") {
  Rng rng(29);
  const Matrix x = random_matrix(80, 4, rng);
  const std::vector<double> y = random_targets(80, rng);
  for (int depth : {1, 2, 3, 4}) {
    for (int leaf : {1, 4, 9}) {
      GbdtHyperparams hp;
      hp.n_estimators = 8;
      hp.max_depth = depth;
      hp.min_samples_leaf = leaf;
      const auto model = fit(x, y, hp);
      for (std::size_t m = 0; m < model.n_trees(); ++m) {
        // walk each tree, tracking depth
        struct Item {
          std::size_t idx;
          int depth;
        };
        std::vector<Item> stack = {{model.tree_offsets[m], 0}};
        while (!stack.empty()) {
          const Item it = stack.back();
          stack.pop_back();
          const TreeNode& node = model.nodes[it.idx];
          CHECK(it.depth <= depth);
          if (node.feature < 0) {
            CHECK(node.n_samples >= leaf);
          } else {
            stack.push_back({static_cast<std::size_t>(node.left), it.depth + 1});
            stack.push_back(
                {static_cast<std::size_t>(node.right), it.depth + 1});
          }
        }
      }
    }
  }
}

TEST_CASE("permutation invariance at full subsample") {
  Rng rng(31);
  const Matrix x = random_matrix(50, 3, rng);
  const std::vector<double> y = random_targets(50, rng);
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 49; i > 0; --i)
    std::swap(perm[i], perm[rng.below(i + 1)]);
  Matrix xp(50, 3);
  std::vector<double> yp(50);
  for (std::size_t r = 0; r < 50; ++r) {
    for (std::size_t c = 0; c < 3; ++c) xp.at(r, c) = x.at(perm[r], c);
    yp[r] = y[perm[r]];
  }
  GbdtHyperparams hp;
  hp.n_estimators = 15;
  hp.subsample = 1.0;
  const auto a = fit(x, y, hp).predict(x);
  const auto b = fit(xp, yp, hp).predict(x);
  for (std::size_t r = 0; r < 50; ++r)
    CHECK(a[r] == doctest::Approx(b[r]).epsilon(1e-10));
}

TEST_CASE("single point memorization and boosting beats the mean") {
  Matrix x1(1, 2);
  x1.at(0, 0) = 0.3;
  x1.at(0, 1) = 0.7;
  GbdtHyperparams hp;
  hp.min_samples_leaf = 1;
  const auto one = fit(x1, {0.42}, hp);
  CHECK(one.predict(x1)[0] == doctest::Approx(0.42).epsilon(1e-12));

  Rng rng(37);
  const Matrix x = random_matrix(50, 4, rng);
  std::vector<double> y(50);
  for (std::size_t r = 0; r < 50; ++r) y[r] = x.at(r, 0) * 2.0 + x.at(r, 2);
  GbdtHyperparams hp2;
  hp2.n_estimators = 100;
  hp2.learning_rate = 0.2;
  hp2.subsample = 1.0;
  const auto model = fit(x, y, hp2);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 50.0;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= 50.0;
  CHECK(mse_of(model.predict(x), y) <= var);
}

TEST_CASE("error paths") {
  GbdtHyperparams hp;
  Matrix empty;
  CHECK_THROWS_AS(fit(empty, {}, hp), std::invalid_argument);
  Matrix x(2, 2);
  CHECK_THROWS_AS(fit(x, {1.0}, hp), std::invalid_argument);
  Matrix bad(2, 1);
  bad.at(0, 0) = std::nan("");
  CHECK_THROWS_AS(fit(bad, {1.0, 2.0}, hp), std::invalid_argument);
  Rng rng(5);
  const Matrix good = random_matrix(10, 3, rng);
  const auto model = fit(good, random_targets(10, rng), hp);
  Matrix wrong(4, 2);
  CHECK_THROWS_AS(model.predict(wrong), std::invalid_argument);
}

TEST_CASE("early stopping tracks the scanned argmin") {
  Rng rng(41);
  const Matrix x = random_matrix(120, 4, rng);
  std::vector<double> y(120);
  for (std::size_t r = 0; r < 120; ++r)
    y[r] = 0.5 * x.at(r, 0) + 0.1 * rng.normal(0.0, 1.0);
  Matrix x_train(90, 4), x_val(30, 4);
  std::copy(x.values.begin(), x.values.begin() + 90 * 4, x_train.values.begin());
  std::copy(x.values.begin() + 90 * 4, x.values.end(), x_val.values.begin());
  const std::vector<double> y_train(y.begin(), y.begin() + 90);
  const std::vector<double> y_val(y.begin() + 90, y.end());

  GbdtHyperparams hp;
  hp.n_estimators = 400;
  hp.learning_rate = 0.05;
  hp.subsample = 1.0;
  const EarlyStopFit esf =
      fit_with_validation(x_train, y_train, &x_val, &y_val, hp, 10);
  CHECK(esf.stages_scanned <= 400);
  CHECK(esf.best_stage <= esf.stages_scanned);

  // recompute the argmin over the scanned stages independently
  const auto stages = esf.model.staged_predict(x_val);
  std::size_t argmin = 0;
  double best = mse_of(stages[0], y_val);
  for (std::size_t m = 1; m < stages.size(); ++m) {
    const double cur = mse_of(stages[m], y_val);
    if (cur < best) {
      best = cur;
      argmin = m;
    }
  }
  CHECK(argmin == esf.best_stage);
  CHECK(best == doctest::Approx(esf.best_mse).epsilon(1e-12));
  // the scan stopped exactly `patience` stages past the argmin (or ran out)
  if (esf.stages_scanned < 400)
    CHECK(esf.stages_scanned == esf.best_stage + 10);
}
