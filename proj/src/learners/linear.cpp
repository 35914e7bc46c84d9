#include <algorithm>
#include <numeric>

#include "fitted.hpp"
#include "psytriage/rng.hpp"

namespace psytriage::detail {

namespace {

class LinearModel final : public FittedModel {
 public:
  // score = sigmoid(a * (w.z + b) + c); logistic regression uses a = 1, c = 0.
  LinearModel(std::vector<double> w, double b, double a, double c)
      : w_(std::move(w)), b_(b), a_(a), c_(c) {}

  double margin(std::span<const double> z) const { return dot(w_, z) + b_; }
  double score(std::span<const double> z) const override { return sigmoid(a_ * margin(z) + c_); }

  json state() const override {
    return json{{"weights", w_}, {"bias", b_}, {"platt_a", a_}, {"platt_b", c_}};
  }

  static std::unique_ptr<LinearModel> load(const json& s) {
    return std::make_unique<LinearModel>(s.at("weights").get<std::vector<double>>(),
                                         s.at("bias").get<double>(), s.at("platt_a").get<double>(),
                                         s.at("platt_b").get<double>());
  }

 private:
  std::vector<double> w_;
  double b_;
  double a_;
  double c_;
};

// Fits sigmoid(a * m + c) to margins with Platt's smoothed targets, by Newton
// steps with backtracking on the two parameters.
std::pair<double, double> platt_scale(const std::vector<double>& m, std::span<const int> y) {
  double n_pos = 0, n_neg = 0;
  for (int v : y) (v == 1 ? n_pos : n_neg) += 1.0;
  const double t_pos = (n_pos + 1.0) / (n_pos + 2.0);
  const double t_neg = 1.0 / (n_neg + 2.0);
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] == 1 ? t_pos : t_neg;

  auto loss = [&](double a, double c) {
    double l = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double f = a * m[i] + c;
      l += softplus(f) - t[i] * f;
    }
    return l;
  };
  double a = 1.0, c = 0.0;
  double current = loss(a, c);
  constexpr double ridge = 1e-12;
  for (int iter = 0; iter < 100; ++iter) {
    double ga = 0, gc = 0, haa = ridge, hac = 0, hcc = ridge;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double p = sigmoid(a * m[i] + c);
      const double r = p - t[i];
      const double w = p * (1.0 - p);
      ga += r * m[i];
      gc += r;
      haa += w * m[i] * m[i];
      hac += w * m[i];
      hcc += w;
    }
    if (std::abs(ga) < 1e-10 && std::abs(gc) < 1e-10) break;
    const double det = haa * hcc - hac * hac;
    if (!(det > 0)) break;
    const double da = -(hcc * ga - hac * gc) / det;
    const double dc = -(haa * gc - hac * ga) / det;
    double step = 1.0;
    bool improved = false;
    while (step > 1e-10) {
      const double next = loss(a + step * da, c + step * dc);
      if (next < current - 1e-4 * step * std::abs(ga * da + gc * dc)) {
        a += step * da;
        c += step * dc;
        current = next;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  // the score must stay increasing in the margin
  if (!(a > 0)) {
    a = 1.0;
    c = 0.0;
  }
  return {a, c};
}

}  // namespace

std::unique_ptr<FittedModel> fit_logistic(const FitInput& in) {
  const double lambda = in.params.at("lambda");
  const auto max_epochs = static_cast<std::size_t>(in.params.at("max_epochs"));
  const double tol = in.params.at("tol");
  const std::size_t n = in.z.size();
  const std::size_t d = in.z[0].size();

  double lr = in.params.at("learning_rate");
  if (lr == 0.0) {
    // 1 / L with L >= 0.25 * lambda_max([Z 1]^T [Z 1] / n) + lambda
    double trace = 1.0;
    for (const auto& r : in.z) trace += dot(r, r) / static_cast<double>(n);
    lr = 1.0 / (0.25 * trace + lambda);
  }

  std::vector<double> w(d, 0.0), grad(d);
  double b = 0.0;
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = sigmoid(dot(w, in.z[i]) + b) - in.y[i];
      for (std::size_t j = 0; j < d; ++j) grad[j] += r * in.z[i][j];
      gb += r;
    }
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      grad[j] = grad[j] / static_cast<double>(n) + lambda * w[j];
      norm += grad[j] * grad[j];
    }
    gb /= static_cast<double>(n);
    norm += gb * gb;
    if (std::sqrt(norm) < tol) break;
    for (std::size_t j = 0; j < d; ++j) w[j] -= lr * grad[j];
    b -= lr * gb;
  }
  return std::make_unique<LinearModel>(std::move(w), b, 1.0, 0.0);
}

// Pegasos: stochastic subgradient descent on the L2-regularized hinge loss,
// with the bias carried as a constant input. The returned weights are the
// average of the iterates over the final epoch.
std::unique_ptr<FittedModel> fit_svm(const FitInput& in) {
  const double lambda = in.params.at("lambda");
  const auto epochs = static_cast<std::size_t>(in.params.at("epochs"));
  const std::size_t n = in.z.size();
  const std::size_t d = in.z[0].size();

  std::vector<double> w(d + 1, 0.0), avg(d + 1, 0.0);
  std::vector<std::size_t> order(n);
  std::size_t t = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(in.seed, e);
    rng.shuffle(order);
    const bool last = e + 1 == epochs;
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double yi = in.y[i] == 1 ? 1.0 : -1.0;
      double m = w[d];
      for (std::size_t j = 0; j < d; ++j) m += w[j] * in.z[i][j];
      const double shrink = 1.0 - eta * lambda;
      for (auto& v : w) v *= shrink;
      if (yi * m < 1.0) {
        for (std::size_t j = 0; j < d; ++j) w[j] += eta * yi * in.z[i][j];
        w[d] += eta * yi;
      }
      if (last)
        for (std::size_t j = 0; j <= d; ++j) avg[j] += w[j];
    }
  }
  for (auto& v : avg) v /= static_cast<double>(n);
  const double bias = avg[d];
  avg.pop_back();

  std::vector<double> margins(n);
  for (std::size_t i = 0; i < n; ++i) margins[i] = dot(avg, in.z[i]) + bias;
  const auto [a, c] = platt_scale(margins, in.y);
  return std::make_unique<LinearModel>(std::move(avg), bias, a, c);
}

std::unique_ptr<FittedModel> load_logistic(const json& s) { return LinearModel::load(s); }
std::unique_ptr<FittedModel> load_svm(const json& s) { return LinearModel::load(s); }

}  // namespace psytriage::detail
