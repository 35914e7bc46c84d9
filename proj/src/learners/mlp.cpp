#include <algorithm>
#include <numeric>

#include "fitted.hpp"
#include "psytriage/rng.hpp"

namespace psytriage {

namespace mlp {

std::vector<double> Params::flatten() const {
  std::vector<double> out;
  out.reserve(w1.size() + b1.size() + w2.size() + 1);
  out.insert(out.end(), w1.begin(), w1.end());
  out.insert(out.end(), b1.begin(), b1.end());
  out.insert(out.end(), w2.begin(), w2.end());
  out.push_back(b2);
  return out;
}

void Params::assign(std::span<const double> flat) {
  const std::size_t expected = hidden * inputs + 2 * hidden + 1;
  if (flat.size() != expected) throw Error(ErrorCode::LengthMismatch, "parameter vector has wrong length");
  auto it = flat.begin();
  w1.assign(it, it + static_cast<std::ptrdiff_t>(hidden * inputs));
  it += static_cast<std::ptrdiff_t>(hidden * inputs);
  b1.assign(it, it + static_cast<std::ptrdiff_t>(hidden));
  it += static_cast<std::ptrdiff_t>(hidden);
  w2.assign(it, it + static_cast<std::ptrdiff_t>(hidden));
  it += static_cast<std::ptrdiff_t>(hidden);
  b2 = *it;
}

namespace {

double hidden_pass(const Params& p, std::span<const double> x, std::vector<double>& a) {
  a.resize(p.hidden);
  double out = p.b2;
  for (std::size_t k = 0; k < p.hidden; ++k) {
    double s = p.b1[k];
    const double* row = p.w1.data() + k * p.inputs;
    for (std::size_t j = 0; j < p.inputs; ++j) s += row[j] * x[j];
    a[k] = s > 0 ? s : 0.0;
    out += p.w2[k] * a[k];
  }
  return out;
}

}  // namespace

double forward(const Params& p, std::span<const double> x) {
  std::vector<double> a;
  return detail::sigmoid(hidden_pass(p, x, a));
}

double loss_and_gradient(const Params& p, const std::vector<std::vector<double>>& x,
                         std::span<const int> y, double l2, Params* grad) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "rows and labels differ in length");
  if (grad) {
    grad->inputs = p.inputs;
    grad->hidden = p.hidden;
    grad->w1.assign(p.w1.size(), 0.0);
    grad->b1.assign(p.b1.size(), 0.0);
    grad->w2.assign(p.w2.size(), 0.0);
    grad->b2 = 0.0;
  }
  const double inv_n = x.empty() ? 0.0 : 1.0 / static_cast<double>(x.size());
  double loss = 0.0;
  std::vector<double> a;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = hidden_pass(p, x[i], a);
    loss += detail::softplus(m) - y[i] * m;
    if (!grad) continue;
    const double r = (detail::sigmoid(m) - y[i]) * inv_n;
    grad->b2 += r;
    for (std::size_t k = 0; k < p.hidden; ++k) {
      grad->w2[k] += r * a[k];
      if (a[k] <= 0) continue;
      const double back = r * p.w2[k];
      grad->b1[k] += back;
      double* row = grad->w1.data() + k * p.inputs;
      for (std::size_t j = 0; j < p.inputs; ++j) row[j] += back * x[i][j];
    }
  }
  loss *= inv_n;
  double sq = 0.0;
  for (double w : p.w1) sq += w * w;
  for (double w : p.w2) sq += w * w;
  loss += 0.5 * l2 * sq;
  if (grad) {
    for (std::size_t k = 0; k < p.w1.size(); ++k) grad->w1[k] += l2 * p.w1[k];
    for (std::size_t k = 0; k < p.w2.size(); ++k) grad->w2[k] += l2 * p.w2[k];
  }
  return loss;
}

}  // namespace mlp

namespace detail {

namespace {

class Mlp final : public FittedModel {
 public:
  explicit Mlp(mlp::Params p) : p_(std::move(p)) {}
  double score(std::span<const double> z) const override { return mlp::forward(p_, z); }
  json state() const override {
    return json{{"inputs", p_.inputs}, {"hidden", p_.hidden}, {"params", p_.flatten()}};
  }

 private:
  mlp::Params p_;
};

}  // namespace

// He-initialized input layer, zero output layer, mini-batch SGD.
std::unique_ptr<FittedModel> fit_mlp(const FitInput& in) {
  const std::size_t n = in.z.size();
  mlp::Params p;
  p.inputs = in.z[0].size();
  p.hidden = static_cast<std::size_t>(in.params.at("hidden"));
  const double lr = in.params.at("learning_rate");
  const auto epochs = static_cast<std::size_t>(in.params.at("epochs"));
  const auto batch = static_cast<std::size_t>(in.params.at("batch_size"));
  const double l2 = in.params.at("l2");

  Rng init = Rng::derive(in.seed, 0);
  const double sd = std::sqrt(2.0 / static_cast<double>(p.inputs));
  p.w1.resize(p.hidden * p.inputs);
  for (auto& w : p.w1) w = init.normal(0.0, sd);
  p.b1.assign(p.hidden, 0.0);
  p.w2.assign(p.hidden, 0.0);

  std::vector<std::size_t> order(n);
  Matrix xb;
  std::vector<int> yb;
  mlp::Params g;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(in.seed, e + 1);
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      xb.clear();
      yb.clear();
      for (std::size_t r = start; r < end; ++r) {
        xb.push_back(in.z[order[r]]);
        yb.push_back(in.y[order[r]]);
      }
      mlp::loss_and_gradient(p, xb, yb, l2, &g);
      for (std::size_t k = 0; k < p.w1.size(); ++k) p.w1[k] -= lr * g.w1[k];
      for (std::size_t k = 0; k < p.hidden; ++k) {
        p.b1[k] -= lr * g.b1[k];
        p.w2[k] -= lr * g.w2[k];
      }
      p.b2 -= lr * g.b2;
    }
  }
  return std::make_unique<Mlp>(std::move(p));
}

std::unique_ptr<FittedModel> load_mlp(const json& s) {
  mlp::Params p;
  p.inputs = s.at("inputs").get<std::size_t>();
  p.hidden = s.at("hidden").get<std::size_t>();
  p.assign(s.at("params").get<std::vector<double>>());
  return std::make_unique<Mlp>(std::move(p));
}

}  // namespace detail

}  // namespace psytriage
