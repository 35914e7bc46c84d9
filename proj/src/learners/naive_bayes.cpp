#include <algorithm>
#include <numbers>

#include "fitted.hpp"

namespace psytriage::detail {

namespace {

// Gaussian class-conditionals for continuous features, Bernoulli for columns
// whose raw training values are all 0/1. Bernoulli columns are read back from
// standardized inputs by thresholding at the standardized image of 0.5.
class NaiveBayes final : public FittedModel {
 public:
  struct Feature {
    bool bernoulli = false;
    double cut = 0.0;                  // bernoulli: z > cut means 1
    std::array<double, 2> mean{};      // gaussian
    std::array<double, 2> var{};       // gaussian
    std::array<double, 2> p_one{};     // bernoulli
  };

  NaiveBayes(std::array<double, 2> log_prior, std::vector<Feature> features)
      : log_prior_(log_prior), features_(std::move(features)) {}

  double score(std::span<const double> z) const override {
    std::array<double, 2> ll = log_prior_;
    for (std::size_t j = 0; j < features_.size(); ++j) {
      const auto& f = features_[j];
      for (int c = 0; c < 2; ++c) {
        if (f.bernoulli) {
          const double p = f.p_one[c];
          ll[c] += z[j] > f.cut ? std::log(p) : std::log1p(-p);
        } else {
          const double d = z[j] - f.mean[c];
          ll[c] += -0.5 * (d * d / f.var[c] + std::log(2.0 * std::numbers::pi * f.var[c]));
        }
      }
    }
    return sigmoid(ll[1] - ll[0]);
  }

  json state() const override {
    json feats = json::array();
    for (const auto& f : features_) {
      feats.push_back(json{{"bernoulli", f.bernoulli},
                           {"cut", f.cut},
                           {"mean", f.mean},
                           {"var", f.var},
                           {"p_one", f.p_one}});
    }
    return json{{"log_prior", log_prior_}, {"features", feats}};
  }

  static std::unique_ptr<NaiveBayes> load(const json& s) {
    std::vector<Feature> feats;
    for (const auto& j : s.at("features")) {
      Feature f;
      f.bernoulli = j.at("bernoulli").get<bool>();
      f.cut = j.at("cut").get<double>();
      f.mean = j.at("mean").get<std::array<double, 2>>();
      f.var = j.at("var").get<std::array<double, 2>>();
      f.p_one = j.at("p_one").get<std::array<double, 2>>();
      feats.push_back(f);
    }
    return std::make_unique<NaiveBayes>(s.at("log_prior").get<std::array<double, 2>>(), std::move(feats));
  }

 private:
  std::array<double, 2> log_prior_;
  std::vector<Feature> features_;
};

}  // namespace

std::unique_ptr<FittedModel> fit_naive_bayes(const FitInput& in) {
  const double eps = in.params.at("var_smoothing");
  const double alpha = in.params.at("alpha");
  const std::size_t n = in.z.size();
  const std::size_t d = in.z.empty() ? 0 : in.z[0].size();
  std::array<double, 2> count{};
  for (int v : in.y) count[static_cast<std::size_t>(v)] += 1.0;
  std::array<double, 2> log_prior{std::log(count[0] / static_cast<double>(n)),
                                  std::log(count[1] / static_cast<double>(n))};

  std::vector<NaiveBayes::Feature> feats(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto& f = feats[j];
    f.bernoulli = std::all_of(in.raw.begin(), in.raw.end(),
                              [&](const auto& r) { return r[j] == 0.0 || r[j] == 1.0; });
    if (f.bernoulli) {
      f.cut = in.standardizer.apply(j, 0.5);
      std::array<double, 2> ones{};
      for (std::size_t i = 0; i < n; ++i)
        if (in.raw[i][j] == 1.0) ones[static_cast<std::size_t>(in.y[i])] += 1.0;
      for (std::size_t c = 0; c < 2; ++c) {
        double p = (ones[c] + alpha) / (count[c] + 2.0 * alpha);
        f.p_one[c] = std::clamp(p, 1e-12, 1.0 - 1e-12);
      }
    } else {
      std::array<double, 2> sum{}, sq{};
      for (std::size_t i = 0; i < n; ++i) sum[static_cast<std::size_t>(in.y[i])] += in.z[i][j];
      for (std::size_t c = 0; c < 2; ++c) f.mean[c] = sum[c] / count[c];
      for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(in.y[i]);
        sq[c] += (in.z[i][j] - f.mean[c]) * (in.z[i][j] - f.mean[c]);
      }
      for (std::size_t c = 0; c < 2; ++c) f.var[c] = std::max(sq[c] / count[c], 0.0) + std::max(eps, 1e-300);
    }
  }
  return std::make_unique<NaiveBayes>(log_prior, std::move(feats));
}

std::unique_ptr<FittedModel> load_naive_bayes(const json& s) { return NaiveBayes::load(s); }

}  // namespace psytriage::detail
