#include <algorithm>

#include "fitted.hpp"

namespace psytriage::detail {

namespace {

class Knn final : public FittedModel {
 public:
  Knn(Matrix points, std::vector<int> labels, std::size_t k)
      : points_(std::move(points)), labels_(std::move(labels)), k_(std::min(k, points_.size())) {}

  // Fraction of positive labels among the k nearest points (Euclidean);
  // equal distances are ordered by training index.
  double score(std::span<const double> z) const override {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      double s = 0.0;
      const auto& p = points_[i];
      for (std::size_t j = 0; j < z.size(); ++j) s += (p[j] - z[j]) * (p[j] - z[j]);
      d.emplace_back(s, i);
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_), d.end());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < k_; ++i) pos += labels_[d[i].second] == 1;
    return static_cast<double>(pos) / static_cast<double>(k_);
  }

  json state() const override {
    return json{{"k", k_}, {"points", points_}, {"labels", labels_}};
  }

 private:
  Matrix points_;
  std::vector<int> labels_;
  std::size_t k_;
};

}  // namespace

std::unique_ptr<FittedModel> fit_knn(const FitInput& in) {
  return std::make_unique<Knn>(in.z, std::vector<int>(in.y.begin(), in.y.end()),
                               static_cast<std::size_t>(in.params.at("k")));
}

std::unique_ptr<FittedModel> load_knn(const json& s) {
  return std::make_unique<Knn>(s.at("points").get<Matrix>(), s.at("labels").get<std::vector<int>>(),
                               s.at("k").get<std::size_t>());
}

}  // namespace psytriage::detail
