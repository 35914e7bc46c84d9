#include <algorithm>
#include <numeric>

#include "fitted.hpp"
#include "psytriage/rng.hpp"

namespace psytriage::detail {

namespace {

struct GrowOptions {
  std::size_t max_depth;  // 0 = unbounded
  std::size_t min_samples_leaf;
  std::size_t max_features;
};

double gini(double pos, double n) {
  if (n <= 0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

class TreeGrower {
 public:
  TreeGrower(const Matrix& z, std::span<const int> y, const GrowOptions& opt, Rng& rng)
      : z_(z), y_(y), opt_(opt), rng_(rng), features_(z.empty() ? 0 : z[0].size()) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  Tree grow(std::vector<std::size_t> sample) {
    Tree tree;
    build(tree, sample, 0);
    return tree;
  }

 private:
  int build(Tree& tree, std::vector<std::size_t>& idx, std::size_t depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double pos = 0;
    for (auto i : idx) pos += y_[i];
    const double n = static_cast<double>(idx.size());
    tree.nodes.back().value = pos * 2.0 >= n ? 1.0 : 0.0;

    const bool pure = pos == 0 || pos == n;
    const bool depth_limit = opt_.max_depth > 0 && depth >= opt_.max_depth;
    if (pure || depth_limit || idx.size() < 2 * opt_.min_samples_leaf) return id;

    // sample candidate features without replacement
    for (std::size_t k = 0; k < opt_.max_features; ++k) {
      const auto j = k + static_cast<std::size_t>(rng_.below(features_.size() - k));
      std::swap(features_[k], features_[j]);
    }

    const double parent = gini(pos, n);
    double best_impurity = parent;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> col(idx.size());
    for (std::size_t k = 0; k < opt_.max_features; ++k) {
      const std::size_t f = features_[k];
      for (std::size_t r = 0; r < idx.size(); ++r) col[r] = {z_[idx[r]][f], y_[idx[r]]};
      std::sort(col.begin(), col.end());
      double left_pos = 0;
      for (std::size_t r = 0; r + 1 < col.size(); ++r) {
        left_pos += col[r].second;
        if (col[r].first == col[r + 1].first) continue;
        const double nl = static_cast<double>(r + 1);
        const double nr = n - nl;
        if (nl < static_cast<double>(opt_.min_samples_leaf) || nr < static_cast<double>(opt_.min_samples_leaf))
          continue;
        const double impurity = (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / n;
        if (impurity < best_impurity - 1e-12) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (col[r].first + col[r + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx)
      (z_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    tree.nodes[static_cast<std::size_t>(id)].feature = best_feature;
    tree.nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    const int l = build(tree, left, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    const int r = build(tree, right, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Matrix& z_;
  std::span<const int> y_;
  GrowOptions opt_;
  Rng& rng_;
  std::vector<std::size_t> features_;
};

class Forest final : public FittedModel {
 public:
  explicit Forest(std::vector<Tree> trees) : trees_(std::move(trees)) {}

  /// Fraction of trees voting positive.
  double score(std::span<const double> z) const override {
    double votes = 0.0;
    for (const auto& t : trees_) votes += t.evaluate(z);
    return votes / static_cast<double>(trees_.size());
  }

  json state() const override {
    json trees = json::array();
    for (const auto& t : trees_) trees.push_back(tree_to_json(t));
    return json{{"trees", trees}};
  }

 private:
  std::vector<Tree> trees_;
};

}  // namespace

std::unique_ptr<FittedModel> fit_forest(const FitInput& in) {
  const std::size_t n = in.z.size();
  const std::size_t d = in.z[0].size();
  const auto n_trees = static_cast<std::size_t>(in.params.at("n_trees"));
  GrowOptions opt{static_cast<std::size_t>(in.params.at("max_depth")),
                  static_cast<std::size_t>(in.params.at("min_samples_leaf")),
                  static_cast<std::size_t>(in.params.at("max_features"))};
  if (opt.max_features == 0)
    opt.max_features = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
  opt.max_features = std::min(opt.max_features, d);

  std::vector<Tree> trees(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    Rng rng = Rng::derive(in.seed, t);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
    TreeGrower grower(in.z, in.y, opt, rng);
    trees[t] = grower.grow(std::move(sample));
  }
  return std::make_unique<Forest>(std::move(trees));
}

std::unique_ptr<FittedModel> load_forest(const json& s) {
  std::vector<Tree> trees;
  for (const auto& t : s.at("trees")) trees.push_back(tree_from_json(t));
  if (trees.empty()) throw Error(ErrorCode::Parse, "forest has no trees");
  return std::make_unique<Forest>(std::move(trees));
}

}  // namespace psytriage::detail
