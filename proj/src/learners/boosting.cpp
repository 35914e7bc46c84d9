#include <algorithm>
#include <numeric>

#include "fitted.hpp"

namespace psytriage::detail {

namespace {

struct BoostOptions {
  double eta;
  std::size_t max_depth;
  double lambda;
  double min_child_weight;
  double gamma;
};

// Second-order regression tree on gradient statistics, exact greedy splits.
class BoostTreeGrower {
 public:
  BoostTreeGrower(const Matrix& z, const std::vector<double>& g, const std::vector<double>& h,
                  const BoostOptions& opt)
      : z_(z), g_(g), h_(h), opt_(opt) {}

  Tree grow() {
    Tree tree;
    std::vector<std::size_t> idx(z_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    build(tree, idx, 0);
    return tree;
  }

 private:
  double gain_term(double G, double H) const { return G * G / (H + opt_.lambda); }

  int build(Tree& tree, std::vector<std::size_t>& idx, std::size_t depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double G = 0, H = 0;
    for (auto i : idx) {
      G += g_[i];
      H += h_[i];
    }
    tree.nodes.back().value = -opt_.eta * G / (H + opt_.lambda);
    if (depth >= opt_.max_depth || idx.size() < 2) return id;

    const std::size_t d = z_[0].size();
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order = idx;
    for (std::size_t f = 0; f < d; ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return z_[a][f] < z_[b][f] || (z_[a][f] == z_[b][f] && a < b);
      });
      double GL = 0, HL = 0;
      for (std::size_t r = 0; r + 1 < order.size(); ++r) {
        GL += g_[order[r]];
        HL += h_[order[r]];
        const double v = z_[order[r]][f];
        const double next = z_[order[r + 1]][f];
        if (v == next) continue;
        const double GR = G - GL, HR = H - HL;
        if (HL < opt_.min_child_weight || HR < opt_.min_child_weight) continue;
        const double gain =
            0.5 * (gain_term(GL, HL) + gain_term(GR, HR) - gain_term(G, H)) - opt_.gamma;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (v + next);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx)
      (z_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(i);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    const int l = build(tree, left, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    const int r = build(tree, right, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Matrix& z_;
  const std::vector<double>& g_;
  const std::vector<double>& h_;
  BoostOptions opt_;
};

class Booster final : public FittedModel {
 public:
  Booster(double base, std::vector<Tree> trees, std::vector<double> trace)
      : base_(base), trees_(std::move(trees)), trace_(std::move(trace)) {}

  double margin(std::span<const double> z) const {
    double m = base_;
    for (const auto& t : trees_) m += t.evaluate(z);
    return m;
  }
  double score(std::span<const double> z) const override { return sigmoid(margin(z)); }
  std::vector<double> trace() const override { return trace_; }

  json state() const override {
    json trees = json::array();
    for (const auto& t : trees_) trees.push_back(tree_to_json(t));
    return json{{"base_margin", base_}, {"trees", trees}, {"trace", trace_}};
  }

 private:
  double base_;
  std::vector<Tree> trees_;
  std::vector<double> trace_;
};

double mean_logloss(const std::vector<double>& m, std::span<const int> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += softplus(m[i]) - y[i] * m[i];
  return s / static_cast<double>(m.size());
}

}  // namespace

std::unique_ptr<FittedModel> fit_boosting(const FitInput& in) {
  const std::size_t n = in.z.size();
  const auto rounds = static_cast<std::size_t>(in.params.at("n_rounds"));
  const BoostOptions opt{in.params.at("eta"), static_cast<std::size_t>(in.params.at("max_depth")),
                         in.params.at("lambda"), in.params.at("min_child_weight"),
                         in.params.at("gamma")};

  double pos = 0;
  for (int v : in.y) pos += v;
  const double prior = pos / static_cast<double>(n);
  const double base = std::log(prior / (1.0 - prior));

  std::vector<double> m(n, base), g(n), h(n);
  std::vector<double> trace{mean_logloss(m, in.y)};
  std::vector<Tree> trees;
  trees.reserve(rounds);
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(m[i]);
      g[i] = p - in.y[i];
      h[i] = std::max(p * (1.0 - p), 1e-16);
    }
    BoostTreeGrower grower(in.z, g, h, opt);
    trees.push_back(grower.grow());
    for (std::size_t i = 0; i < n; ++i) m[i] += trees.back().evaluate(in.z[i]);
    trace.push_back(mean_logloss(m, in.y));
  }
  return std::make_unique<Booster>(base, std::move(trees), std::move(trace));
}

std::unique_ptr<FittedModel> load_boosting(const json& s) {
  std::vector<Tree> trees;
  for (const auto& t : s.at("trees")) trees.push_back(tree_from_json(t));
  return std::make_unique<Booster>(s.at("base_margin").get<double>(), std::move(trees),
                                   s.value("trace", std::vector<double>{}));
}

}  // namespace psytriage::detail
