#include "gbt.hpp"

#include <algorithm>
#include <numeric>

#include "umlr/kernels.hpp"

namespace umlr {

double Tree::predict_row(const Matrix& x, Index row) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& cur = nodes[static_cast<std::size_t>(node)];
    node = x(row, cur.feature) <= cur.threshold ? cur.left : cur.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

namespace gbt {
namespace {

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct Accum {
  double sum = 0.0;
  Index count = 0;
  double last_value = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::vector<Index>>& sorted, const GbtParams& params)
      : x_(x), sorted_(sorted), params_(params), node_of_(static_cast<std::size_t>(x.rows()), 0) {}

  Tree build(const Vector& resid) {
    Tree tree;
    std::fill(node_of_.begin(), node_of_.end(), 0);
    tree.nodes.push_back(TreeNode{});
    const auto n = static_cast<std::size_t>(x_.rows());

    std::vector<int> frontier{0};
    std::vector<double> node_sum{resid.sum()};
    std::vector<Index> node_count{x_.rows()};

    for (int depth = 0; depth < params_.max_depth && !frontier.empty(); ++depth) {
      // slot_of[node] gives the frontier position, -1 for nodes not splitting.
      std::vector<int> slot_of(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
      }
      std::vector<Candidate> best(frontier.size());
      std::vector<Accum> acc(frontier.size());

      for (Index j = 0; j < x_.cols(); ++j) {
        std::fill(acc.begin(), acc.end(), Accum{});
        for (Index i : sorted_[static_cast<std::size_t>(j)]) {
          const int slot = slot_of[static_cast<std::size_t>(node_of_[static_cast<std::size_t>(i)])];
          if (slot < 0) continue;
          const auto su = static_cast<std::size_t>(slot);
          Accum& a = acc[su];
          const double v = x_(i, j);
          const Index total = node_count[su];
          if (a.count >= params_.min_samples_leaf && total - a.count >= params_.min_samples_leaf &&
              v > a.last_value) {
            const double sl = a.sum;
            const double sr = node_sum[su] - sl;
            const double nl = static_cast<double>(a.count);
            const double nr = static_cast<double>(total - a.count);
            const double gain =
                sl * sl / nl + sr * sr / nr - node_sum[su] * node_sum[su] / static_cast<double>(total);
            if (gain > best[su].gain) {
              double thr = 0.5 * (a.last_value + v);
              if (!(thr < v)) thr = a.last_value;
              best[su] = Candidate{gain, static_cast<int>(j), thr};
            }
          }
          a.sum += resid[i];
          ++a.count;
          a.last_value = v;
        }
      }

      std::vector<int> next_frontier;
      std::vector<double> next_sum;
      std::vector<Index> next_count;
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        if (best[s].feature < 0) continue;
        const int parent = frontier[s];
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});
        TreeNode& node = tree.nodes[static_cast<std::size_t>(parent)];
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.left = left;
        node.right = left + 1;
        next_frontier.push_back(left);
        next_frontier.push_back(left + 1);
        next_sum.push_back(0.0);
        next_sum.push_back(0.0);
        next_count.push_back(0);
        next_count.push_back(0);
      }
      if (next_frontier.empty()) break;
      std::vector<int> child_slot(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < next_frontier.size(); ++s) {
        child_slot[static_cast<std::size_t>(next_frontier[s])] = static_cast<int>(s);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_of_[i])];
        if (node.feature < 0) continue;
        const int child =
            x_(static_cast<Index>(i), node.feature) <= node.threshold ? node.left : node.right;
        node_of_[i] = child;
        const auto cs = static_cast<std::size_t>(child_slot[static_cast<std::size_t>(child)]);
        next_sum[cs] += resid[static_cast<Index>(i)];
        ++next_count[cs];
      }
      frontier = std::move(next_frontier);
      node_sum = std::move(next_sum);
      node_count = std::move(next_count);
    }

    // Leaf values: mean residual of the leaf, scaled by the learning rate.
    std::vector<double> leaf_sum(tree.nodes.size(), 0.0);
    std::vector<Index> leaf_count(tree.nodes.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      leaf_sum[static_cast<std::size_t>(node_of_[i])] += resid[static_cast<Index>(i)];
      ++leaf_count[static_cast<std::size_t>(node_of_[i])];
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      if (tree.nodes[k].feature < 0 && leaf_count[k] > 0) {
        tree.nodes[k].value =
            params_.learning_rate * leaf_sum[k] / static_cast<double>(leaf_count[k]);
      }
    }
    return tree;
  }

  // Leaf reached by each training row in the last built tree.
  const std::vector<int>& node_of() const { return node_of_; }

 private:
  const Matrix& x_;
  const std::vector<std::vector<Index>>& sorted_;
  const GbtParams& params_;
  std::vector<int> node_of_;
};

}  // namespace

TreeEnsemble fit(const GbtParams& params, const Matrix& x, const Vector& y) {
  const Index n = x.rows();
  const auto nn = static_cast<std::size_t>(n);
  std::vector<std::vector<Index>> sorted(static_cast<std::size_t>(x.cols()));
  for (Index j = 0; j < x.cols(); ++j) {
    auto& idx = sorted[static_cast<std::size_t>(j)];
    idx.resize(nn);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return x(a, j) < x(b, j); });
  }

  TreeEnsemble model;
  model.base = mean(y);
  model.learning_rate = params.learning_rate;
  Vector resid = y.array() - model.base;
  const auto& k = kernels::active();
  model.train_mse.push_back(k.sum_sq(resid.data(), nn) / static_cast<double>(n));

  TreeBuilder builder(x, sorted, params);
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int round = 0; round < params.n_trees; ++round) {
    Tree tree = builder.build(resid);
    const auto& leaf = builder.node_of();
    for (std::size_t i = 0; i < nn; ++i) {
      resid[static_cast<Index>(i)] -= tree.nodes[static_cast<std::size_t>(leaf[i])].value;
    }
    model.train_mse.push_back(k.sum_sq(resid.data(), nn) / static_cast<double>(n));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

Vector predict(const TreeEnsemble& model, const Matrix& x) {
  Vector out = Vector::Constant(x.rows(), model.base);
  for (const Tree& tree : model.trees) {
    for (Index i = 0; i < x.rows(); ++i) out[i] += tree.predict_row(x, i);
  }
  return out;
}

}  // namespace gbt
}  // namespace umlr
