#include "asgld/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace asgld::ot {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::vector<int> solve_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (n == 0 || cost.cols() != n)
    throw std::invalid_argument("solve_assignment: cost matrix must be square and nonempty");
  if (!cost.allFinite())
    throw std::invalid_argument("solve_assignment: cost matrix has non-finite entries");

  // 1-based duals; p[j] = row matched to column j, column 0 is the virtual
  // start of each augmenting search.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  std::vector<double> minv(static_cast<std::size_t>(n) + 1);
  std::vector<char> used(static_cast<std::size_t>(n) + 1);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
  return row_to_col;
}

double assignment_cost(const Matrix& cost, const std::vector<int>& row_to_col) {
  if (static_cast<Eigen::Index>(row_to_col.size()) != cost.rows())
    throw std::invalid_argument("assignment_cost: assignment length mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    const int j = row_to_col[static_cast<std::size_t>(i)];
    if (j < 0 || j >= cost.cols())
      throw std::invalid_argument("assignment_cost: column index out of range");
    total += cost(i, j);
  }
  return total;
}

namespace {

// Rounds a nonnegative weight vector to integer units summing exactly to
// `total_units`; residual drift from rounding lands on the largest entry.
std::vector<std::int64_t> to_units(const Vector& w, double mass,
                                   std::int64_t total_units) {
  const Eigen::Index n = w.size();
  std::vector<std::int64_t> units(static_cast<std::size_t>(n), 0);
  std::int64_t sum = 0;
  Eigen::Index largest = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    units[static_cast<std::size_t>(i)] =
        std::llround(w[i] / mass * static_cast<double>(total_units));
    sum += units[static_cast<std::size_t>(i)];
    if (w[i] > w[largest]) largest = i;
  }
  units[static_cast<std::size_t>(largest)] += total_units - sum;
  if (units[static_cast<std::size_t>(largest)] < 0)
    throw numerical_error("transport_cost: weight quantization failed");
  return units;
}

}  // namespace

double transport_cost(const Matrix& cost, const Vector& supply,
                      const Vector& demand) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n == 0 || m == 0)
    throw std::invalid_argument("transport_cost: empty cost matrix");
  require_dim(supply, n, "supply");
  require_dim(demand, m, "demand");
  if ((supply.array() < 0.0).any() || (demand.array() < 0.0).any())
    throw std::invalid_argument("transport_cost: negative mass");
  if (!cost.allFinite() || (cost.array() < 0.0).any())
    throw std::invalid_argument("transport_cost: costs must be finite and nonnegative");
  const double total_supply = supply.sum();
  const double total_demand = demand.sum();
  if (total_supply <= 0.0 || total_demand <= 0.0)
    throw std::invalid_argument("transport_cost: zero total mass");
  if (std::abs(total_supply - total_demand) >
      1e-9 * std::max(total_supply, total_demand))
    throw std::invalid_argument("transport_cost: supply/demand mass mismatch");

  // Both sides are normalized and quantized to integer units so that capacity
  // arithmetic is exact: every augmentation saturates at least one arc and the
  // loop stops when the integer flow hits kUnits, with no epsilon tuning.
  constexpr std::int64_t kUnits = std::int64_t{1} << 52;
  const std::vector<std::int64_t> sup = to_units(supply, total_supply, kUnits);
  const std::vector<std::int64_t> dem = to_units(demand, total_demand, kUnits);

  // Node layout: 0 = source, 1..n supplies, n+1..n+m demands, n+m+1 = sink.
  const int N = n + m + 2;
  const int src = 0, snk = n + m + 1;

  struct Edge {
    int to;
    std::int64_t cap;
    double cost;
    int rev;
  };
  std::vector<std::vector<Edge>> g(static_cast<std::size_t>(N));
  auto add_edge = [&](int a, int b, std::int64_t cap, double c) {
    g[static_cast<std::size_t>(a)].push_back(
        {b, cap, c, static_cast<int>(g[static_cast<std::size_t>(b)].size())});
    g[static_cast<std::size_t>(b)].push_back(
        {a, 0, -c, static_cast<int>(g[static_cast<std::size_t>(a)].size()) - 1});
  };
  for (int i = 0; i < n; ++i) add_edge(src, 1 + i, sup[static_cast<std::size_t>(i)], 0.0);
  for (int j = 0; j < m; ++j) add_edge(1 + n + j, snk, dem[static_cast<std::size_t>(j)], 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) add_edge(1 + i, 1 + n + j, kUnits, cost(i, j));

  // Successive shortest paths with Johnson potentials. Original costs are
  // nonnegative, so zero initial potentials are valid. Reduced costs are
  // clamped at zero: exact arithmetic keeps them nonnegative on reachable
  // nodes, and nodes that become unreachable in the residual graph stay
  // unreachable, so the clamp only absorbs roundoff and keeps Dijkstra on
  // genuinely nonnegative weights.
  std::vector<double> pot(static_cast<std::size_t>(N), 0.0);
  std::vector<double> dist(static_cast<std::size_t>(N));
  std::vector<int> pv(static_cast<std::size_t>(N)), pe(static_cast<std::size_t>(N));

  std::int64_t flow = 0;
  const long max_rounds = 64L * N + 4096L;
  for (long round = 0; flow < kUnits; ++round) {
    if (round >= max_rounds)
      throw numerical_error("transport_cost: augmentation budget exhausted");
    std::fill(dist.begin(), dist.end(), kInf);
    dist[static_cast<std::size_t>(src)] = 0.0;
    using QNode = std::pair<double, int>;
    std::priority_queue<QNode, std::vector<QNode>, std::greater<>> pq;
    pq.emplace(0.0, src);
    while (!pq.empty()) {
      auto [dcur, ucur] = pq.top();
      pq.pop();
      if (dcur > dist[static_cast<std::size_t>(ucur)]) continue;
      for (std::size_t k = 0; k < g[static_cast<std::size_t>(ucur)].size(); ++k) {
        const Edge& e = g[static_cast<std::size_t>(ucur)][k];
        if (e.cap <= 0) continue;
        const double rc = std::max(0.0, e.cost + pot[static_cast<std::size_t>(ucur)] -
                                            pot[static_cast<std::size_t>(e.to)]);
        const double nd = dcur + rc;
        if (nd < dist[static_cast<std::size_t>(e.to)]) {
          dist[static_cast<std::size_t>(e.to)] = nd;
          pv[static_cast<std::size_t>(e.to)] = ucur;
          pe[static_cast<std::size_t>(e.to)] = static_cast<int>(k);
          pq.emplace(nd, e.to);
        }
      }
    }
    if (!std::isfinite(dist[static_cast<std::size_t>(snk)]))
      throw numerical_error("transport_cost: sink unreachable before saturation");
    for (int vtx = 0; vtx < N; ++vtx)
      if (std::isfinite(dist[static_cast<std::size_t>(vtx)]))
        pot[static_cast<std::size_t>(vtx)] += dist[static_cast<std::size_t>(vtx)];

    std::int64_t push = kUnits - flow;
    for (int vtx = snk; vtx != src; vtx = pv[static_cast<std::size_t>(vtx)]) {
      const Edge& e = g[static_cast<std::size_t>(pv[static_cast<std::size_t>(vtx)])]
                       [static_cast<std::size_t>(pe[static_cast<std::size_t>(vtx)])];
      push = std::min(push, e.cap);
    }
    for (int vtx = snk; vtx != src; vtx = pv[static_cast<std::size_t>(vtx)]) {
      Edge& e = g[static_cast<std::size_t>(pv[static_cast<std::size_t>(vtx)])]
                 [static_cast<std::size_t>(pe[static_cast<std::size_t>(vtx)])];
      e.cap -= push;
      g[static_cast<std::size_t>(vtx)][static_cast<std::size_t>(e.rev)].cap += push;
    }
    flow += push;
  }

  // Reading the objective off the final integer flows avoids accumulating
  // rounding error across augmentations.
  const double inv_units = 1.0 / static_cast<double>(kUnits);
  double objective = 0.0;
  for (int j = 0; j < m; ++j) {
    for (const Edge& e : g[static_cast<std::size_t>(1 + n + j)]) {
      if (e.to >= 1 && e.to <= n && e.cap > 0)
        objective += static_cast<double>(e.cap) * inv_units * cost(e.to - 1, j);
    }
  }
  return objective;
}

}  // namespace asgld::ot
