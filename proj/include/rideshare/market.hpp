#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <limits>
#include <vector>

#include "rideshare/config.hpp"
#include "rideshare/random.hpp"

namespace rideshare {

/// Driver availability per node and passenger platform shares per edge.
/// Diagonal (self-edge) entries of the share matrices are kept at zero.
struct AllocationState {
  Vector a_u, a_l;
  Matrix p_u, p_l, p_o;

  static AllocationState zeros(int n) {
    return {Vector::Zero(n), Vector::Zero(n), Matrix::Zero(n, n), Matrix::Zero(n, n),
            Matrix::Zero(n, n)};
  }
  int n_nodes() const { return static_cast<int>(a_u.size()); }
  bool operator==(const AllocationState&) const = default;
};

struct Populations {
  Vector passengers;
  Vector drivers;
  bool operator==(const Populations&) const = default;
};

struct MarketState {
  Populations populations;
  AllocationState allocation;
  int step_index = 0;
  bool operator==(const MarketState&) const = default;
};

/// Per-edge rate and commission for both platforms. Diagonals unused.
struct PriceSchedule {
  Matrix r_u, c_u, r_l, c_l;

  static PriceSchedule constant(int n, double rate, double commission) {
    PriceSchedule s{Matrix::Constant(n, n, rate), Matrix::Constant(n, n, commission),
                    Matrix::Constant(n, n, rate), Matrix::Constant(n, n, commission)};
    for (int i = 0; i < n; ++i) s.r_u(i, i) = s.c_u(i, i) = s.r_l(i, i) = s.c_l(i, i) = 0.0;
    return s;
  }
};

/// Observation length for an N-node graph.
constexpr int state_dim(int n) { return 3 * n * n + n; }
/// Per-platform action length for an N-node graph.
constexpr int action_dim(int n) { return 2 * n * n - 2 * n; }

/// Random initial market state.
///
/// Availabilities are drawn around 0.5 and passenger shares around 1/3 with
/// standard deviation 0.1, clipped, and repaired to satisfy total covering
/// and the per-edge simplex. `Sampler` needs `normal(mean, stddev)`.
template <typename Sampler>
MarketState init_state(const SimConfig& config, const ODGraph& graph, Sampler& rng) {
  validate_graph(graph);
  validate_config(config, graph.n_nodes);
  const int n = graph.n_nodes;

  MarketState s;
  s.populations = {config.init_passenger_pop, config.init_driver_pop};
  s.allocation = AllocationState::zeros(n);
  auto& a = s.allocation;
  for (int i = 0; i < n; ++i) {
    a.a_u[i] = std::clamp(rng.normal(0.5, 0.1), 0.0, 1.0);
    a.a_l[i] = 1.0 - a.a_u[i];
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double pu = std::clamp(rng.normal(1.0 / 3.0, 0.1), 0.0, 1.0);
      double pl = std::clamp(rng.normal(1.0 / 3.0, 0.1), 0.0, 1.0);
      double po = std::clamp(rng.normal(1.0 / 3.0, 0.1), 0.0, 1.0);
      const double total = pu + pl + po;
      if (total <= 0.0) {
        pu = pl = po = 1.0 / 3.0;
      } else {
        pu /= total;
        pl /= total;
        po = 1.0 - pu - pl;
      }
      a.p_u(i, j) = pu;
      a.p_l(i, j) = pl;
      a.p_o(i, j) = po;
    }
  }
  s.step_index = 0;
  return s;
}

/// Flatten a state into the observation vector
/// [P (N), D (N), a_u (N), a_l (N), p_u, p_l, p_o (N^2-N each, row-major off-diagonal)].
/// Population entries are divided by the initial total of their kind.
inline Vector state_vector(const MarketState& state, const SimConfig& config) {
  const int n = state.allocation.n_nodes();
  Vector out(state_dim(n));
  int k = 0;
  const double p_norm = config.initial_passengers();
  const double d_norm = config.initial_drivers();
  for (int i = 0; i < n; ++i) out[k++] = state.populations.passengers[i] / p_norm;
  for (int i = 0; i < n; ++i) out[k++] = state.populations.drivers[i] / d_norm;
  for (int i = 0; i < n; ++i) out[k++] = state.allocation.a_u[i];
  for (int i = 0; i < n; ++i) out[k++] = state.allocation.a_l[i];
  for (const Matrix* m : {&state.allocation.p_u, &state.allocation.p_l, &state.allocation.p_o})
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) out[k++] = (*m)(i, j);
  return out;
}

/// Inverse of state_vector for a given node count.
inline MarketState decode_state(const Vector& obs, int n, const SimConfig& config,
                                int step_index = 0) {
  if (obs.size() != state_dim(n)) throw UsageError("observation length does not match N");
  MarketState s;
  s.step_index = step_index;
  s.populations = {Vector(n), Vector(n)};
  s.allocation = AllocationState::zeros(n);
  int k = 0;
  const double p_norm = config.initial_passengers();
  const double d_norm = config.initial_drivers();
  for (int i = 0; i < n; ++i) s.populations.passengers[i] = obs[k++] * p_norm;
  for (int i = 0; i < n; ++i) s.populations.drivers[i] = obs[k++] * d_norm;
  for (int i = 0; i < n; ++i) s.allocation.a_u[i] = obs[k++];
  for (int i = 0; i < n; ++i) s.allocation.a_l[i] = obs[k++];
  for (Matrix* m : {&s.allocation.p_u, &s.allocation.p_l, &s.allocation.p_o})
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) (*m)(i, j) = obs[k++];
  return s;
}

struct Violation {
  std::string kind;      // "total-covering", "simplex", "range", "population", "diagonal"
  std::string location;  // e.g. "node 0" or "edge (0,1)"
  double magnitude = 0.0;
};

inline std::string describe(const Violation& v) {
  std::ostringstream os;
  os << v.kind << " at " << v.location << " (magnitude " << v.magnitude << ")";
  return os.str();
}

/// Every violated state invariant; empty means the state is valid.
inline std::vector<Violation> validate(const MarketState& state, double tol = 1e-9) {
  std::vector<Violation> out;
  const auto& a = state.allocation;
  const int n = a.n_nodes();
  auto node = [](int i) { return "node " + std::to_string(i); };
  auto edge = [](int i, int j) {
    return "edge (" + std::to_string(i) + "," + std::to_string(j) + ")";
  };
  auto range_excess = [](double x) -> double {
    if (!std::isfinite(x)) return INFINITY;
    return std::max({0.0, -x, x - 1.0});
  };

  if (state.populations.passengers.size() != n || state.populations.drivers.size() != n ||
      a.a_l.size() != n || a.p_u.rows() != n || a.p_l.rows() != n || a.p_o.rows() != n) {
    out.push_back({"shape", "state", static_cast<double>(n)});
    return out;
  }

  for (int i = 0; i < n; ++i) {
    for (double pop : {state.populations.passengers[i], state.populations.drivers[i]})
      if (!(pop >= -tol) || !std::isfinite(pop))
        out.push_back({"population", node(i), std::isfinite(pop) ? -pop : std::numeric_limits<double>::infinity()});
    for (double x : {a.a_u[i], a.a_l[i]})
      if (range_excess(x) > tol) out.push_back({"range", node(i), range_excess(x)});
    const double cover = std::abs(a.a_u[i] + a.a_l[i] - 1.0);
    if (!(cover <= tol)) out.push_back({"total-covering", node(i), cover});
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        const double diag = std::abs(a.p_u(i, i)) + std::abs(a.p_l(i, i)) + std::abs(a.p_o(i, i));
        if (diag > tol) out.push_back({"diagonal", edge(i, i), diag});
        continue;
      }
      for (double x : {a.p_u(i, j), a.p_l(i, j), a.p_o(i, j)})
        if (range_excess(x) > tol) out.push_back({"range", edge(i, j), range_excess(x)});
      const double sum = std::abs(a.p_u(i, j) + a.p_l(i, j) + a.p_o(i, j) - 1.0);
      if (!(sum <= tol)) out.push_back({"simplex", edge(i, j), sum});
    }
  }
  return out;
}

}  // namespace rideshare
