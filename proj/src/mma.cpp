#include "topoframe/mma.hpp"

#include <algorithm>
#include <cmath>

#include "topoframe/error.hpp"

namespace topoframe {

namespace {

constexpr double kRegularization = 1e-5;

struct Approximation {
  std::vector<double> p, q;
  double r = 0.0;  // value offset so that the approximation matches at x
};

// Convex separable approximation p/(U-y) + q/(y-L) + r of a function with
// value `value` and gradient `grad` at x.
Approximation approximate(std::span<const double> x, double value, std::span<const double> grad,
                          const std::vector<double>& low, const std::vector<double>& upp,
                          const std::vector<double>& range) {
  Approximation a;
  const std::size_t n = x.size();
  a.p.resize(n);
  a.q.resize(n);
  a.r = value;
  for (std::size_t j = 0; j < n; ++j) {
    const double ux = upp[j] - x[j], xl = x[j] - low[j];
    const double pos = std::max(grad[j], 0.0), neg = std::max(-grad[j], 0.0);
    const double reg = kRegularization / range[j];
    a.p[j] = ux * ux * (1.001 * pos + 0.001 * neg + reg);
    a.q[j] = xl * xl * (0.001 * pos + 1.001 * neg + reg);
    a.r -= a.p[j] / ux + a.q[j] / xl;
  }
  return a;
}

}  // namespace

Mma::Mma(std::vector<double> lower, std::vector<double> upper, MmaOptions options)
    : lower_(std::move(lower)), upper_(std::move(upper)), options_(options) {
  if (lower_.size() != upper_.size()) throw Error("MMA bounds have different sizes");
  for (std::size_t j = 0; j < lower_.size(); ++j)
    if (!(lower_[j] < upper_[j])) throw Error("MMA bounds must satisfy lower < upper");
}

void Mma::reset() { state_ = MmaState{}; }

std::vector<double> Mma::step(std::span<const double> x, double f, std::span<const double> df,
                              double g, std::span<const double> dg) {
  (void)f;
  const std::size_t n = lower_.size();
  if (x.size() != n || df.size() != n || (!dg.empty() && dg.size() != n))
    throw Error("MMA step: vector sizes do not match the bounds");
  const bool constrained = !dg.empty();

  std::vector<double> range(n);
  for (std::size_t j = 0; j < n; ++j) range[j] = upper_[j] - lower_[j];

  auto& st = state_;
  if (st.iteration < 2) {
    st.lower_asymptote.resize(n);
    st.upper_asymptote.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      st.lower_asymptote[j] = x[j] - options_.initial_asymptote * range[j];
      st.upper_asymptote[j] = x[j] + options_.initial_asymptote * range[j];
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const double trend = (x[j] - st.previous[j]) * (st.previous[j] - st.before_previous[j]);
      const double gamma = trend < 0 ? options_.contract : (trend > 0 ? options_.expand : 1.0);
      st.lower_asymptote[j] = x[j] - gamma * (st.previous[j] - st.lower_asymptote[j]);
      st.upper_asymptote[j] = x[j] + gamma * (st.upper_asymptote[j] - st.previous[j]);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double lo_gap = options_.min_gap * range[j], hi_gap = options_.max_gap * range[j];
    st.lower_asymptote[j] = std::clamp(st.lower_asymptote[j], x[j] - hi_gap, x[j] - lo_gap);
    st.upper_asymptote[j] = std::clamp(st.upper_asymptote[j], x[j] + lo_gap, x[j] + hi_gap);
  }
  const auto& low = st.lower_asymptote;
  const auto& upp = st.upper_asymptote;

  std::vector<double> alpha(n), beta(n);
  for (std::size_t j = 0; j < n; ++j) {
    alpha[j] = std::max({lower_[j], low[j] + options_.albefa * (x[j] - low[j]),
                         x[j] - options_.move_limit * range[j]});
    beta[j] = std::min({upper_[j], upp[j] - options_.albefa * (upp[j] - x[j]),
                        x[j] + options_.move_limit * range[j]});
    alpha[j] = std::min(alpha[j], x[j]);
    beta[j] = std::max(beta[j], x[j]);
  }

  const Approximation obj = approximate(x, f, df, low, upp, range);
  Approximation con;
  if (constrained) con = approximate(x, g, dg, low, upp, range);

  // Minimiser of the Lagrangian for a fixed multiplier.
  std::vector<double> y(n);
  const auto primal = [&](double lambda) {
    for (std::size_t j = 0; j < n; ++j) {
      const double pj = obj.p[j] + (constrained ? lambda * con.p[j] : 0.0);
      const double qj = obj.q[j] + (constrained ? lambda * con.q[j] : 0.0);
      const double sp = std::sqrt(pj), sq = std::sqrt(qj);
      const double yj = (sp * low[j] + sq * upp[j]) / (sp + sq);
      y[j] = std::clamp(yj, alpha[j], beta[j]);
    }
  };
  const auto constraint_value = [&]() {
    double v = con.r;
    for (std::size_t j = 0; j < n; ++j) v += con.p[j] / (upp[j] - y[j]) + con.q[j] / (y[j] - low[j]);
    return v;
  };

  double lambda = 0.0;
  if (constrained) {
    primal(0.0);
    if (constraint_value() > 0.0) {
      // Linearised feasibility over the full box decides whether the problem
      // can be satisfied at all.
      double best = g;
      for (std::size_t j = 0; j < n; ++j)
        best += std::min(dg[j] * (lower_[j] - x[j]), dg[j] * (upper_[j] - x[j]));
      if (best > 0.0) throw Error("infeasible bounds: constraint cannot be met inside the box");

      double lo = 0.0, hi = 1.0;
      int expansions = 0;
      for (primal(hi); constraint_value() > 0.0 && expansions < 400; primal(hi)) {
        lo = hi;
        hi *= 2.0;
        ++expansions;
      }
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        primal(mid);
        if (constraint_value() > 0.0) lo = mid;
        else hi = mid;
      }
      lambda = hi;
    }
  }
  primal(lambda);

  st.multiplier = lambda;
  st.before_previous = st.previous.empty() ? std::vector<double>(x.begin(), x.end()) : st.previous;
  st.previous.assign(x.begin(), x.end());
  ++st.iteration;
  return y;
}

}  // namespace topoframe
