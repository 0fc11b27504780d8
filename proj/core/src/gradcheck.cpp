#include "hypmil/gradcheck.hpp"

#include <cmath>
#include <string>

#include "hypmil/error.hpp"

namespace hypmil::ad {

namespace {

double evaluate(const ScalarFn& f, std::span<const Tensor> params) {
  Graph g;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(g.input(p));
  return f(g, leaves).item();
}

}  // namespace

GradCheckReport gradient_check(const ScalarFn& f, std::span<const Tensor> params, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "finite-difference step must be positive");

  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(g.input(p));
    Var root = f(g, leaves);
    g.backward(root);
    for (const auto& v : leaves) analytic.push_back(g.grad(v));
  }

  GradCheckReport report;
  std::vector<Tensor> probe(params.begin(), params.end());
  std::size_t flat = 0;
  for (std::size_t t = 0; t < probe.size(); ++t) {
    if (!probe[t].requires_grad()) {
      flat += probe[t].size();
      continue;
    }
    for (std::size_t i = 0; i < probe[t].size(); ++i, ++flat) {
      const double x0 = probe[t][i];
      double up = 0.0, down = 0.0;
      try {
        probe[t][i] = x0 + h;
        up = evaluate(f, probe);
        probe[t][i] = x0 - h;
        down = evaluate(f, probe);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFinite) throw;
        up = std::nan("");
      }
      probe[t][i] = x0;
      if (std::isnan(up) || std::isnan(down)) {
        throw Error(ErrorCode::kNonFinite, "function is NaN when perturbing parameter " + std::to_string(flat) +
                                               " (tensor " + std::to_string(t) + ", entry " + std::to_string(i) + ")");
      }
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::fabs(analytic[t][i] - numeric) / std::max(1.0, std::fabs(numeric));
      if (err > report.max_rel_error || std::isnan(err)) {
        report.max_rel_error = err;
        report.worst_tensor = t;
        report.worst_entry = i;
      }
      ++report.entries_checked;
    }
  }
  return report;
}

double finite_difference_check(const ScalarFn& f, std::span<const Tensor> params, double h) {
  return gradient_check(f, params, h).max_rel_error;
}

}  // namespace hypmil::ad
