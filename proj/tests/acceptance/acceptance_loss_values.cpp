// Closed-form loss values, reproduced to 1e-6 absolute. Expected values are
// recomputed here from their defining expressions; the rounded figures they
// must agree with (to the printed digits) are checked alongside.

#include <cmath>
#include <numbers>
#include <vector>

#include "acceptance.hpp"
#include "hypmil/autodiff.hpp"
#include "hypmil/losses.hpp"

using namespace hypmil;
using namespace hypmil::testing;

namespace {

double graph_ama(double pos, double neg, double tau) {
  ad::Graph g;
  const ad::Var negs[] = {g.constant(ad::Tensor(ad::Shape{1, 1}, {neg}))};
  return losses::ama_from_similarities(g.constant(ad::Tensor(ad::Shape{1, 1}, {pos})), negs, tau).item();
}

double graph_ent(double theta, double ap, double beta) {
  ad::Graph g;
  return ad::sum(losses::entailment_penalty(g.constant(ad::Tensor::scalar(theta)), g.constant(ad::Tensor::scalar(ap)),
                                            beta))
      .item();
}

double graph_con(double theta, double ap, double beta) {
  ad::Graph g;
  return ad::sum(losses::contradiction_penalty(g.constant(ad::Tensor::scalar(theta)),
                                               g.constant(ad::Tensor::scalar(ap)), beta, 1e-8))
      .item();
}

double graph_cls(std::vector<double> d, std::size_t label) {
  ad::Graph g;
  const std::size_t n = d.size();
  return losses::cls_from_distances(g.constant(ad::Tensor(ad::Shape{n, 1}, std::move(d))), label).item();
}

}  // namespace

int main() {
  Criterion crit("loss unit values");
  struct Case {
    const char* name;
    double got_plain;
    double got_graph;
    double exact;
    double printed;
    double printed_tol;
  };
  const double e = std::numbers::e;
  const std::vector<double> eq{1.0, 1.0}, d12{1.0, 2.0};
  const double neg0[] = {0.0}, neg01[] = {0.1};
  const std::vector<Case> cases = {
      {"ama, equal logits", losses::ama_from_similarities(0.0, neg0, 0.05), graph_ama(0.0, 0.0, 0.05),
       std::log(2.0), 0.6931, 5e-5},
      {"ama, s+=0.2 |s-|=0.1 tau=0.05", losses::ama_from_similarities(0.2, neg01, 0.05), graph_ama(0.2, 0.1, 0.05),
       std::log1p(std::exp(-2.0)), 0.1269, 5e-5},
      {"ent, inside margin cone", losses::entailment_penalty(0.3, 0.5, 0.8), graph_ent(0.3, 0.5, 0.8), 0.0, 0.0, 0.0},
      {"ent, theta=0.5 ap=0.5", losses::entailment_penalty(0.5, 0.5, 0.8), graph_ent(0.5, 0.5, 0.8),
       std::exp(0.0) * (0.5 - 0.8 * 0.5), 0.1, 1e-12},
      {"ent, theta=1.0 ap=0.5", losses::entailment_penalty(1.0, 0.5, 0.8), graph_ent(1.0, 0.5, 0.8),
       std::exp(1.0 / 0.5 - 1.0) * (1.0 - 0.8 * 0.5), 1.6310, 5e-5},
      {"con, separated", losses::contradiction_penalty(0.5, 0.3, 0.8, 1e-8), graph_con(0.5, 0.3, 0.8), 0.0, 0.0,
       0.0},
      {"con, theta=0.5 ap=0.5", losses::contradiction_penalty(0.5, 0.5, 0.8, 1e-8), graph_con(0.5, 0.5, 0.8),
       std::exp(0.0) * (0.5 - 0.8 * 0.5), 0.1, 1e-12},
      {"con, theta=0.3 ap=0.6", losses::contradiction_penalty(0.3, 0.6, 0.8, 1e-8), graph_con(0.3, 0.6, 0.8),
       e * (0.6 - 0.8 * 0.3), 0.9786, 5e-5},
      {"cls, equal distances", losses::cls_from_distances(eq, 0), graph_cls(eq, 0), std::log(2.0), 0.6931, 5e-5},
      {"cls, distances (1, 2), class 0", losses::cls_from_distances(d12, 0), graph_cls(d12, 0),
       -std::log(1.0 / (1.0 + std::exp(-1.0))), 0.3133, 5e-5},
  };
  for (const auto& c : cases) {
    const double err = std::max(std::fabs(c.got_plain - c.exact), std::fabs(c.got_graph - c.exact));
    const bool printed_ok = std::fabs(c.exact - c.printed) <= c.printed_tol;
    crit.check(c.name, err < 1e-6 && printed_ok, "value %.7f, graph %.7f, exact %.7f (|err| %.1e < 1e-6), printed %.4f",
               c.got_plain, c.got_graph, c.exact, err, c.printed);
  }
  return crit.finish();
}
