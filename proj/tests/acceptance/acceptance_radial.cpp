// Radial hierarchy after the reference run: mean geodesic distance from the
// origin over the test slides orders text < slide < region < patch.

#include "acceptance.hpp"
#include "hypmil/evaluation.hpp"
#include "reference_run.hpp"

using namespace hypmil;
using namespace hypmil::testing;

int main() {
  Criterion crit("radial hierarchy");
  const auto run = reference_run();
  const auto r = evaluation::radial_stats(run.test_bags(), run.result.best_params, run.cfg.geometry());
  std::printf("  mean d(O, .): text %.4f  slide %.4f  region %.4f  patch %.4f\n", r.text, r.slide, r.region, r.patch);
  crit.check("text < slide", r.text < r.slide, "gap %.4f", r.slide - r.text);
  crit.check("slide < region", r.slide < r.region, "gap %.4f", r.region - r.slide);
  crit.check("region < patch", r.region < r.patch, "gap %.4f", r.patch - r.region);
  return crit.finish();
}
