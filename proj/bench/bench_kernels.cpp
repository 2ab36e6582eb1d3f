/*
 * SPDX-License-Identifier: Apache-2.0
 */
// Serial reference vs OpenMP kernels. Each pair must agree; timings are
// the median of a few repetitions.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "jdbm/classifier.hpp"
#include "jdbm/data.hpp"
#include "jdbm/inpainting.hpp"
#include "jdbm/oracle.hpp"

using namespace jdbm;

namespace {

double median_seconds(const std::function<void()>& f, int reps) {
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(t.begin(), t.begin() + reps / 2, t.end());
  return t[static_cast<std::size_t>(reps / 2)];
}

int report(const char* name, const std::function<double(Exec)>& kernel, int reps = 5) {
  double serial = 0, parallel = 0;
  const double ts = median_seconds([&] { serial = kernel(Exec::serial); }, reps);
  const double tp = median_seconds([&] { parallel = kernel(Exec::parallel); }, reps);
  const double diff = std::abs(serial - parallel);
  const bool same = diff <= 1e-12 * std::max(1.0, std::abs(serial));
  std::printf("%-22s serial %9.4f s  parallel %9.4f s  speedup %5.2fx  |diff| %.1e %s\n", name, ts, tp, ts / tp, diff,
              same ? "" : "MISMATCH");
  return same ? 0 : 1;
}

DbmParams random_params(const ModelSpec& spec, std::uint64_t seed, double sd) {
  Rng rng(seed);
  DbmParams p = DbmParams::zeros(spec);
  p.visit([&](std::string_view, double* d, Eigen::Index r, Eigen::Index c) {
    for (Eigen::Index i = 0; i < r * c; ++i) d[i] = sd * gaussian(rng);
  });
  return p;
}

}  // namespace

int main() {
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
  int bad = 0;

  const DbmParams small = random_params({64, 16, 8, 2}, 1, 0.3);
  bad += report("oracle log Z (N1=16)", [&](Exec e) { return exact_log_partition(small, {.exec = e}); });

  const auto bars = make_bars(1000, 0.05, 7);
  const DbmParams mid = random_params({64, 64, 32, 2}, 2, 0.1);
  const auto masks = sample_masks(mid.spec(), bars.size(), {}, 3);
  bad += report("inpainting objective", [&](Exec e) { return minibatch_objective(mid, bars, masks, 10, e).value; });

  bad += report("feature extraction", [&](Exec e) { return extract_features_batch(mid, bars, {}, e).sum(); });

  const FeatureSet fs = FeatureSet::build(bars, extract_features_batch(mid, bars, {}, Exec::serial));
  const MlpParams mlp = mlp_from_dbm(mid);
  bad += report("mlp loss+grad", [&](Exec e) { return mlp_loss_grad(mlp, fs, {}, e).loss; });
  return bad == 0 ? 0 : 1;
}
