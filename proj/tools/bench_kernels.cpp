// Benchmarks the OpenMP kernels against their serial references and
// records the training-time curve over dataset size and neuron budget.
//
//   bench_kernels [--quick] [--out-dir DIR]

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wadiro/core.hpp"
#include "wadiro/guarantees.hpp"
#include "wadiro/robustness.hpp"
#include "wadiro/train.hpp"

using namespace wadiro;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = clock_type::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

Dataset random_dataset(int n, int d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Dataset out;
  out.features.resize(n, d);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out.features(i, j) = dist(rng);
    out.labels[i] = dist(rng);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  std::filesystem::path out_dir = ".";
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) quick = true;
    if (std::strcmp(argv[i], "--out-dir") == 0 && i + 1 < argc) out_dir = argv[++i];
  }
  std::filesystem::create_directories(out_dir);

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::cout << "threads: " << threads << "\n";

  std::ofstream kernels(out_dir / "kernel_bench.csv");
  kernels << "kernel,size,serial_s,parallel_s,speedup,match\n";
  kernels.precision(6);

  {
    const int n = quick ? 2000 : 20000, d = 8, p = 64;
    const auto data = random_dataset(n, d, 1);
    const auto s = gen_sampling_vectors(data, p, 2, false);
    ActivationPatterns bits_serial, bits_parallel;
    const double ts = time_best_of(3, [&] { bits_serial = compute_patterns_serial(data, s); });
    const double tp = time_best_of(3, [&] { bits_parallel = compute_patterns(data, s); });
    kernels << "activation_patterns," << n << "," << ts << "," << tp << "," << ts / tp << ","
            << (bits_serial == bits_parallel ? 1 : 0) << "\n";
  }
  {
    const int n = quick ? 1000 : 6000, d = 6, p = 32;
    const auto data = random_dataset(n, d, 3);
    const auto s = gen_sampling_vectors(data, p, 4, false);
    LiftedDataset a, b;
    const double ts = time_best_of(3, [&] { a = lift_dataset_serial(data, s, true); });
    const double tp = time_best_of(3, [&] { b = lift_dataset(data, s, true); });
    kernels << "lift_dataset," << n << "," << ts << "," << tp << "," << ts / tp << ","
            << (a.lifted == b.lifted ? 1 : 0) << "\n";
  }
  {
    const int n = quick ? 400 : 1500, k = 6, projections = quick ? 512 : 2048;
    const auto u = random_dataset(n, k - 1, 5);
    const auto v = random_dataset(n, k - 1, 6);
    Eigen::MatrixXd mu(n, k), mv(n, k);
    mu << u.features, u.labels;
    mv << v.features, v.labels;
    double a = 0, b = 0;
    const double ts = time_best_of(3, [&] { a = sw_distance_serial(mu, mv, projections, 7); });
    const double tp = time_best_of(3, [&] { b = sw_distance(mu, mv, projections, 7); });
    kernels << "sliced_wasserstein," << projections << "," << ts << "," << tp << ","
            << ts / tp << "," << (a == b ? 1 : 0) << "\n";
  }
  {
    // Deviation scan over a trained-model-sized instance.
    std::mt19937_64 rng(8);
    std::normal_distribution<double> dist;
    const int p = 24, d = 3;
    ScnnModel model;
    model.raw.nu.resize(p, d);
    model.raw.omega.resize(p, d);
    model.sampling.vectors.resize(p, d);
    for (int i = 0; i < p; ++i)
      for (int k = 0; k < d; ++k) {
        model.raw.nu(i, k) = dist(rng);
        model.raw.omega(i, k) = dist(rng);
        model.sampling.vectors(i, k) = dist(rng);
      }
    model.scaler.means = Eigen::VectorXd::Zero(d + 1);
    model.scaler.stdevs = Eigen::VectorXd::Ones(d + 1);
    StabilityDomain domain;
    domain.lo = Eigen::VectorXd::Constant(d, -1.5);
    domain.hi = Eigen::VectorXd::Constant(d, 1.5);
    domain.eps = 0.1;
    const int density = quick ? 21 : 41;
    double a = 0, b = 0;
    const double ts =
        time_best_of(2, [&] { a = empirical_deviation_scan_serial(model, domain, density); });
    const double tp =
        time_best_of(2, [&] { b = empirical_deviation_scan(model, domain, density); });
    kernels << "deviation_scan," << density << "," << ts << "," << tp << "," << ts / tp << ","
            << (a == b ? 1 : 0) << "\n";
  }
  std::cout << "kernel benchmark written to " << (out_dir / "kernel_bench.csv") << "\n";

  // Training-time curve: wall time of the robust l1 program over a grid
  // of dataset sizes and neuron budgets.
  std::ofstream curve(out_dir / "training_time_curve.csv");
  curve << "n,max_neurons,patterns,train_mae,seconds,status\n";
  curve.precision(6);
  const std::vector<int> sizes = quick ? std::vector<int>{200, 500} : std::vector<int>{250, 500, 1000};
  const std::vector<int> budgets = quick ? std::vector<int>{25, 50} : std::vector<int>{25, 50, 100};
  for (int n : sizes) {
    for (int budget : budgets) {
      const auto raw = random_dataset(n, 4, static_cast<unsigned>(n + budget));
      auto [data, scaler] = standardize(raw, std::nullopt, ScaleMode::fit_transform);
      const auto s = gen_sampling_vectors(data, budget, 11, true);
      TrainConfig cfg;
      cfg.program = Program::wadiro_l1;
      cfg.epsilon = 0.01;
      cfg.with_bias = true;
      const auto t0 = clock_type::now();
      auto [w, report] = train(data, s, cfg);
      const double elapsed = seconds_since(t0);
      const double mae =
          (data.labels - training_predictions(data, s, w)).cwiseAbs().mean();
      curve << n << "," << budget << "," << s.count() << "," << mae << "," << elapsed << ","
            << to_string(report.status) << "\n";
      std::cout << "train n=" << n << " budget=" << budget << " -> " << elapsed << " s ("
                << to_string(report.status) << ")\n";
    }
  }
  std::cout << "timing curve written to " << (out_dir / "training_time_curve.csv") << "\n";
  return 0;
}
