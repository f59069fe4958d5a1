#include <chrono>
#include <cstdio>

#include "kamtori/resonance.hpp"

using namespace kamtori;

// Times the parameter-grid divisor screen with the OpenMP kernel against the
// serial reference and checks they count the same cells.
int main(int argc, char** argv) {
  const int grid_res = argc > 1 ? std::atoi(argv[1]) : 4096;
  ModelPreset model = standard_test_model("twist-1-1", 0.0, 0.1);
  MeasureParams p;
  p.gamma = 2e-2;
  p.grid_res = grid_res;
  p.k_max = 8;
  p.mc_samples = 0;

  auto time_one = [&](bool parallel) {
    p.parallel = parallel;
    const auto start = std::chrono::steady_clock::now();
    MeasureEstimate est = excluded_measure(model.freq, model.scheme.B, p);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%-8s grid=%d excluded=%ld/%ld measure=%.6g time=%.3fs\n",
                parallel ? "openmp" : "serial", grid_res, est.excluded_cells, est.cells,
                est.measure_estimate, sec);
    return std::make_pair(est.excluded_cells, sec);
  };

  auto [cells_par, t_par] = time_one(true);
  auto [cells_ser, t_ser] = time_one(false);
  if (cells_par != cells_ser) {
    std::printf("MISMATCH between parallel and serial counts\n");
    return 1;
  }
  std::printf("speedup %.2fx\n", t_ser / t_par);
  return 0;
}
