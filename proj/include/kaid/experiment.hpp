#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace kaid {

struct ExperimentGrid {
  std::vector<std::uint64_t> seeds;
  std::vector<double> lrs;
  std::size_t batch_size = 16;

  std::size_t size() const { return seeds.size() * lrs.size(); }
  void validate() const;
};

struct GridRun {
  std::size_t cell = 0;
  std::uint64_t seed = 0;
  double lr = 0.0;
  double metric = 0.0;
};

struct GridResult {
  std::vector<GridRun> runs;  // seed-major order
  double mean = 0.0;
  std::size_t best = 0;  // index into runs; first maximum wins
};

// Runs every (seed, lr) cell; `threads` > 1 runs cells concurrently. The
// table is identical regardless of thread count.
using GridCell = std::function<double(std::size_t cell, std::uint64_t seed, double lr)>;
GridResult run_grid(const ExperimentGrid& grid, const GridCell& run, std::size_t threads = 1);

struct SpeedReport {
  double teacher_per_example = 0.0;  // seconds
  double student_per_example = 0.0;
  double speedup = 0.0;
  std::size_t examples = 0;
  std::size_t repetitions = 0;
};

// Batch size 1 on the calling thread; each repetition times a full pass and
// the median per-example time is reported.
using InferenceFn = std::function<void(std::size_t example)>;
SpeedReport speed_benchmark(const InferenceFn& teacher, const InferenceFn& student, std::size_t examples,
                            std::size_t repetitions);

}  // namespace kaid
