#include "kaid/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "kaid/error.hpp"
#include "kaid/io.hpp"

namespace kaid {

void ExperimentGrid::validate() const {
  std::vector<std::string> errs;
  if (seeds.empty()) errs.push_back("grid needs at least one seed");
  if (lrs.empty()) errs.push_back("grid needs at least one learning rate");
  for (double lr : lrs) {
    if (!(lr > 0.0)) errs.push_back("grid learning rates must be positive");
  }
  if (batch_size == 0) errs.push_back("grid batch size must be at least 1");
  if (!errs.empty()) throw ValidationError("invalid experiment grid: " + io::join(errs, "; "));
}

GridResult run_grid(const ExperimentGrid& grid, const GridCell& run, std::size_t threads) {
  grid.validate();
  GridResult result;
  for (auto seed : grid.seeds) {
    for (double lr : grid.lrs) result.runs.push_back(GridRun{result.runs.size(), seed, lr, 0.0});
  }
  std::vector<std::exception_ptr> failures(result.runs.size());
  auto cell = [&](std::size_t i) {
    try {
      result.runs[i].metric = run(i, result.runs[i].seed, result.runs[i].lr);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, result.runs.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < result.runs.size(); ++i) cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < result.runs.size(); i = next++) cell(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i]) continue;
    std::string what = "unknown error";
    try {
      std::rethrow_exception(failures[i]);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    throw RuntimeFailure("grid cell " + std::to_string(i) + " (seed=" + std::to_string(result.runs[i].seed) +
                         ", lr=" + io::format_double(result.runs[i].lr) + ") failed: " + what);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    sum += result.runs[i].metric;
    if (result.runs[i].metric > result.runs[result.best].metric) result.best = i;
  }
  result.mean = sum / static_cast<double>(result.runs.size());
  return result;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double per_example_median(const InferenceFn& fn, std::size_t examples, std::size_t repetitions) {
  using clock = std::chrono::steady_clock;
  std::vector<double> times;
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto start = clock::now();
    for (std::size_t i = 0; i < examples; ++i) fn(i);
    const std::chrono::duration<double> elapsed = clock::now() - start;
    times.push_back(elapsed.count() / static_cast<double>(examples));
  }
  return median(std::move(times));
}

}  // namespace

SpeedReport speed_benchmark(const InferenceFn& teacher, const InferenceFn& student, std::size_t examples,
                            std::size_t repetitions) {
  KAID_REQUIRE(examples > 0, "speed benchmark needs a non-empty evaluation set");
  KAID_REQUIRE(repetitions > 0, "speed benchmark needs at least one repetition");
  SpeedReport r;
  r.examples = examples;
  r.repetitions = repetitions;
  r.teacher_per_example = per_example_median(teacher, examples, repetitions);
  r.student_per_example = per_example_median(student, examples, repetitions);
  r.speedup = r.student_per_example > 0.0 ? r.teacher_per_example / r.student_per_example : 0.0;
  return r;
}

}  // namespace kaid
