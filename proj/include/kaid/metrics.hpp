#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace kaid {

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct F1Report {
  std::vector<std::string> classes;
  std::vector<ClassScore> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
  double macro_f1 = 0.0;  // unweighted over every class in the map, UNKNOWN included
  double micro_f1 = 0.0;
  double accuracy = 0.0;
};

// Classes with no gold and no predicted instances score F1 = 0.
F1Report f1_score(std::span<const std::size_t> predictions, std::span<const std::size_t> golds,
                  std::span<const std::string> classes);
F1Report f1_score(std::span<const std::string> predictions, std::span<const std::string> golds,
                  std::span<const std::string> classes);

// Probability that a random positive outscores a random negative; ties
// count one half.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace kaid
