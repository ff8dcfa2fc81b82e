#include "kaid/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "kaid/error.hpp"

namespace kaid {

F1Report f1_score(std::span<const std::size_t> predictions, std::span<const std::size_t> golds,
                  std::span<const std::string> classes) {
  KAID_REQUIRE(!predictions.empty(), "f1_score: empty prediction list");
  KAID_REQUIRE(predictions.size() == golds.size(), "f1_score: " + std::to_string(predictions.size()) +
                                                       " predictions but " + std::to_string(golds.size()) + " golds");
  KAID_REQUIRE(!classes.empty(), "f1_score: empty class map");
  const std::size_t C = classes.size();
  F1Report r;
  r.classes.assign(classes.begin(), classes.end());
  r.confusion.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] >= C || golds[i] >= C)
      throw ValidationError("f1_score: label index outside the class map at position " + std::to_string(i));
    ++r.confusion[golds[i]][predictions[i]];
  }
  std::size_t tp_total = 0;
  r.per_class.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t tp = r.confusion[c][c], gold = 0, pred = 0;
    for (std::size_t k = 0; k < C; ++k) {
      gold += r.confusion[c][k];
      pred += r.confusion[k][c];
    }
    auto& s = r.per_class[c];
    s.support = gold;
    s.precision = pred ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
    s.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    r.macro_f1 += s.f1;
    tp_total += tp;
  }
  r.macro_f1 /= static_cast<double>(C);
  // Single-label: micro precision = micro recall = accuracy.
  r.accuracy = static_cast<double>(tp_total) / static_cast<double>(predictions.size());
  r.micro_f1 = r.accuracy;
  return r;
}

F1Report f1_score(std::span<const std::string> predictions, std::span<const std::string> golds,
                  std::span<const std::string> classes) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], i);
  auto lookup = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end()) throw ValidationError("f1_score: unknown label '" + label + "'");
    return it->second;
  };
  std::vector<std::size_t> p, g;
  for (const auto& s : predictions) p.push_back(lookup(s));
  for (const auto& s : golds) g.push_back(lookup(s));
  return f1_score(p, g, classes);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  KAID_REQUIRE(scores.size() == labels.size(), "auc: scores and labels differ in length");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) {
    KAID_REQUIRE(l == 0 || l == 1, "auc: labels must be 0 or 1");
    (l == 1 ? pos : neg)++;
  }
  KAID_REQUIRE(pos > 0 && neg > 0, "auc: both positive and negative labels are required");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tie groups, then Mann-Whitney U.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
    }
    i = j;
  }
  const double P = static_cast<double>(pos), N = static_cast<double>(neg);
  return (pos_rank_sum - P * (P + 1.0) / 2.0) / (P * N);
}

}  // namespace kaid
