#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mdaforge {

enum class Magnitude { kNegligible, kSmall, kMedium, kLarge };

/// "N", "S", "M" or "L".
const char* magnitude_label(Magnitude m);

/// |d| <= 0.2 N, <= 0.5 S, <= 0.8 M, otherwise L. Exactly 0.8 is M.
Magnitude classify_effect(double d);

struct EffectSize {
  double d = 0.0;
  Magnitude magnitude = Magnitude::kNegligible;
};

/// Cohen's d with the pooled sample standard deviation. Zero pooled spread
/// gives d = 0 for equal means and ±infinity otherwise.
EffectSize cohens_d(std::span<const double> a, std::span<const double> b);

struct ScoreGroup {
  std::string method;
  std::vector<double> scores;

  double mean() const;
};

struct RankTable {
  struct Rank {
    int rank = 1;
    std::vector<std::string> methods;  // descending mean
    double mean = 0.0;                 // mean over all scores in the rank
  };
  struct Row {
    std::string method;
    int rank = 1;
    double mean = 0.0;
    std::optional<EffectSize> d_vs_next;  // against the next method in mean order
  };

  std::vector<Rank> ranks;
  std::vector<Row> rows;  // every method, descending mean

  int rank_of(const std::string& method) const;
  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

inline constexpr double kNegligibleEffect = 0.2;

/// Scott-Knott ESD: sort groups by mean, split the sorted list where the
/// between-group sum of squares is largest, keep the split only if the two
/// sides' pooled scores differ by |d| > `threshold`, and recurse.
RankTable scott_knott_esd(std::vector<ScoreGroup> groups, double threshold = kNegligibleEffect);

}  // namespace mdaforge
