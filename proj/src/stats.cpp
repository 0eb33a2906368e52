#include "mdaforge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "mdaforge/error.hpp"

namespace mdaforge {

const char* magnitude_label(Magnitude m) {
  switch (m) {
    case Magnitude::kNegligible: return "N";
    case Magnitude::kSmall: return "S";
    case Magnitude::kMedium: return "M";
    case Magnitude::kLarge: return "L";
  }
  return "?";
}

Magnitude classify_effect(double d) {
  const double a = std::fabs(d);
  if (a <= 0.2) return Magnitude::kNegligible;
  if (a <= 0.5) return Magnitude::kSmall;
  if (a <= 0.8) return Magnitude::kMedium;
  return Magnitude::kLarge;
}

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

EffectSize cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("cohens_d: each group needs >=2 scores");
  const double ma = mean_of(a), mb = mean_of(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled =
      std::sqrt(((na - 1.0) * sample_variance(a, ma) + (nb - 1.0) * sample_variance(b, mb)) / (na + nb - 2.0));
  EffectSize e;
  if (pooled == 0.0) {
    e.d = ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
  } else {
    e.d = (ma - mb) / pooled;
  }
  e.magnitude = classify_effect(e.d);
  return e;
}

double ScoreGroup::mean() const { return mean_of(scores); }

int RankTable::rank_of(const std::string& method) const {
  for (const auto& r : rows) {
    if (r.method == method) return r.rank;
  }
  throw Error("method '" + method + "' not in rank table");
}

nlohmann::ordered_json RankTable::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json rk = nlohmann::ordered_json::array();
  for (const auto& r : ranks) rk.push_back({{"rank", r.rank}, {"methods", r.methods}, {"mean", r.mean}});
  j["ranks"] = std::move(rk);
  nlohmann::ordered_json rw = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row{{"method", r.method}, {"rank", r.rank}, {"mean", r.mean}};
    if (r.d_vs_next) {
      row["d_vs_next"] = std::isfinite(r.d_vs_next->d) ? nlohmann::ordered_json(r.d_vs_next->d)
                                                       : nlohmann::ordered_json(r.d_vs_next->d > 0 ? "inf" : "-inf");
      row["magnitude_vs_next"] = magnitude_label(r.d_vs_next->magnitude);
    } else {
      row["d_vs_next"] = nullptr;
    }
    rw.push_back(std::move(row));
  }
  j["rows"] = std::move(rw);
  return j;
}

std::string RankTable::to_text() const {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s  %-*s  %10s  %s\n", "rank", static_cast<int>(width), "method", "mean",
                "d-vs-next");
  out << buf;
  for (const auto& r : rows) {
    std::string d = "-";
    if (r.d_vs_next) {
      char dbuf[64];
      std::snprintf(dbuf, sizeof dbuf, "%.3f (%s)", r.d_vs_next->d, magnitude_label(r.d_vs_next->magnitude));
      d = dbuf;
    }
    std::snprintf(buf, sizeof buf, "%-4d  %-*s  %10.4f  %s\n", r.rank, static_cast<int>(width), r.method.c_str(),
                  r.mean, d.c_str());
    out << buf;
  }
  return out.str();
}

namespace {

std::vector<double> pooled(const std::vector<ScoreGroup>& groups, std::size_t lo, std::size_t hi) {
  std::vector<double> out;
  for (std::size_t i = lo; i < hi; ++i) out.insert(out.end(), groups[i].scores.begin(), groups[i].scores.end());
  return out;
}

// Appends [lo, hi) as one or more ranks.
void partition(const std::vector<ScoreGroup>& groups, std::size_t lo, std::size_t hi, double threshold,
               std::vector<std::pair<std::size_t, std::size_t>>& leaves) {
  if (hi - lo < 2) {
    leaves.emplace_back(lo, hi);
    return;
  }
  const auto all = pooled(groups, lo, hi);
  const double grand = mean_of(all);
  double best_between = -1.0;
  std::size_t best_split = lo + 1;
  for (std::size_t s = lo + 1; s < hi; ++s) {
    const auto left = pooled(groups, lo, s);
    const auto right = pooled(groups, s, hi);
    const double ml = mean_of(left), mr = mean_of(right);
    const double between = static_cast<double>(left.size()) * (ml - grand) * (ml - grand) +
                           static_cast<double>(right.size()) * (mr - grand) * (mr - grand);
    if (between > best_between) {
      best_between = between;
      best_split = s;
    }
  }
  const auto left = pooled(groups, lo, best_split);
  const auto right = pooled(groups, best_split, hi);
  if (std::fabs(cohens_d(left, right).d) > threshold) {
    partition(groups, lo, best_split, threshold, leaves);
    partition(groups, best_split, hi, threshold, leaves);
  } else {
    leaves.emplace_back(lo, hi);
  }
}

}  // namespace

RankTable scott_knott_esd(std::vector<ScoreGroup> groups, double threshold) {
  if (groups.empty()) throw Error("scott_knott_esd: no groups");
  for (const auto& g : groups) {
    if (g.scores.size() < 2) throw Error("scott_knott_esd: method '" + g.method + "' has fewer than 2 scores");
    for (double s : g.scores) {
      if (!std::isfinite(s)) throw Error("scott_knott_esd: non-finite score for '" + g.method + "'");
    }
  }
  std::stable_sort(groups.begin(), groups.end(), [](const ScoreGroup& a, const ScoreGroup& b) {
    const double ma = a.mean(), mb = b.mean();
    return ma != mb ? ma > mb : a.method < b.method;
  });

  std::vector<std::pair<std::size_t, std::size_t>> leaves;
  partition(groups, 0, groups.size(), threshold, leaves);

  RankTable table;
  for (std::size_t r = 0; r < leaves.size(); ++r) {
    RankTable::Rank rank;
    rank.rank = static_cast<int>(r + 1);
    for (std::size_t i = leaves[r].first; i < leaves[r].second; ++i) {
      rank.methods.push_back(groups[i].method);
      RankTable::Row row;
      row.method = groups[i].method;
      row.rank = rank.rank;
      row.mean = groups[i].mean();
      if (i + 1 < groups.size()) row.d_vs_next = cohens_d(groups[i].scores, groups[i + 1].scores);
      table.rows.push_back(std::move(row));
    }
    rank.mean = mean_of(pooled(groups, leaves[r].first, leaves[r].second));
    table.ranks.push_back(std::move(rank));
  }
  return table;
}

}  // namespace mdaforge
