#include "semhash/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "semhash/kernels.hpp"

namespace semhash {
namespace {

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

struct QueryScore {
  std::optional<double> ap;
  std::vector<double> hp;  // hp[k-1] for k = 1..k_max
};

void check_k(std::size_t k, std::size_t available) {
  if (k < 1 || k > available) {
    throw Error(ErrorKind::kKTooLarge, "cutoff " + std::to_string(k) + " with " +
                                           std::to_string(available) + " candidates");
  }
}

std::vector<double> hp_curve_for(std::span<const NodeId> ranked, NodeId query,
                                 std::size_t k_max, const RelevanceTable& rel) {
  check_k(k_max, ranked.size());
  std::vector<double> rels(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) rels[i] = rel(query, ranked[i]);
  std::vector<double> best = rels;
  std::partial_sort(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(k_max), best.end(),
                    std::greater<>());
  std::vector<double> hp(k_max);
  double got = 0.0;
  double ideal = 0.0;
  for (std::size_t k = 0; k < k_max; ++k) {
    got += rels[k];
    ideal += best[k];
    hp[k] = ideal > 0.0 ? std::min(got / ideal, 1.0) : 1.0;
  }
  return hp;
}

std::optional<double> ap_or_none(std::span<const NodeId> ranked, NodeId query) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] == query) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

struct Candidate {
  double distance;
  std::int64_t id;
  NodeId label;
};

QueryRanking finish_ranking(std::vector<Candidate>& candidates, std::int64_t query_id,
                            NodeId query_label) {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  QueryRanking out{query_id, query_label, {}};
  out.ranked_labels.reserve(candidates.size());
  for (const auto& c : candidates) out.ranked_labels.push_back(c.label);
  return out;
}

}  // namespace

double relevance(const Taxonomy& t, NodeId query, NodeId item) {
  return 1.0 - semantic_distance(t, query, item);
}

RelevanceTable::RelevanceTable(const Taxonomy& t) : slot_of_(t.size(), -1) {
  const auto& leaves = t.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) slot_of_[leaves[i]] = static_cast<int>(i);
  values_ = Matrix::Ones(static_cast<Eigen::Index>(leaves.size()),
                         static_cast<Eigen::Index>(leaves.size())) -
            distance_matrix(t, leaves).values;
}

Eigen::Index RelevanceTable::slot(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= slot_of_.size()) {
    throw Error(ErrorKind::kUnknownNode, "node id " + std::to_string(id));
  }
  if (slot_of_[id] < 0) throw Error(ErrorKind::kNotALeaf, "node id " + std::to_string(id));
  return slot_of_[id];
}

double hp_at_k(std::span<const NodeId> ranked, NodeId query, std::size_t k, const Taxonomy& t) {
  check_k(k, ranked.size());
  return hp_curve_for(ranked, query, k, RelevanceTable(t)).back();
}

double ahp_at_k(std::span<const NodeId> ranked, NodeId query, std::size_t k_max,
                const Taxonomy& t) {
  const auto hp = hp_curve_for(ranked, query, k_max, RelevanceTable(t));
  CompensatedSum sum;
  for (double v : hp) sum.add(v);
  return sum.value() / static_cast<double>(k_max);
}

double average_precision(std::span<const NodeId> ranked, NodeId query) {
  if (auto ap = ap_or_none(ranked, query)) return *ap;
  throw Error(ErrorKind::kNoRelevantItems, "no candidate shares the query label");
}

QueryRanking rank_hamming(const HashIndex& db, std::int64_t query_id, NodeId query_label,
                          const HashCode& query, ExecPolicy policy) {
  if (db.empty()) throw Error(ErrorKind::kEmptyIndex, "ranking against an empty index");
  if (query.bits != db.bits()) throw Error(ErrorKind::kLengthMismatch, "query code length");
  std::vector<std::uint32_t> dist(db.size());
  kernels::hamming_scan(db.all_words(), db.words_per_code(), query.words, dist, policy);
  std::vector<Candidate> candidates;
  candidates.reserve(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (db.id(i) == query_id) continue;
    candidates.push_back({static_cast<double>(dist[i]), db.id(i), db.label(i)});
  }
  return finish_ranking(candidates, query_id, query_label);
}

QueryRanking rank_manhattan(const EmbeddingTable& db, std::int64_t query_id, NodeId query_label,
                            std::span<const double> query, ExecPolicy policy) {
  if (db.ids.empty()) throw Error(ErrorKind::kEmptyIndex, "ranking against an empty table");
  std::vector<double> dist(db.ids.size());
  kernels::l1_scan(db.values, query, dist, policy);
  std::vector<Candidate> candidates;
  candidates.reserve(db.ids.size());
  for (std::size_t i = 0; i < db.ids.size(); ++i) {
    if (db.ids[i] == query_id) continue;
    candidates.push_back({dist[i], db.ids[i], db.labels[i]});
  }
  return finish_ranking(candidates, query_id, query_label);
}

std::vector<QueryRanking> rank_all(const HashIndex& db, const HashIndex& queries,
                                   ExecPolicy policy) {
  if (db.bits() != queries.bits()) throw Error(ErrorKind::kLengthMismatch, "query code length");
  std::vector<QueryRanking> out(queries.size());
  const auto n = static_cast<std::int64_t>(queries.size());
  const bool serial = policy == ExecPolicy::kSerial;
#pragma omp parallel for schedule(dynamic, 8) if (!serial)
  for (std::int64_t q = 0; q < n; ++q) {
    out[q] = rank_hamming(db, queries.id(q), queries.label(q), queries.code(q), ExecPolicy::kSerial);
  }
  return out;
}

std::vector<QueryRanking> rank_all(const EmbeddingTable& db, const EmbeddingTable& queries,
                                   ExecPolicy policy) {
  if (db.values.cols() != queries.values.cols() ||
      static_cast<std::size_t>(db.values.rows()) != db.ids.size() ||
      db.ids.size() != db.labels.size() ||
      static_cast<std::size_t>(queries.values.rows()) != queries.ids.size() ||
      queries.ids.size() != queries.labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, "embedding tables are inconsistent");
  }
  std::vector<QueryRanking> out(queries.ids.size());
  const auto n = static_cast<std::int64_t>(queries.ids.size());
  const bool serial = policy == ExecPolicy::kSerial;
#pragma omp parallel for schedule(dynamic, 8) if (!serial)
  for (std::int64_t q = 0; q < n; ++q) {
    const auto row = queries.values.row(q);
    out[q] = rank_manhattan(db, queries.ids[q], queries.labels[q],
                            std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                            ExecPolicy::kSerial);
  }
  return out;
}

MeanApResult mean_ap(std::span<const QueryRanking> rankings) {
  MeanApResult out;
  CompensatedSum sum;
  for (const auto& r : rankings) {
    if (auto ap = ap_or_none(r.ranked_labels, r.query_label)) {
      sum.add(*ap);
      ++out.scored;
    } else {
      ++out.skipped;
    }
  }
  out.map = out.scored ? sum.value() / static_cast<double>(out.scored) : 0.0;
  return out;
}

MeanApResult mean_ap(const HashIndex& db, const HashIndex& queries, ExecPolicy policy) {
  const auto rankings = rank_all(db, queries, policy);
  return mean_ap(rankings);
}

MetricsReport evaluate_rankings(std::span<const QueryRanking> rankings, const Taxonomy& t,
                                const EvalOptions& options, ExecPolicy policy) {
  if (rankings.empty()) throw Error(ErrorKind::kEmptyIndex, "no queries to evaluate");
  const RelevanceTable rel(t);
  const std::size_t k_max = options.k_max;
  for (const auto& r : rankings) check_k(k_max, r.ranked_labels.size());
  for (std::size_t c : options.cutoffs) check_k(c, k_max);

  std::vector<QueryScore> scores(rankings.size());
  const auto n = static_cast<std::int64_t>(rankings.size());
  const bool serial = policy == ExecPolicy::kSerial;
#pragma omp parallel for schedule(dynamic, 8) if (!serial)
  for (std::int64_t q = 0; q < n; ++q) {
    const auto& r = rankings[q];
    scores[q].ap = ap_or_none(r.ranked_labels, r.query_label);
    scores[q].hp = hp_curve_for(r.ranked_labels, r.query_label, k_max, rel);
  }

  MetricsReport report;
  report.query_count = rankings.size();
  report.k_max = k_max;

  CompensatedSum ap_sum;
  std::size_t ap_count = 0;
  for (const auto& s : scores) {
    if (s.ap) {
      ap_sum.add(*s.ap);
      ++ap_count;
    }
  }
  report.map = ap_count ? ap_sum.value() / static_cast<double>(ap_count) : 0.0;
  report.map_skipped = rankings.size() - ap_count;

  const double inv_q = 1.0 / static_cast<double>(rankings.size());
  std::vector<double> mean_hp(k_max);
  for (std::size_t k = 0; k < k_max; ++k) {
    CompensatedSum sum;
    for (const auto& s : scores) sum.add(s.hp[k]);
    mean_hp[k] = sum.value() * inv_q;
    report.hp_curve.emplace_back(k + 1, mean_hp[k]);
  }

  std::vector<std::size_t> cutoffs = options.cutoffs;
  cutoffs.push_back(k_max);
  for (std::size_t c : cutoffs) {
    CompensatedSum sum;
    for (const auto& s : scores) {
      CompensatedSum ahp;
      for (std::size_t k = 0; k < c; ++k) ahp.add(s.hp[k]);
      sum.add(ahp.value() / static_cast<double>(c));
    }
    report.mahp_at_k[c] = sum.value() * inv_q;
  }

  if (options.per_query) {
    for (std::size_t q = 0; q < scores.size(); ++q) {
      CompensatedSum ahp;
      for (double v : scores[q].hp) ahp.add(v);
      report.per_query.push_back(
          {rankings[q].query_id, scores[q].ap, ahp.value() / static_cast<double>(k_max)});
    }
  }
  return report;
}

MetricsReport evaluate(const HashIndex& db, const HashIndex& queries, const Taxonomy& t,
                       const EvalOptions& options, ExecPolicy policy) {
  const auto rankings = rank_all(db, queries, policy);
  return evaluate_rankings(rankings, t, options, policy);
}

MetricsReport evaluate(const EmbeddingTable& db, const EmbeddingTable& queries, const Taxonomy& t,
                       const EvalOptions& options, ExecPolicy policy) {
  const auto rankings = rank_all(db, queries, policy);
  return evaluate_rankings(rankings, t, options, policy);
}

std::string report_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["map"] = report.map;
  j["map_skipped_queries"] = report.map_skipped;
  j["queries"] = report.query_count;
  j["k_max"] = report.k_max;
  auto& mahp = j["mahp_at_k"];
  mahp = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.mahp_at_k) mahp[std::to_string(k)] = v;
  if (!report.per_query.empty()) {
    auto& rows = j["per_query"];
    for (const auto& q : report.per_query) {
      nlohmann::ordered_json row;
      row["id"] = q.query_id;
      row["ap"] = q.ap ? nlohmann::ordered_json(*q.ap) : nlohmann::ordered_json(nullptr);
      row["ahp"] = q.ahp;
      rows.push_back(std::move(row));
    }
  }
  return j.dump(2) + "\n";
}

std::string hp_curve_csv(const MetricsReport& report) {
  std::string out = "k,mean_hp\n";
  for (const auto& [k, v] : report.hp_curve) {
    out += std::to_string(k) + "," + format_double(v) + "\n";
  }
  return out;
}

}  // namespace semhash
