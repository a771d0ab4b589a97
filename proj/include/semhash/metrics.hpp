#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semhash/common.hpp"
#include "semhash/hashing.hpp"
#include "semhash/hierarchy.hpp"

namespace semhash {

/// 1 - semantic_distance(query, item).
double relevance(const Taxonomy& t, NodeId query, NodeId item);

/// Leaf-by-leaf relevance lookup for bulk evaluation.
class RelevanceTable {
 public:
  explicit RelevanceTable(const Taxonomy& t);
  double operator()(NodeId query, NodeId item) const {
    return values_(slot(query), slot(item));
  }

 private:
  Eigen::Index slot(NodeId id) const;

  std::vector<int> slot_of_;
  Matrix values_;
};

/// Sum of the top-k relevances retrieved divided by the largest sum any k
/// items of the candidate list could reach. `ranked` holds the labels of every
/// candidate (query already excluded) in retrieval order. Returns 1 when the
/// best achievable sum is 0.
double hp_at_k(std::span<const NodeId> ranked, NodeId query, std::size_t k, const Taxonomy& t);

/// Mean of hp_at_k over k = 1..k_max.
double ahp_at_k(std::span<const NodeId> ranked, NodeId query, std::size_t k_max,
                const Taxonomy& t);

/// Average precision with same-label relevance over the full ranking. Throws
/// NoRelevantItems when the ranking holds no item with the query's label.
double average_precision(std::span<const NodeId> ranked, NodeId query);

struct QueryRanking {
  std::int64_t query_id = 0;
  NodeId query_label = 0;
  std::vector<NodeId> ranked_labels;
};

/// Continuous embeddings with their ids and labels; the database side of a
/// Manhattan-ranked evaluation.
struct EmbeddingTable {
  Matrix values;
  std::vector<std::int64_t> ids;
  std::vector<NodeId> labels;
};

/// Ranks every database entry whose id differs from `query_id` by
/// (Hamming distance, id).
QueryRanking rank_hamming(const HashIndex& db, std::int64_t query_id, NodeId query_label,
                          const HashCode& query, ExecPolicy policy = ExecPolicy::kParallel);
/// Ranks by (Manhattan distance, id).
QueryRanking rank_manhattan(const EmbeddingTable& db, std::int64_t query_id, NodeId query_label,
                            std::span<const double> query,
                            ExecPolicy policy = ExecPolicy::kParallel);

std::vector<QueryRanking> rank_all(const HashIndex& db, const HashIndex& queries,
                                   ExecPolicy policy = ExecPolicy::kParallel);
std::vector<QueryRanking> rank_all(const EmbeddingTable& db, const EmbeddingTable& queries,
                                   ExecPolicy policy = ExecPolicy::kParallel);

struct MeanApResult {
  double map = 0.0;
  std::size_t scored = 0;
  /// Queries without a same-label database item.
  std::size_t skipped = 0;
};

MeanApResult mean_ap(std::span<const QueryRanking> rankings);
MeanApResult mean_ap(const HashIndex& db, const HashIndex& queries,
                     ExecPolicy policy = ExecPolicy::kParallel);

struct QueryMetrics {
  std::int64_t query_id = 0;
  std::optional<double> ap;
  double ahp = 0.0;  // AHP@k_max
};

struct MetricsReport {
  double map = 0.0;
  std::size_t map_skipped = 0;
  std::size_t query_count = 0;
  std::size_t k_max = 0;
  std::map<std::size_t, double> mahp_at_k;
  std::vector<std::pair<std::size_t, double>> hp_curve;  // k = 1..k_max
  std::vector<QueryMetrics> per_query;
};

struct EvalOptions {
  std::size_t k_max = 250;
  /// Extra cutoffs reported in `mahp_at_k`; k_max is always included.
  std::vector<std::size_t> cutoffs;
  bool per_query = false;
};

/// Scores precomputed rankings; queries are processed independently and
/// aggregated in query order with compensated summation.
MetricsReport evaluate_rankings(std::span<const QueryRanking> rankings, const Taxonomy& t,
                                const EvalOptions& options,
                                ExecPolicy policy = ExecPolicy::kParallel);

/// Hamming-ranked evaluation; a query never retrieves the entry sharing its id.
MetricsReport evaluate(const HashIndex& db, const HashIndex& queries, const Taxonomy& t,
                       const EvalOptions& options, ExecPolicy policy = ExecPolicy::kParallel);
/// Manhattan-ranked evaluation of continuous embeddings.
MetricsReport evaluate(const EmbeddingTable& db, const EmbeddingTable& queries, const Taxonomy& t,
                       const EvalOptions& options, ExecPolicy policy = ExecPolicy::kParallel);

std::string report_json(const MetricsReport& report);
/// "k,mean_hp" rows.
std::string hp_curve_csv(const MetricsReport& report);

}  // namespace semhash
