#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "smartcrt/design.hpp"

namespace smartcrt {

struct IndividualRecord {
  double y = 0.0;
  std::vector<double> x;
};

struct ClusterRecord {
  std::string id;
  TreatmentPath path;
  std::vector<IndividualRecord> individuals;

  std::size_t size() const { return individuals.size(); }
};

// Individual-level outcomes nested in clusters, each cluster carrying its
// realized randomization path. Treated as immutable once built; safe to
// share across threads.
struct TrialDataset {
  DesignKind design = DesignKind::Adept;
  std::vector<ClusterRecord> clusters;
  std::size_t p = 0;  // covariates per individual

  std::size_t n_clusters() const { return clusters.size(); }
  std::size_t n_individuals() const;
  std::size_t max_cluster_size() const;
};

// Structural checks shared by the parser and the estimator: unique ids,
// paths valid for the design, covariate vectors of length p, finite values,
// non-empty clusters, and at least as many clusters as embedded regimens.
// Throws std::invalid_argument.
void check_dataset(const TrialDataset& dataset);

// Long-format CSV ingest, one row per individual. Header:
//   cluster_id,a1,r,a2,y,x1..xp[,p1_prob,p2_prob]
// a2 is empty where the design leaves it undefined. The optional probability
// columns override the default 0.5 randomization probabilities per cluster.
// Rows of a cluster must agree on all path columns.
TrialDataset parse_dataset(std::istream& in, DesignKind design);
TrialDataset parse_dataset_text(const std::string& csv_text, DesignKind design);
TrialDataset read_dataset(const std::string& file_path, DesignKind design);

void write_csv(const TrialDataset& dataset, std::ostream& out);
std::string to_csv(const TrialDataset& dataset);
void write_csv_file(const TrialDataset& dataset, const std::string& file_path);

struct ValidationReport {
  std::map<char, std::size_t> cell_counts;  // design cells A..
  std::size_t min_cluster_size = 0;
  std::size_t max_cluster_size = 0;
  std::vector<std::string> warnings;  // empty design cells
  std::vector<std::string> notes;     // informational

  bool has_warnings() const { return !warnings.empty(); }
};

// Report-only summary: per-cell cluster counts, empty-cell warnings, cluster
// size range. Never mutates the dataset.
ValidationReport validate(const TrialDataset& dataset);

}  // namespace smartcrt
