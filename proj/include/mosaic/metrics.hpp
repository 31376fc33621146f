#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mosaic/catalog.hpp"

namespace mosaic {

struct ComplianceRecord {
  std::string prompt_id;
  std::string spec_id;
  int rank = 0;       // 1-based position in the prompt's list
  int list_size = 0;
  double fractional = 0.0;
  int binary = 0;
  std::string method;  // Deterministic | Judge
  bool evaluation_failed = false;  // excluded from metric denominators
};

class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidPairError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PartialEvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using RecordStore = std::vector<ComplianceRecord>;

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;
  int n = 0;
};

struct CorrelationEntry {
  std::string spec_i;
  std::string spec_j;
  double pearson_r = 0.0;
  double p_value = 1.0;
  int n = 0;
};

struct MetricsReport {
  std::map<std::string, double> scc;
  std::map<std::string, double> scc_by_category;
  std::map<std::string, double> pa;  // per prompt
  double pa_mean = 0.0;
  std::map<int, double> poscc;                       // rank -> rate
  std::map<std::pair<std::string, std::string>, double> pcc;
  std::vector<CorrelationEntry> correlations;
  std::map<int, double> compliance_by_count;  // list_size -> mean PA
};

// --- per-metric operations ----------------------------------------------------

double scc(const RecordStore& store, const std::string& spec_id);
double pa(const RecordStore& store, const std::string& prompt_id,
          bool tolerant = false);
double pa_mean(const RecordStore& store, bool tolerant = false);
double poscc(const RecordStore& store, int rank);
double pcc(const RecordStore& store, const std::string& spec_i,
           const std::string& spec_j);
PearsonResult pearson_pair(const RecordStore& store, const std::string& spec_i,
                           const std::string& spec_j);
std::vector<CorrelationEntry> significant_correlations(const RecordStore& store,
                                                       double r_min = 0.2,
                                                       double alpha = 0.05);
std::map<std::string, double> category_scc(const RecordStore& store,
                                           const Catalog& catalog,
                                           bool constraint_weighted = false);
std::map<int, double> compliance_by_count(const RecordStore& store,
                                          bool tolerant = false);

MetricsReport compute_report(const RecordStore& store, const Catalog& catalog,
                             double r_min = 0.2, double alpha = 0.05,
                             bool tolerant = true);

// --- statistics helpers --------------------------------------------------------

// Pearson correlation of two equal-length vectors. Throws on constant input
// or n < 3.
PearsonResult pearson(const std::vector<double>& x,
                      const std::vector<double>& y);

// Two-sided p-value of Pearson r at sample size n via the t distribution with
// n-2 degrees of freedom.
double pearson_p_value(double r, int n);

// Regularized incomplete beta function I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided permutation p-value (seeded), for cross-checking the analytic one.
double permutation_p_value(const std::vector<double>& x,
                           const std::vector<double>& y, int shuffles,
                           std::uint64_t seed);

// --- persistence and report emission --------------------------------------------

void save_records(const RecordStore& store, const std::string& path);
RecordStore load_records(const std::string& path);

// CSVs: scc.csv, category_scc.csv, correlations.csv, poscc_by_rank.csv,
// pa_by_count.csv, plus summary.md. Returns emitted file paths.
std::vector<std::string> write_report_files(const MetricsReport& report,
                                            const RecordStore& store,
                                            const Catalog& catalog,
                                            const std::string& directory);

}  // namespace mosaic
