#include "mosaic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mosaic/rng.hpp"

namespace mosaic {

using nlohmann::json;

namespace {

bool usable(const ComplianceRecord& r) { return !r.evaluation_failed; }

// prompt_id -> its usable records
std::map<std::string, std::vector<const ComplianceRecord*>> by_prompt(
    const RecordStore& store) {
  std::map<std::string, std::vector<const ComplianceRecord*>> out;
  for (const auto& r : store) out[r.prompt_id].push_back(&r);
  return out;
}

}  // namespace

double scc(const RecordStore& store, const std::string& spec_id) {
  int n = 0, followed = 0;
  for (const auto& r : store) {
    if (r.spec_id != spec_id || !usable(r)) continue;
    ++n;
    followed += r.binary;
  }
  if (n == 0)
    throw UndefinedMetricError("no records for constraint " + spec_id);
  return static_cast<double>(followed) / n;
}

double pa(const RecordStore& store, const std::string& prompt_id,
          bool tolerant) {
  int n = 0, followed = 0;
  bool any = false, failed = false;
  for (const auto& r : store) {
    if (r.prompt_id != prompt_id) continue;
    any = true;
    if (!usable(r)) {
      failed = true;
      continue;
    }
    ++n;
    followed += r.binary;
  }
  if (!any) throw UndefinedMetricError("no records for prompt " + prompt_id);
  if (failed && !tolerant)
    throw PartialEvaluationError("prompt " + prompt_id +
                                 " has unevaluated constraints");
  if (n == 0)
    throw UndefinedMetricError("prompt " + prompt_id +
                               " has no evaluated constraints");
  return static_cast<double>(followed) / n;
}

double pa_mean(const RecordStore& store, bool tolerant) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [prompt_id, records] : by_prompt(store)) {
    bool failed = false;
    int n = 0, followed = 0;
    for (const auto* r : records) {
      if (!usable(*r)) {
        failed = true;
        continue;
      }
      ++n;
      followed += r->binary;
    }
    if (failed) {
      if (!tolerant)
        throw PartialEvaluationError("prompt " + prompt_id +
                                     " has unevaluated constraints");
      continue;  // tolerant mode drops the prompt
    }
    if (n == 0) continue;
    sum += static_cast<double>(followed) / n;
    ++count;
  }
  if (count == 0) throw UndefinedMetricError("no fully evaluated prompts");
  return sum / count;
}

double poscc(const RecordStore& store, int rank) {
  int n = 0, followed = 0;
  for (const auto& r : store) {
    if (r.rank != rank || !usable(r)) continue;
    ++n;
    followed += r.binary;
  }
  if (n == 0)
    throw UndefinedMetricError("no records at rank " + std::to_string(rank));
  return static_cast<double>(followed) / n;
}

double pcc(const RecordStore& store, const std::string& spec_i,
           const std::string& spec_j) {
  if (spec_i == spec_j)
    throw InvalidPairError("pcc requires two distinct constraints");
  int n = 0, both = 0;
  for (const auto& [prompt_id, records] : by_prompt(store)) {
    const ComplianceRecord* a = nullptr;
    const ComplianceRecord* b = nullptr;
    for (const auto* r : records) {
      if (!usable(*r)) continue;
      if (r->spec_id == spec_i) a = r;
      if (r->spec_id == spec_j) b = r;
    }
    if (!a || !b) continue;
    ++n;
    if (a->binary == 1 && b->binary == 1) ++both;
  }
  if (n == 0)
    throw UndefinedMetricError("no co-occurrence of " + spec_i + " and " +
                               spec_j);
  return static_cast<double>(both) / n;
}

PearsonResult pearson(const std::vector<double>& x,
                      const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidPairError("length mismatch");
  const int n = static_cast<int>(x.size());
  if (n < 3) throw InsufficientDataError("pearson needs n >= 3");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += x[static_cast<std::size_t>(i)];
    my += y[static_cast<std::size_t>(i)];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double dx = x[static_cast<std::size_t>(i)] - mx;
    const double dy = y[static_cast<std::size_t>(i)] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw UndefinedMetricError("constant vector has no defined correlation");
  double r = sxy / std::sqrt(sxx * syy);
  r = std::clamp(r, -1.0, 1.0);
  return {r, pearson_p_value(r, n), n};
}

namespace {

// Continued-fraction evaluation for the incomplete beta (Lentz's method).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 300;
  constexpr double kEpsilon = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEpsilon) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double pearson_p_value(double r, int n) {
  if (n < 3) throw InsufficientDataError("p-value needs n >= 3");
  const double df = n - 2;
  if (std::fabs(r) >= 1.0) return 0.0;
  const double t2 = r * r * df / (1.0 - r * r);
  // two-sided: P(|T| >= t) = I_{df/(df+t^2)}(df/2, 1/2)
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2));
}

double permutation_p_value(const std::vector<double>& x,
                           const std::vector<double>& y, int shuffles,
                           std::uint64_t seed) {
  const double observed = std::fabs(pearson(x, y).r);
  Rng rng(seed);
  std::vector<double> shuffled = y;
  int at_least = 0;
  for (int s = 0; s < shuffles; ++s) {
    rng.shuffle(shuffled);
    try {
      if (std::fabs(pearson(x, shuffled).r) >= observed - 1e-12) ++at_least;
    } catch (const UndefinedMetricError&) {
    }
  }
  return static_cast<double>(at_least + 1) / (shuffles + 1);
}

PearsonResult pearson_pair(const RecordStore& store, const std::string& spec_i,
                           const std::string& spec_j) {
  if (spec_i == spec_j)
    throw InvalidPairError("pearson_pair requires distinct constraints");
  std::vector<double> x, y;
  for (const auto& [prompt_id, records] : by_prompt(store)) {
    const ComplianceRecord* a = nullptr;
    const ComplianceRecord* b = nullptr;
    for (const auto* r : records) {
      if (!usable(*r)) continue;
      if (r->spec_id == spec_i) a = r;
      if (r->spec_id == spec_j) b = r;
    }
    if (!a || !b) continue;
    x.push_back(a->binary);
    y.push_back(b->binary);
  }
  if (x.size() < 3)
    throw InsufficientDataError("fewer than 3 co-occurrences of " + spec_i +
                                " and " + spec_j);
  return pearson(x, y);
}

std::vector<CorrelationEntry> significant_correlations(const RecordStore& store,
                                                       double r_min,
                                                       double alpha) {
  std::set<std::string> specs;
  for (const auto& r : store)
    if (usable(r)) specs.insert(r.spec_id);

  std::vector<CorrelationEntry> out;
  for (auto it = specs.begin(); it != specs.end(); ++it) {
    for (auto jt = std::next(it); jt != specs.end(); ++jt) {
      try {
        PearsonResult result = pearson_pair(store, *it, *jt);
        if (std::fabs(result.r) > r_min && result.p_value < alpha)
          out.push_back({*it, *jt, result.r, result.p_value, result.n});
      } catch (const InsufficientDataError&) {
      } catch (const UndefinedMetricError&) {
      }
    }
  }
  // specs set iteration already yields sorted pairs
  return out;
}

std::map<std::string, double> category_scc(const RecordStore& store,
                                           const Catalog& catalog,
                                           bool constraint_weighted) {
  std::map<std::string, double> out;
  if (!constraint_weighted) {
    std::map<std::string, std::pair<int, int>> pooled;  // category -> (n, hit)
    for (const auto& r : store) {
      if (!usable(r)) continue;
      const std::string cat = to_string(catalog.constraint(r.spec_id).category);
      pooled[cat].first++;
      pooled[cat].second += r.binary;
    }
    for (const auto& [cat, counts] : pooled)
      out[cat] = static_cast<double>(counts.second) / counts.first;
    return out;
  }
  std::map<std::string, std::pair<int, double>> sums;  // category -> (k, sum scc)
  std::set<std::string> specs;
  for (const auto& r : store)
    if (usable(r)) specs.insert(r.spec_id);
  for (const auto& spec_id : specs) {
    const std::string cat = to_string(catalog.constraint(spec_id).category);
    sums[cat].first++;
    sums[cat].second += scc(store, spec_id);
  }
  for (const auto& [cat, acc] : sums) out[cat] = acc.second / acc.first;
  return out;
}

std::map<int, double> compliance_by_count(const RecordStore& store,
                                          bool tolerant) {
  std::map<int, std::pair<int, double>> groups;  // size -> (count, sum pa)
  for (const auto& [prompt_id, records] : by_prompt(store)) {
    bool failed = false;
    int n = 0, followed = 0, list_size = 0;
    for (const auto* r : records) {
      list_size = r->list_size;
      if (!usable(*r)) {
        failed = true;
        continue;
      }
      ++n;
      followed += r->binary;
    }
    if (failed) {
      if (!tolerant)
        throw PartialEvaluationError("prompt " + prompt_id +
                                     " has unevaluated constraints");
      continue;
    }
    if (n == 0) continue;
    groups[list_size].first++;
    groups[list_size].second += static_cast<double>(followed) / n;
  }
  std::map<int, double> out;
  for (const auto& [size, acc] : groups) out[size] = acc.second / acc.first;
  return out;
}

MetricsReport compute_report(const RecordStore& store, const Catalog& catalog,
                             double r_min, double alpha, bool tolerant) {
  MetricsReport report;
  std::set<std::string> specs;
  std::set<int> ranks;
  for (const auto& r : store) {
    if (!usable(r)) continue;
    specs.insert(r.spec_id);
    ranks.insert(r.rank);
  }
  for (const auto& spec_id : specs) report.scc[spec_id] = scc(store, spec_id);
  report.scc_by_category = category_scc(store, catalog);
  for (const auto& [prompt_id, records] : by_prompt(store)) {
    try {
      report.pa[prompt_id] = pa(store, prompt_id, tolerant);
    } catch (const UndefinedMetricError&) {
    }
  }
  report.pa_mean = pa_mean(store, tolerant);
  for (int rank : ranks) report.poscc[rank] = poscc(store, rank);
  for (auto it = specs.begin(); it != specs.end(); ++it) {
    for (auto jt = std::next(it); jt != specs.end(); ++jt) {
      try {
        const double rate = pcc(store, *it, *jt);
        report.pcc[{*it, *jt}] = rate;
        report.pcc[{*jt, *it}] = rate;
      } catch (const UndefinedMetricError&) {
      }
    }
  }
  report.correlations = significant_correlations(store, r_min, alpha);
  report.compliance_by_count = compliance_by_count(store, tolerant);
  return report;
}

void save_records(const RecordStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : store) {
    json j = {{"prompt_id", r.prompt_id}, {"spec_id", r.spec_id},
              {"rank", r.rank},           {"list_size", r.list_size},
              {"fractional", r.fractional}, {"binary", r.binary},
              {"method", r.method},       {"evaluation_failed", r.evaluation_failed}};
    out << j.dump() << '\n';
  }
}

RecordStore load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  RecordStore store;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    ComplianceRecord r;
    r.prompt_id = j.at("prompt_id");
    r.spec_id = j.at("spec_id");
    r.rank = j.at("rank");
    r.list_size = j.at("list_size");
    r.fractional = j.at("fractional");
    r.binary = j.at("binary");
    r.method = j.at("method");
    r.evaluation_failed = j.value("evaluation_failed", false);
    store.push_back(std::move(r));
  }
  return store;
}

namespace {

std::string fmt(double value) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << value;
  return os.str();
}

}  // namespace

std::vector<std::string> write_report_files(const MetricsReport& report,
                                            const RecordStore& store,
                                            const Catalog& catalog,
                                            const std::string& directory) {
  std::vector<std::string> paths;
  auto open = [&](const std::string& name) {
    const std::string path = directory + "/" + name;
    paths.push_back(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
  };

  {
    auto out = open("scc.csv");
    out << "constraint,scc\n";
    for (const auto& [spec_id, rate] : report.scc)
      out << catalog.constraint(spec_id).name << ',' << fmt(rate) << '\n';
  }
  {
    auto out = open("category_scc.csv");
    out << "category,scc\n";
    for (const auto& [cat, rate] : report.scc_by_category)
      out << cat << ',' << fmt(rate) << '\n';
  }
  {
    auto out = open("correlations.csv");
    out << "constraint_1,constraint_2,pearson_r,p_value\n";
    for (const auto& entry : report.correlations) {
      out << catalog.constraint(entry.spec_i).name << ','
          << catalog.constraint(entry.spec_j).name << ','
          << fmt(entry.pearson_r) << ',' << fmt(entry.p_value) << '\n';
    }
  }
  {
    auto out = open("poscc_by_rank.csv");
    out << "rank,poscc,n\n";
    std::map<int, int> counts;
    for (const auto& r : store)
      if (!r.evaluation_failed) counts[r.rank]++;
    for (const auto& [rank, rate] : report.poscc)
      out << rank << ',' << fmt(rate) << ',' << counts[rank] << '\n';
  }
  {
    auto out = open("pa_by_count.csv");
    out << "list_size,mean_pa,n\n";
    std::map<int, std::set<std::string>> prompts_by_size;
    for (const auto& r : store)
      prompts_by_size[r.list_size].insert(r.prompt_id);
    for (const auto& [size, mean] : report.compliance_by_count)
      out << size << ',' << fmt(mean) << ','
          << prompts_by_size[size].size() << '\n';
  }
  {
    auto out = open("summary.md");
    out << "# Compliance report\n\n";
    out << "- Records: " << store.size() << "\n";
    out << "- Prompts: " << report.pa.size() << "\n";
    out << "- Mean prompt accuracy (PA): " << fmt(report.pa_mean) << "\n\n";
    out << "## SCC by constraint\n\n| Constraint | SCC |\n|---|---|\n";
    for (const auto& [spec_id, rate] : report.scc)
      out << "| " << catalog.constraint(spec_id).name << " | " << fmt(rate)
          << " |\n";
    out << "\n## SCC by category\n\n| Category | SCC |\n|---|---|\n";
    for (const auto& [cat, rate] : report.scc_by_category)
      out << "| " << cat << " | " << fmt(rate) << " |\n";
    out << "\n## Significant correlations (|r| > threshold, p < alpha)\n\n"
        << "| Constraint 1 | Constraint 2 | r | p |\n|---|---|---|---|\n";
    for (const auto& entry : report.correlations)
      out << "| " << catalog.constraint(entry.spec_i).name << " | "
          << catalog.constraint(entry.spec_j).name << " | "
          << fmt(entry.pearson_r) << " | " << fmt(entry.p_value) << " |\n";
  }
  return paths;
}

}  // namespace mosaic
