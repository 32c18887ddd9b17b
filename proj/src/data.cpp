#include "smartcrt/data.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace smartcrt {

std::size_t TrialDataset::n_individuals() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  return n;
}

std::size_t TrialDataset::max_cluster_size() const {
  std::size_t m = 0;
  for (const auto& c : clusters) m = std::max(m, c.size());
  return m;
}

void check_dataset(const TrialDataset& dataset) {
  std::unordered_set<std::string> seen;
  for (const auto& cluster : dataset.clusters) {
    if (!seen.insert(cluster.id).second)
      throw std::invalid_argument("duplicate cluster id '" + cluster.id + "'");
    validate_path(cluster.path, dataset.design);
    if (cluster.individuals.empty())
      throw std::invalid_argument("cluster '" + cluster.id + "' has no individuals");
    for (const auto& ind : cluster.individuals) {
      if (!std::isfinite(ind.y))
        throw std::invalid_argument("non-finite outcome in cluster '" + cluster.id + "'");
      if (ind.x.size() != dataset.p)
        throw std::invalid_argument("covariate vector of length " +
                                    std::to_string(ind.x.size()) + " in cluster '" +
                                    cluster.id + "' (expected " +
                                    std::to_string(dataset.p) + ")");
      for (double v : ind.x)
        if (!std::isfinite(v))
          throw std::invalid_argument("non-finite covariate in cluster '" +
                                      cluster.id + "'");
    }
  }
  const std::size_t n_dtrs = embedded_dtrs(dataset.design).size();
  if (dataset.n_clusters() < n_dtrs)
    throw std::invalid_argument(
        "dataset has " + std::to_string(dataset.n_clusters()) +
        " clusters but the " + to_string(dataset.design) + " design embeds " +
        std::to_string(n_dtrs) + " regimens");
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

double parse_double(const std::string& tok, const std::string& what, std::size_t line_no) {
  double value = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw std::invalid_argument("line " + std::to_string(line_no) + ": invalid " +
                                what + " value '" + tok + "'");
  return value;
}

int parse_int(const std::string& tok, const std::string& what, std::size_t line_no) {
  int value = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
    throw std::invalid_argument("line " + std::to_string(line_no) + ": invalid " +
                                what + " value '" + tok + "'");
  return value;
}

struct Columns {
  std::size_t cluster_id = 0, a1 = 0, r = 0, a2 = 0, y = 0;
  std::vector<std::size_t> x;  // x1..xp in order
  std::optional<std::size_t> p1_prob, p2_prob;
  std::size_t total = 0;
};

Columns parse_header(const std::string& line) {
  Columns cols;
  const auto names = split_csv_line(line);
  cols.total = names.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!index.emplace(names[i], i).second)
      throw std::invalid_argument("duplicate column '" + names[i] + "'");
  }
  auto require = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end())
      throw std::invalid_argument("missing required column '" + name + "'");
    return it->second;
  };
  cols.cluster_id = require("cluster_id");
  cols.a1 = require("a1");
  cols.r = require("r");
  cols.a2 = require("a2");
  cols.y = require("y");
  if (auto it = index.find("p1_prob"); it != index.end()) cols.p1_prob = it->second;
  if (auto it = index.find("p2_prob"); it != index.end()) cols.p2_prob = it->second;
  for (std::size_t k = 1;; ++k) {
    auto it = index.find("x" + std::to_string(k));
    if (it == index.end()) break;
    cols.x.push_back(it->second);
  }
  const std::size_t recognized = 5 + cols.x.size() + (cols.p1_prob ? 1 : 0) +
                                 (cols.p2_prob ? 1 : 0);
  if (recognized != names.size()) {
    for (const auto& [name, i] : index) {
      if (name != "cluster_id" && name != "a1" && name != "r" && name != "a2" &&
          name != "y" && name != "p1_prob" && name != "p2_prob" &&
          std::find(cols.x.begin(), cols.x.end(), i) == cols.x.end())
        throw std::invalid_argument("unrecognized column '" + name + "'");
    }
  }
  return cols;
}

}  // namespace

TrialDataset parse_dataset(std::istream& in, DesignKind design) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::invalid_argument("empty file");
  ++line_no;
  const Columns cols = parse_header(line);

  TrialDataset out;
  out.design = design;
  out.p = cols.x.size();
  std::unordered_map<std::string, std::size_t> cluster_index;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != cols.total)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(cols.total) + " fields, found " +
                                  std::to_string(fields.size()));

    const std::string& id = fields[cols.cluster_id];
    if (id.empty())
      throw std::invalid_argument("line " + std::to_string(line_no) + ": empty cluster_id");
    const int a1 = parse_int(fields[cols.a1], "a1", line_no);
    const int r = parse_int(fields[cols.r], "r", line_no);
    std::optional<int> a2;
    if (!fields[cols.a2].empty()) a2 = parse_int(fields[cols.a2], "a2", line_no);
    double p1 = 0.5;
    std::optional<double> p2;
    if (cols.p1_prob && !fields[*cols.p1_prob].empty())
      p1 = parse_double(fields[*cols.p1_prob], "p1_prob", line_no);
    if (cols.p2_prob && !fields[*cols.p2_prob].empty())
      p2 = parse_double(fields[*cols.p2_prob], "p2_prob", line_no);

    TreatmentPath path;
    try {
      path = make_path(design, a1, r, a2, p1, p2);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
    }

    IndividualRecord ind;
    ind.y = parse_double(fields[cols.y], "y", line_no);
    ind.x.reserve(cols.x.size());
    for (std::size_t k = 0; k < cols.x.size(); ++k)
      ind.x.push_back(parse_double(fields[cols.x[k]], "x" + std::to_string(k + 1), line_no));

    auto it = cluster_index.find(id);
    if (it == cluster_index.end()) {
      cluster_index.emplace(id, out.clusters.size());
      out.clusters.push_back({id, path, {std::move(ind)}});
    } else {
      ClusterRecord& cluster = out.clusters[it->second];
      const TreatmentPath& prev = cluster.path;
      if (prev.a1 != path.a1 || prev.r != path.r || prev.a2 != path.a2 ||
          prev.rand_prob_stage1 != path.rand_prob_stage1 ||
          prev.rand_prob_stage2 != path.rand_prob_stage2)
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": treatment path conflicts with earlier rows of cluster '" +
                                    id + "'");
      cluster.individuals.push_back(std::move(ind));
    }
  }

  if (out.clusters.empty()) throw std::invalid_argument("no data rows");
  check_dataset(out);
  return out;
}

TrialDataset parse_dataset_text(const std::string& csv_text, DesignKind design) {
  std::istringstream in(csv_text);
  return parse_dataset(in, design);
}

TrialDataset read_dataset(const std::string& file_path, DesignKind design) {
  std::ifstream in(file_path);
  if (!in) throw std::invalid_argument("cannot open '" + file_path + "'");
  return parse_dataset(in, design);
}

void write_csv(const TrialDataset& dataset, std::ostream& out) {
  bool custom_probs = false;
  for (const auto& c : dataset.clusters)
    if (c.path.rand_prob_stage1 != 0.5 ||
        (c.path.rand_prob_stage2 && *c.path.rand_prob_stage2 != 0.5))
      custom_probs = true;

  out << "cluster_id,a1,r,a2,y";
  for (std::size_t k = 1; k <= dataset.p; ++k) out << ",x" << k;
  if (custom_probs) out << ",p1_prob,p2_prob";
  out << "\n";

  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& cluster : dataset.clusters) {
    for (const auto& ind : cluster.individuals) {
      out << cluster.id << ',' << cluster.path.a1 << ',' << cluster.path.r << ',';
      if (cluster.path.a2) out << *cluster.path.a2;
      out << ',' << ind.y;
      for (double v : ind.x) out << ',' << v;
      if (custom_probs) {
        out << ',' << cluster.path.rand_prob_stage1 << ',';
        if (cluster.path.rand_prob_stage2) out << *cluster.path.rand_prob_stage2;
      }
      out << "\n";
    }
  }
}

std::string to_csv(const TrialDataset& dataset) {
  std::ostringstream out;
  write_csv(dataset, out);
  return out.str();
}

void write_csv_file(const TrialDataset& dataset, const std::string& file_path) {
  std::ofstream out(file_path);
  if (!out) throw std::invalid_argument("cannot write '" + file_path + "'");
  write_csv(dataset, out);
}

ValidationReport validate(const TrialDataset& dataset) {
  ValidationReport report;
  const auto cells = design_cells(dataset.design);
  for (std::size_t i = 0; i < cells.size(); ++i)
    report.cell_counts[static_cast<char>('A' + i)] = 0;

  std::size_t singletons = 0;
  for (const auto& cluster : dataset.clusters) {
    report.cell_counts[cell_label(cluster.path, dataset.design)] += 1;
    if (cluster.size() == 1) ++singletons;
    report.min_cluster_size = report.min_cluster_size == 0
                                  ? cluster.size()
                                  : std::min(report.min_cluster_size, cluster.size());
    report.max_cluster_size = std::max(report.max_cluster_size, cluster.size());
  }

  const auto dtrs = embedded_dtrs(dataset.design);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const char letter = static_cast<char>('A' + i);
    if (report.cell_counts[letter] != 0) continue;
    // Name the regimen the cell belongs to; responder cells are shared.
    std::string owners;
    for (const auto& dtr : dtrs)
      if (is_consistent(cells[i], dtr, dataset.design))
        owners += (owners.empty() ? "" : ", ") + dtr.label();
    const std::string kind = cells[i].r == 1 ? "responder" : "non-responder";
    report.warnings.push_back("cell " + std::string(1, letter) + " empty: DTR " +
                              owners + " " + kind + " cell empty");
  }
  if (singletons > 0)
    report.notes.push_back(std::to_string(singletons) +
                           " cluster(s) of size 1 contribute no within-cluster "
                           "pairs to ICC estimation");
  return report;
}

}  // namespace smartcrt
