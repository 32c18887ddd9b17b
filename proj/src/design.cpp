#include "smartcrt/design.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace smartcrt {

std::string to_string(DesignKind design) {
  return design == DesignKind::Adept ? "adept" : "prototypical";
}

DesignKind design_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "adept") return DesignKind::Adept;
  if (s == "prototypical") return DesignKind::Prototypical;
  throw std::invalid_argument("unknown design '" + name +
                              "' (expected adept or prototypical)");
}

std::string EmbeddedDtr::label() const {
  std::string out = "(" + std::to_string(a1) + ",";
  out += a2 ? std::to_string(*a2) : std::string(".");
  out += ")";
  return out;
}

namespace {

int parse_pm_one(const std::string& tok, const std::string& what) {
  if (tok == "1" || tok == "+1") return 1;
  if (tok == "-1") return -1;
  throw std::invalid_argument("invalid " + what + " '" + tok +
                              "' (expected 1 or -1)");
}

}  // namespace

EmbeddedDtr dtr_from_label(const std::string& text, DesignKind design) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')')
      s += c;
  auto comma = s.find(',');
  if (comma == std::string::npos)
    throw std::invalid_argument("invalid regimen label '" + text + "'");
  const int a1 = parse_pm_one(s.substr(0, comma), "a1");
  const std::string second = s.substr(comma + 1);
  std::optional<int> a2;
  if (second != "." && !second.empty()) a2 = parse_pm_one(second, "a2");
  EmbeddedDtr dtr{a1, a2};
  const auto all = embedded_dtrs(design);
  if (std::find(all.begin(), all.end(), dtr) == all.end())
    throw std::invalid_argument("regimen " + dtr.label() +
                                " is not embedded in the " + to_string(design) +
                                " design");
  return dtr;
}

bool second_randomization(DesignKind design, int a1, int r) {
  if (design == DesignKind::Adept) return a1 == 1 && r == 0;
  return r == 0;
}

void validate_path(const TreatmentPath& path, DesignKind design) {
  if (path.a1 != 1 && path.a1 != -1)
    throw std::invalid_argument("a1 must be 1 or -1");
  if (path.r != 0 && path.r != 1) throw std::invalid_argument("r must be 0 or 1");
  const bool needs_a2 = second_randomization(design, path.a1, path.r);
  if (needs_a2 && !path.a2)
    throw std::invalid_argument("a2 missing for re-randomized path (a1=" +
                                std::to_string(path.a1) + ", r=0) under " +
                                to_string(design) + " design");
  if (!needs_a2 && path.a2) {
    if (path.r == 1)
      throw std::invalid_argument("a2 defined for responder path (a1=" +
                                  std::to_string(path.a1) + ", r=1)");
    throw std::invalid_argument(
        "a2 defined for non-re-randomized path (a1=" + std::to_string(path.a1) +
        ", r=0) under " + to_string(design) + " design");
  }
  if (path.a2 && *path.a2 != 1 && *path.a2 != -1)
    throw std::invalid_argument("a2 must be 1, -1 or empty");
  if (!(path.rand_prob_stage1 > 0.0 && path.rand_prob_stage1 < 1.0))
    throw std::invalid_argument("stage-1 randomization probability must be in (0,1)");
  if (path.a2.has_value() != path.rand_prob_stage2.has_value())
    throw std::invalid_argument(
        "stage-2 randomization probability must be set exactly when a2 is set");
  if (path.rand_prob_stage2 &&
      !(*path.rand_prob_stage2 > 0.0 && *path.rand_prob_stage2 < 1.0))
    throw std::invalid_argument("stage-2 randomization probability must be in (0,1)");
}

TreatmentPath make_path(DesignKind design, int a1, int r, std::optional<int> a2,
                        double prob_stage1, std::optional<double> prob_stage2) {
  TreatmentPath path;
  path.a1 = a1;
  path.r = r;
  path.a2 = a2;
  path.rand_prob_stage1 = prob_stage1;
  if (!a2 && prob_stage2)
    throw std::invalid_argument(
        "stage-2 randomization probability given for a path without a2");
  if (a2 && !prob_stage2) prob_stage2 = 0.5;
  path.rand_prob_stage2 = prob_stage2;
  validate_path(path, design);
  return path;
}

std::vector<EmbeddedDtr> embedded_dtrs(DesignKind design) {
  if (design == DesignKind::Adept)
    return {{1, 1}, {1, -1}, {-1, std::nullopt}};
  return {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
}

bool is_consistent(const TreatmentPath& path, const EmbeddedDtr& dtr,
                   DesignKind design) {
  validate_path(path, design);
  if (path.a1 != dtr.a1) return false;
  if (path.r == 1) return true;  // never re-randomized against its regimen
  if (!path.a2) return true;     // ADEPT (-1, 0) cell, regimen (-1,.)
  return dtr.a2 && *path.a2 == *dtr.a2;
}

double known_weight(const TreatmentPath& path, DesignKind design) {
  validate_path(path, design);
  double denom = path.rand_prob_stage1;
  if (path.a2) denom *= *path.rand_prob_stage2;
  return 1.0 / denom;
}

std::vector<TreatmentPath> design_cells(DesignKind design) {
  std::vector<TreatmentPath> cells;
  cells.push_back(make_path(design, 1, 1, std::nullopt));
  cells.push_back(make_path(design, 1, 0, 1));
  cells.push_back(make_path(design, 1, 0, -1));
  cells.push_back(make_path(design, -1, 1, std::nullopt));
  if (design == DesignKind::Adept) {
    cells.push_back(make_path(design, -1, 0, std::nullopt));
  } else {
    cells.push_back(make_path(design, -1, 0, 1));
    cells.push_back(make_path(design, -1, 0, -1));
  }
  return cells;
}

char cell_label(const TreatmentPath& path, DesignKind design) {
  validate_path(path, design);
  const auto cells = design_cells(design);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (c.a1 == path.a1 && c.r == path.r && c.a2 == path.a2)
      return static_cast<char>('A' + i);
  }
  throw std::invalid_argument("path " + path_label(path) +
                              " is not a cell of the " + to_string(design) +
                              " design");
}

std::string path_label(const TreatmentPath& path) {
  std::string out = "(" + std::to_string(path.a1) + "," + std::to_string(path.r) + ",";
  out += path.a2 ? std::to_string(*path.a2) : std::string(".");
  out += ")";
  return out;
}

}  // namespace smartcrt
