#pragma once

#include <optional>
#include <string>
#include <vector>

namespace smartcrt {

// The two supported two-stage cluster-randomized SMART topologies.
//
// Adept: all clusters are randomized at stage 1; only non-responders to the
// first-stage arm a1 = 1 are re-randomized. Three embedded regimens.
//
// Prototypical: all non-responders are re-randomized regardless of the
// first-stage arm. Four embedded regimens.
enum class DesignKind { Adept, Prototypical };

std::string to_string(DesignKind design);
DesignKind design_from_string(const std::string& name);

// One embedded dynamic treatment regimen, labeled (a1, a2). `a2` is unset
// only for the ADEPT regimen that never re-randomizes, written "(-1,.)".
struct EmbeddedDtr {
  int a1 = 1;
  std::optional<int> a2;

  std::string label() const;
  friend bool operator==(const EmbeddedDtr&, const EmbeddedDtr&) = default;
};

// Parses labels like "(1,1)", "(1,-1)", "(-1,.)"; parentheses optional.
EmbeddedDtr dtr_from_label(const std::string& text, DesignKind design);

// The realized randomization sequence of one cluster together with the
// probabilities of the assignments it actually received. Defaults match the
// equal-probability randomization of both designs. `a2` (and with it
// `rand_prob_stage2`) is set exactly when the design re-randomizes a cluster
// with this (a1, r).
struct TreatmentPath {
  int a1 = 1;
  int r = 1;
  std::optional<int> a2;
  double rand_prob_stage1 = 0.5;
  std::optional<double> rand_prob_stage2;
};

// Validating constructor. Throws std::invalid_argument when the (a1, r, a2)
// combination is impossible under the design or a probability is outside
// (0, 1).
TreatmentPath make_path(DesignKind design, int a1, int r, std::optional<int> a2,
                        double prob_stage1 = 0.5,
                        std::optional<double> prob_stage2 = std::nullopt);

void validate_path(const TreatmentPath& path, DesignKind design);

// Whether the design re-randomizes a cluster with this (a1, r).
bool second_randomization(DesignKind design, int a1, int r);

// Embedded regimens in fixed order: (1,1), (1,-1), then the a1 = -1
// regimen(s). Coefficient and working-covariance indices follow this order.
std::vector<EmbeddedDtr> embedded_dtrs(DesignKind design);

// True when the realized path could have arisen under `dtr`. A responder is
// consistent with every regimen sharing its first-stage treatment; a
// re-randomized non-responder only with the regimen matching its a2.
bool is_consistent(const TreatmentPath& path, const EmbeddedDtr& dtr,
                   DesignKind design);

// Inverse of the product of the randomization probabilities along the path:
// 2 for once-randomized and 4 for twice-randomized clusters under the
// default probabilities.
double known_weight(const TreatmentPath& path, DesignKind design);

// Canonical randomization cells in table order (A..E for ADEPT, A..F for the
// prototypical design), with default probabilities.
std::vector<TreatmentPath> design_cells(DesignKind design);

// Cell letter of a path within its design.
char cell_label(const TreatmentPath& path, DesignKind design);

// "(a1,r,a2)" with "." for an undefined a2, e.g. "(1,1,.)" or "(1,0,-1)".
std::string path_label(const TreatmentPath& path);

}  // namespace smartcrt
