#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smartcrt/design.hpp"
#include "smartcrt/rng.hpp"

using namespace smartcrt;

TEST_CASE("embedded regimens, count and order") {
  const auto adept = embedded_dtrs(DesignKind::Adept);
  REQUIRE(adept.size() == 3);
  CHECK(adept[0] == EmbeddedDtr{1, 1});
  CHECK(adept[1] == EmbeddedDtr{1, -1});
  CHECK(adept[2] == EmbeddedDtr{-1, std::nullopt});

  const auto prot = embedded_dtrs(DesignKind::Prototypical);
  REQUIRE(prot.size() == 4);
  CHECK(prot[0] == EmbeddedDtr{1, 1});
  CHECK(prot[1] == EmbeddedDtr{1, -1});
  CHECK(prot[2] == EmbeddedDtr{-1, 1});
  CHECK(prot[3] == EmbeddedDtr{-1, -1});
}

TEST_CASE("regimen labels round-trip") {
  for (auto design : {DesignKind::Adept, DesignKind::Prototypical})
    for (const auto& dtr : embedded_dtrs(design))
      CHECK(dtr_from_label(dtr.label(), design) == dtr);
  CHECK_THROWS_AS(dtr_from_label("(-1,.)", DesignKind::Prototypical),
                  std::invalid_argument);
  CHECK_THROWS_AS(dtr_from_label("(2,1)", DesignKind::Adept), std::invalid_argument);
}

TEST_CASE("path validation per design") {
  // ADEPT: a2 defined exactly for a1 = 1, r = 0.
  CHECK_NOTHROW(make_path(DesignKind::Adept, 1, 1, std::nullopt));
  CHECK_NOTHROW(make_path(DesignKind::Adept, 1, 0, -1));
  CHECK_NOTHROW(make_path(DesignKind::Adept, -1, 0, std::nullopt));
  CHECK_THROWS_AS(make_path(DesignKind::Adept, 1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_path(DesignKind::Adept, 1, 0, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(make_path(DesignKind::Adept, -1, 0, 1), std::invalid_argument);

  // Prototypical: a2 defined exactly for r = 0.
  CHECK_NOTHROW(make_path(DesignKind::Prototypical, -1, 0, -1));
  CHECK_THROWS_AS(make_path(DesignKind::Prototypical, -1, 0, std::nullopt),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_path(DesignKind::Prototypical, -1, 1, 1), std::invalid_argument);

  CHECK_THROWS_AS(make_path(DesignKind::Adept, 0, 1, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(make_path(DesignKind::Adept, 1, 2, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(make_path(DesignKind::Adept, 1, 1, std::nullopt, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_path(DesignKind::Adept, 1, 0, 1, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("consistency indicator") {
  const auto adept = DesignKind::Adept;
  const EmbeddedDtr d11{1, 1}, d1m1{1, -1}, dm1{-1, std::nullopt};

  const auto responder = make_path(adept, 1, 1, std::nullopt);
  CHECK(is_consistent(responder, d11, adept));
  CHECK(is_consistent(responder, d1m1, adept));
  CHECK_FALSE(is_consistent(responder, dm1, adept));

  const auto cell_c = make_path(adept, 1, 0, -1);
  CHECK_FALSE(is_consistent(cell_c, d11, adept));
  CHECK(is_consistent(cell_c, d1m1, adept));

  const auto cell_e = make_path(adept, -1, 0, std::nullopt);
  CHECK(is_consistent(cell_e, dm1, adept));
  CHECK_FALSE(is_consistent(cell_e, d11, adept));
}

TEST_CASE("consistent-regimen counts per cell") {
  for (auto design : {DesignKind::Adept, DesignKind::Prototypical}) {
    for (const auto& cell : design_cells(design)) {
      std::size_t count = 0;
      for (const auto& dtr : embedded_dtrs(design))
        if (is_consistent(cell, dtr, design)) ++count;
      if (cell.r == 1) {
        // Responders are consistent with every regimen sharing a1: two under
        // the prototypical design and for ADEPT a1=1, one for ADEPT a1=-1.
        const std::size_t expected =
            (design == DesignKind::Adept && cell.a1 == -1) ? 1 : 2;
        CHECK(count == expected);
      } else {
        CHECK(count == 1);
      }
    }
  }
}

TEST_CASE("known weights") {
  const auto adept = DesignKind::Adept;
  CHECK(known_weight(make_path(adept, 1, 1, std::nullopt), adept) == doctest::Approx(2.0));
  CHECK(known_weight(make_path(adept, 1, 0, 1), adept) == doctest::Approx(4.0));
  CHECK(known_weight(make_path(adept, -1, 0, std::nullopt), adept) == doctest::Approx(2.0));
  const auto prot = DesignKind::Prototypical;
  CHECK(known_weight(make_path(prot, -1, 0, -1), prot) == doctest::Approx(4.0));
}

TEST_CASE("weight inverts the randomization probabilities") {
  // Non-default probabilities: W * prod(prob of realized assignment) == 1.
  const auto path = make_path(DesignKind::Adept, 1, 0, 1, 0.3, 0.7);
  CHECK(known_weight(path, DesignKind::Adept) * 0.3 * 0.7 == doctest::Approx(1.0));
  const auto once = make_path(DesignKind::Prototypical, -1, 1, std::nullopt, 0.25);
  CHECK(known_weight(once, DesignKind::Prototypical) * 0.25 == doctest::Approx(1.0));
}

TEST_CASE("average of I*W converges to 1 per regimen") {
  for (auto design : {DesignKind::Adept, DesignKind::Prototypical}) {
    const double p_response = 0.35;
    Rng rng(20240901);
    const std::size_t n = 20000;
    const auto dtrs = embedded_dtrs(design);
    std::vector<double> iw_sum(dtrs.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int a1 = rng.sign();
      const int r = rng.bernoulli(p_response) ? 1 : 0;
      std::optional<int> a2;
      if (second_randomization(design, a1, r)) a2 = rng.sign();
      const auto path = make_path(design, a1, r, a2);
      const double w = known_weight(path, design);
      for (std::size_t d = 0; d < dtrs.size(); ++d)
        if (is_consistent(path, dtrs[d], design)) iw_sum[d] += w;
    }
    for (std::size_t d = 0; d < dtrs.size(); ++d)
      CHECK(iw_sum[d] / n == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("cells and labels") {
  CHECK(design_cells(DesignKind::Adept).size() == 5);
  CHECK(design_cells(DesignKind::Prototypical).size() == 6);
  CHECK(cell_label(make_path(DesignKind::Adept, 1, 0, -1), DesignKind::Adept) == 'C');
  CHECK(cell_label(make_path(DesignKind::Adept, -1, 0, std::nullopt), DesignKind::Adept) == 'E');
  CHECK(cell_label(make_path(DesignKind::Prototypical, -1, 0, -1), DesignKind::Prototypical) == 'F');
  CHECK(path_label(make_path(DesignKind::Adept, 1, 1, std::nullopt)) == "(1,1,.)");
}
