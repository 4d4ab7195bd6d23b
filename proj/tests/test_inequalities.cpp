#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "ricprobe/inequalities.hpp"
#include "ricprobe/manifolds.hpp"

using namespace ricprobe;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

CheckConfig quick(uint64_t seed, std::size_t n, double T, int steps) {
  CheckConfig cc;
  cc.master_seed = seed;
  cc.n_paths = n;
  cc.t_final = T;
  cc.n_steps = steps;
  cc.n_batches = 32;
  cc.fd_cross = false;
  return cc;
}

// Slot representation of (2 + x_3)^2 - 4, paired with shift 4 below.
TestFunction square_probe_poly() {
  TestFunction h;
  h.label = "4x3+x3^2";
  h.value = [](const Vec& y) { return 4.0 * y[2] + y[2] * y[2]; };
  h.differential = [](const Vec& y) {
    Vec g = Vec::Zero(y.size());
    g[2] = 4.0 + 2.0 * y[2];
    return g;
  };
  return h;
}

double sphere_coord_semigroup(double s, const Vec& y) { return std::exp(-2.0 * s) * y[2]; }

}  // namespace

TEST_CASE("margin classification uses the two-interval and three-interval bands") {
  CHECK(classify_margin(0.5, 0.1) == Verdict::pass);
  CHECK(classify_margin(-0.2, 0.1) == Verdict::pass);
  CHECK(classify_margin(0.0, 0.0) == Verdict::pass);
  CHECK(classify_margin(-1.0, 0.3) == Verdict::fail);
  CHECK(classify_margin(-1.0, 0.0) == Verdict::fail);
  CHECK(classify_margin(-1.0, 0.45) == Verdict::inconclusive);
  CHECK(classify_margin(-1.0, 0.6) == Verdict::pass);
  CHECK(std::string(to_string(Verdict::pass)) == "PASS");
  CHECK(std::string(to_string(Verdict::fail)) == "FAIL");
  CHECK(std::string(to_string(Verdict::inconclusive)) == "INCONCLUSIVE");
}

TEST_CASE("semigroup gradient bound matches sphere closed forms") {
  Sphere s(2);
  CheckConfig cc = quick(101, 8192, 0.2, 200);
  cc.fd_cross = true;
  const auto rep = check_gradient_ineq_1(s, v3(1, 0, 0), TestFunction::coordinate(2), 2.0,
                                         BoundFields::constant(1.0, 0.0), cc);
  CHECK(rep.name == "semigroup-gradient-bound");
  // Deterministic curvature claim: mass e^T - 1, damped mean e^{-2T} grad f.
  const double lhs_true = std::exp(-0.8);
  const double rhs_true = std::exp(0.4) * (2.0 + std::exp(-1.2)) / 3.0;
  CHECK(std::abs(rep.lhs.value - lhs_true) < 3.0 * rep.lhs.ci + 0.01);
  CHECK(std::abs(rep.rhs.value - rhs_true) < 3.0 * rep.rhs.ci + 0.02);
  CHECK(rep.margin.value > 0.5);
  CHECK(rep.verdict == Verdict::pass);
  CHECK(rep.cross_ok);
  CHECK(rep.cross_gap < rep.cross_tol);
  CHECK(rep.params.at("p") == 2.0);
}

TEST_CASE("flat linear functions make the gradient bound an identity") {
  HalfSpace hs(2);
  CheckConfig cc = quick(102, 512, 0.05, 50);
  const auto rep = check_gradient_ineq_1(hs, v2(0.0, 5.0), TestFunction::coordinate(0), 1.5,
                                         BoundFields::none(), cc);
  CHECK(rep.lhs.value == 1.0);
  CHECK(rep.rhs.value == 1.0);
  CHECK(rep.margin.value == 0.0);
  CHECK(rep.margin.ci == 0.0);
  CHECK(rep.verdict == Verdict::pass);
}

TEST_CASE("expanding drift breaks a claimed curvature floor of zero") {
  // True tensor is -1 everywhere; with the claim at zero the left side grows
  // like e^{2T} while the right side stays at one, a deterministic failure.
  HalfSpace hs(2);
  hs.set_drift(DriftField::radial_gradient(-1.0, 2, v2(0.0, 8.0)));
  CheckConfig cc = quick(103, 512, 0.2, 100);
  const auto rep = check_gradient_ineq_1(hs, v2(0.0, 8.0), TestFunction::coordinate(0), 2.0,
                                         BoundFields::none(), cc);
  CHECK(rep.verdict == Verdict::fail);
  CHECK(rep.margin.value == doctest::Approx(1.0 - std::exp(0.4)).epsilon(0.01));
}

TEST_CASE("gradient defect bound matches sphere closed forms") {
  Sphere s(2);
  CheckConfig cc = quick(104, 8192, 0.2, 200);
  cc.fd_cross = true;
  const auto rep = check_gradient_ineq_2(s, v3(1, 0, 0), TestFunction::coordinate(2), 2.0,
                                         BoundFields::constant(1.0, 0.0), cc);
  CHECK(rep.name == "gradient-defect-bound");
  const double ptg = (2.0 + std::exp(-1.2)) / 3.0;  // P_T |grad f|^2
  const double lhs_true = std::pow(1.0 - 0.5 * std::exp(-0.4), 2);
  const double rhs_true =
      std::exp(0.2) * (1.0 - std::exp(-0.2) + 0.25 * ptg + (std::exp(0.2) - 1.0) * 0.25 * ptg);
  CHECK(std::abs(rep.lhs.value - lhs_true) < 3.0 * rep.lhs.ci + 0.01);
  CHECK(std::abs(rep.rhs.value - rhs_true) < 3.0 * rep.rhs.ci + 0.015);
  CHECK(rep.margin.value > 0.03);
  CHECK(rep.verdict == Verdict::pass);
  CHECK(rep.cross_ok);
}

TEST_CASE("gradient defect bound holds with slack in flat space") {
  HalfSpace hs(2);
  CheckConfig cc = quick(105, 4096, 0.05, 100);
  cc.fd_cross = true;
  const TestFunction f = TestFunction::windowed_coordinate(0, 1.0, v2(0.0, 4.0), 1.5, 2.5);
  const auto rep =
      check_gradient_ineq_2(hs, v2(0.5, 4.0), f, 2.0, BoundFields::none(), cc);
  // Zero mass and identity transport leave a pure averaging gap.
  CHECK(rep.margin.value > 0.0);
  CHECK(rep.verdict == Verdict::pass);
  CHECK(rep.cross_ok);
}

TEST_CASE("positive curvature defeats the defect bound claimed at zero") {
  // The defect display is sensitive to the upper curvature bound: on the unit
  // sphere a claim of zero undershoots the transported disagreement.
  Sphere s(2);
  CheckConfig cc = quick(106, 8192, 0.2, 200);
  const auto rep = check_gradient_ineq_2(s, v3(1, 0, 0), TestFunction::coordinate(2), 2.0,
                                         BoundFields::none(), cc);
  const double ptg = (2.0 + std::exp(-1.2)) / 3.0;
  const double margin_true =
      (1.0 - std::exp(-0.2) + 0.25 * ptg) - std::pow(1.0 - 0.5 * std::exp(-0.4), 2);
  CHECK(rep.verdict == Verdict::fail);
  CHECK(std::abs(rep.margin.value - margin_true) < 3.0 * rep.margin.ci + 0.01);
}

TEST_CASE("unclaimed boundary bending defeats the defect bound") {
  SphericalCap cap(kPi / 3.0);
  const Vec probe = v3(std::sin(kPi / 3.0), 0.0, 0.5);
  CheckConfig cc = quick(107, 8192, 0.05, 100);
  const auto rep = check_gradient_ineq_2(cap, probe, TestFunction::coordinate(2), 2.0,
                                         BoundFields::constant(1.0, 0.0), cc);
  CHECK(rep.verdict == Verdict::fail);
  CHECK(rep.margin.value < 0.0);
}

TEST_CASE("pathspace bound reduces to the endpoint bound for one slot") {
  Sphere s(2);
  const BoundFields b = BoundFields::constant(1.0, 0.0);
  CheckConfig cc = quick(108, 4096, 0.2, 200);
  const auto r1 =
      check_gradient_ineq_1(s, v3(1, 0, 0), TestFunction::coordinate(2), 2.0, b, cc);
  const CylindricFunction F = CylindricFunction::terminal(200, TestFunction::coordinate(2));
  const auto rp = check_pathspace_gradient(s, v3(1, 0, 0), F, 2.0, b, cc);
  CHECK(rp.name == "pathspace-gradient-bound");
  CHECK(rp.lhs.value == doctest::Approx(r1.lhs.value).epsilon(1e-10));
  CHECK(rp.rhs.value == doctest::Approx(r1.rhs.value).epsilon(1e-10));
  CHECK(rp.margin.value == doctest::Approx(r1.margin.value).epsilon(1e-10));
  CHECK(rp.verdict == Verdict::pass);
}

TEST_CASE("pathspace bound holds for a two-slot product") {
  Sphere s(2);
  CheckConfig cc = quick(109, 4096, 0.2, 200);
  cc.fd_cross = true;
  const CylindricFunction F(CylindricFunction::Mode::product,
                            {CylinderSlot{100, 1.0, TestFunction::coordinate(0)},
                             CylinderSlot{200, 1.0, TestFunction::coordinate(2)}});
  const auto rep =
      check_pathspace_gradient(s, v3(0, 0, 1), F, 1.5, BoundFields::constant(1.0, 0.0), cc);
  CHECK(rep.verdict == Verdict::pass);
  CHECK(rep.margin.value > 0.0);
  CHECK(rep.cross_ok);

  const CylindricFunction Fc(CylindricFunction::Mode::sum,
                             {CylinderSlot{200, 0.0, TestFunction::coordinate(0)}}, 3.0);
  const auto rc =
      check_pathspace_gradient(s, v3(0, 0, 1), Fc, 2.0, BoundFields::constant(1.0, 0.0), cc);
  CHECK(rc.lhs.value == 0.0);
  CHECK(rc.rhs.value == 0.0);
  CHECK(rc.verdict == Verdict::pass);
  CHECK(rc.cross_ok);
}

TEST_CASE("conditional variance bound matches the sphere closed form") {
  Sphere s(2);
  const CylindricFunction F = CylindricFunction::terminal(160, TestFunction::coordinate(2));
  const BoundFields b = BoundFields::constant(1.0, 0.0);
  CheckConfig cc = quick(110, 8192, 0.2, 160);
  const auto rep = check_poincare(s, v3(1, 0, 0), F, 0.2, b, cc);
  CHECK(rep.name == "poincare");
  const double lhs_true = (1.0 - std::exp(-1.2)) / 3.0;
  // 2 * P_T |grad f|^2 * int_0^T (1 + e^T - e^s)^2 ds, up to the trapezoid
  // endpoint loss at the terminal node.
  const double a = 1.0 + std::exp(0.2);
  const double bracket =
      a * a * 0.2 - 2.0 * a * (std::exp(0.2) - 1.0) + (std::exp(0.4) - 1.0) / 2.0;
  const double rhs_true = 2.0 * ((2.0 + std::exp(-1.2)) / 3.0) * bracket;
  CHECK(std::abs(rep.lhs.value - lhs_true) < 3.0 * rep.lhs.ci + 0.01);
  CHECK(rep.rhs.value == doctest::Approx(rhs_true).epsilon(0.05));
  CHECK(rep.margin.value > 0.1);
  CHECK(rep.verdict == Verdict::pass);
  CHECK(rep.quad_gap < 0.01);
  CHECK(rep.exit_fraction == 0.0);
  CHECK(rep.correction_band == 0.0);
  CHECK(rep.note.find("exact-terminal") != std::string::npos);

  const auto rep0 = check_poincare(s, v3(1, 0, 0), F, 0.0, b, cc);
  CHECK(rep0.lhs.value == 0.0);
  CHECK(rep0.rhs.value == 0.0);
  CHECK(rep0.verdict == Verdict::pass);
  CHECK(rep0.note.find("zero-length") != std::string::npos);
}

TEST_CASE("conditional variance grows with the window and the claim") {
  Sphere s(2);
  const CylindricFunction F = CylindricFunction::terminal(320, TestFunction::coordinate(2));
  CheckConfig cc = quick(111, 4096, 0.2, 320);
  EntropyOpts eo;
  eo.semigroup = sphere_coord_semigroup;

  std::vector<double> ts = {0.05, 0.1, 0.2};
  std::vector<double> lhs;
  std::vector<InequalityReport> reps;
  for (double t : ts) {
    reps.push_back(check_poincare(s, v3(1, 0, 0), F, t, BoundFields::constant(1.0, 0.0), cc, eo));
    lhs.push_back(reps.back().lhs.value);
  }
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    const double closed = std::exp(-4.0 * (0.2 - t)) * (1.0 - std::exp(-6.0 * t)) / 3.0;
    CHECK(std::abs(lhs[i] - closed) < 3.0 * reps[i].lhs.ci + 0.01);
    CHECK(reps[i].verdict == Verdict::pass);
  }
  CHECK(lhs[0] < lhs[1]);
  CHECK(lhs[1] < lhs[2]);
  CHECK(reps[0].note.find("semigroup-oracle") != std::string::npos);
  CHECK(reps[2].note.find("exact-terminal") != std::string::npos);

  const auto rep_k2 =
      check_poincare(s, v3(1, 0, 0), F, 0.2, BoundFields::constant(2.0, 0.0), cc, eo);
  CHECK(rep_k2.rhs.value > reps[2].rhs.value);
  CHECK(rep_k2.verdict == Verdict::pass);
}

TEST_CASE("an early-window functional defeats the drift-free variance bound") {
  // Two slots sharing one coordinate function, conditioned at the first slot:
  // with the curvature claim dropped to zero the energy integral cannot cover
  // the early correlation, so the check must report a failure. Restoring the
  // true claim restores the bound.
  Sphere s(2);
  const CylindricFunction F(CylindricFunction::Mode::sum,
                            {CylinderSlot{16, 1.0, TestFunction::coordinate(2)},
                             CylinderSlot{160, -0.5, TestFunction::coordinate(2)}});
  CheckConfig cc = quick(112, 32768, 0.2, 160);
  EntropyOpts eo;
  eo.semigroup = sphere_coord_semigroup;
  const auto bad = check_poincare(s, v3(1, 0, 0), F, 0.02, BoundFields::none(), cc, eo);
  CHECK(bad.verdict == Verdict::fail);
  CHECK(bad.margin.value < -5e-4);
  CHECK(bad.margin.value > -3e-3);
  CHECK(bad.note.find("semigroup-oracle") != std::string::npos);

  const auto good =
      check_poincare(s, v3(1, 0, 0), F, 0.02, BoundFields::constant(1.0, 0.0), cc, eo);
  CHECK(good.verdict == Verdict::pass);
}

TEST_CASE("entropy gain bound holds and doubles the variance energy") {
  Sphere s(2);
  const CylindricFunction F(CylindricFunction::Mode::sum,
                            {CylinderSlot{160, 1.0, TestFunction::coordinate(2)}}, 2.0);
  const BoundFields b = BoundFields::constant(1.0, 0.0);
  CheckConfig cc = quick(113, 8192, 0.2, 160);
  const auto ls = check_logsobolev(s, v3(1, 0, 0), F, 0.0, 0.2, b, cc);
  const auto pv = check_poincare(s, v3(1, 0, 0), F, 0.2, b, cc);
  CHECK(ls.name == "log-sobolev");
  CHECK(ls.verdict == Verdict::pass);
  CHECK(ls.margin.value > 0.1);
  CHECK(ls.lhs.value > 0.2);
  CHECK(ls.lhs.value < 0.7);
  // Shared seed and shared energy columns: the entropy right side is exactly
  // twice the variance right side.
  CHECK(ls.rhs.value == doctest::Approx(2.0 * pv.rhs.value).epsilon(1e-12));

  // The variance side is shift-invariant.
  const CylindricFunction F0 = CylindricFunction::terminal(160, TestFunction::coordinate(2));
  const auto pv0 = check_poincare(s, v3(1, 0, 0), F0, 0.2, b, cc);
  CHECK(pv.lhs.value == doctest::Approx(pv0.lhs.value).epsilon(1e-9));

  const auto trivial = check_logsobolev(s, v3(1, 0, 0), F, 0.1, 0.1, b, cc);
  CHECK(trivial.lhs.value == 0.0);
  CHECK(trivial.rhs.value == 0.0);
  CHECK(trivial.verdict == Verdict::pass);
}

TEST_CASE("analytic and nested conditional squares agree in the entropy bound") {
  Sphere s(2);
  const CylindricFunction F(CylindricFunction::Mode::sum,
                            {CylinderSlot{160, 1.0, TestFunction::coordinate(2)}}, 2.0);
  const BoundFields b = BoundFields::constant(1.0, 0.0);

  CheckConfig cc_o = quick(114, 4096, 0.2, 160);
  EntropyOpts eo_o;
  eo_o.f_squared = CylindricFunction(CylindricFunction::Mode::sum,
                                     {CylinderSlot{160, 1.0, square_probe_poly()}}, 4.0);
  eo_o.semigroup_sq = [](double t, const Vec& y) {
    return 4.0 * std::exp(-2.0 * t) * y[2] + 1.0 / 3.0 +
           std::exp(-6.0 * t) * (y[2] * y[2] - 1.0 / 3.0);
  };
  const auto oracle = check_logsobolev(s, v3(1, 0, 0), F, 0.1, 0.2, b, cc_o, eo_o);
  CHECK(oracle.verdict == Verdict::pass);
  CHECK(oracle.note.find("base semigroup-oracle") != std::string::npos);

  CheckConfig cc_n = quick(114, 2048, 0.2, 160);
  EntropyOpts eo_n;
  eo_n.n_inner = 48;
  const auto nested = check_logsobolev(s, v3(1, 0, 0), F, 0.1, 0.2, b, cc_n, eo_n);
  CHECK(nested.verdict == Verdict::pass);
  CHECK(nested.note.find("base nested") != std::string::npos);
  CHECK(std::abs(oracle.lhs.value - nested.lhs.value) <
        3.0 * (oracle.lhs.ci + nested.lhs.ci) + 0.05 * std::abs(oracle.lhs.value) + 0.01);
}

TEST_CASE("truncated checks reduce to the plain ones when the cutoff stays flat") {
  Sphere s(2);
  const BoundFields b = BoundFields::constant(1.0, 0.0);
  CheckConfig cc = quick(115, 4096, 0.2, 160);
  const CylindricFunction F = CylindricFunction::terminal(160, TestFunction::coordinate(2));
  const auto plain = check_poincare(s, v3(1, 0, 0), F, 0.2, b, cc);

  CylindricFunction Fc = CylindricFunction::terminal(160, TestFunction::coordinate(2));
  Fc.set_cutoff(SupCutoff{v3(1, 0, 0), 3.5, 4.0});  // beyond the diameter
  const auto tr = check_truncated(s, v3(1, 0, 0), Fc, TruncatedMode::poincare, 0.0, 0.2, b, cc);
  CHECK(tr.name == "truncated-poincare");
  CHECK(tr.lhs.value == doctest::Approx(plain.lhs.value).epsilon(1e-12));
  CHECK(tr.rhs.value == doctest::Approx(plain.rhs.value).epsilon(1e-12));
  CHECK(tr.margin.value == doctest::Approx(plain.margin.value).epsilon(1e-12));
  CHECK(tr.exit_fraction == 0.0);
  CHECK(tr.correction_band == 0.0);
  CHECK(tr.verdict == Verdict::pass);

  const auto trl =
      check_truncated(s, v3(1, 0, 0), Fc, TruncatedMode::logsobolev, 0.0, 0.2, b, cc);
  CHECK(trl.name == "truncated-log-sobolev");
  CHECK(trl.verdict == Verdict::pass);
}

TEST_CASE("truncated variance bound survives an unbounded drift derivative") {
  // Quartic confining potential on the half plane: the tensor floor falls
  // like -3|x|^2, so only the localized display applies. The probe sits on
  // the wall, where the flat boundary bends nothing.
  HalfSpace hs(2);
  hs.set_drift(DriftField::radial_gradient(1.0, 4, v2(0.0, 0.0)));
  BoundFields b;
  b.curvature = [](const Vec& x) { return 3.0 * x.squaredNorm(); };
  CylindricFunction F = CylindricFunction::terminal(192, TestFunction::coordinate(0));
  F.set_cutoff(SupCutoff{v2(1.0, 0.0), 1.6, 2.4});
  CheckConfig cc = quick(116, 8192, 0.05, 192);
  const auto rep =
      check_truncated(hs, v2(1.0, 0.0), F, TruncatedMode::poincare, 0.0, 0.05, b, cc);
  CHECK(rep.verdict == Verdict::pass);
  CHECK(rep.margin.value > 0.0);
  CHECK(rep.exit_fraction <= 1e-3);

  CylindricFunction Ftight = CylindricFunction::terminal(192, TestFunction::coordinate(0));
  Ftight.set_cutoff(SupCutoff{v2(1.0, 0.0), 0.2, 0.5});
  CHECK_THROWS_AS(
      check_truncated(hs, v2(1.0, 0.0), Ftight, TruncatedMode::poincare, 0.0, 0.05, b, cc),
      std::runtime_error);
}

TEST_CASE("checks are reproducible across worker counts") {
  Sphere s(2);
  CheckConfig c1 = quick(117, 1024, 0.1, 100);
  CheckConfig c3 = c1;
  c3.workers = 3;
  const auto a =
      check_gradient_ineq_1(s, v3(0, 0, 1), TestFunction::coordinate(0), 2.0,
                            BoundFields::constant(1.0, 0.0), c1);
  const auto bb =
      check_gradient_ineq_1(s, v3(0, 0, 1), TestFunction::coordinate(0), 2.0,
                            BoundFields::constant(1.0, 0.0), c3);
  CHECK(a.lhs.value == bb.lhs.value);
  CHECK(a.rhs.value == bb.rhs.value);
  CHECK(a.margin.value == bb.margin.value);
}

TEST_CASE("inequality checks validate their inputs") {
  Sphere s(2);
  const BoundFields b = BoundFields::constant(1.0, 0.0);
  CheckConfig cc = quick(118, 64, 0.2, 160);
  const TestFunction f = TestFunction::coordinate(2);
  CHECK_THROWS_AS(check_gradient_ineq_1(s, v3(1, 0, 0), f, 2.5, b, cc), std::invalid_argument);
  CHECK_THROWS_AS(check_gradient_ineq_2(s, v3(1, 0, 0), f, 0.5, b, cc), std::invalid_argument);

  CylindricFunction Fc = CylindricFunction::terminal(160, f);
  Fc.set_cutoff(SupCutoff{v3(1, 0, 0), 3.5, 4.0});
  CHECK_THROWS_AS(check_pathspace_gradient(s, v3(1, 0, 0), Fc, 2.0, b, cc),
                  std::invalid_argument);
  CHECK_THROWS_AS(check_poincare(s, v3(1, 0, 0), Fc, 0.2, b, cc), std::invalid_argument);

  const CylindricFunction F = CylindricFunction::terminal(160, f);
  CHECK_THROWS_AS(check_truncated(s, v3(1, 0, 0), F, TruncatedMode::poincare, 0.0, 0.2, b, cc),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      check_truncated(s, v3(1, 0, 0), Fc, TruncatedMode::poincare, 0.1, 0.2, b, cc),
      std::invalid_argument);

  // Off-grid time, indivisible window, short quadrature, oversized nesting.
  CHECK_THROWS_AS(check_poincare(s, v3(1, 0, 0), F, 0.0333, b, cc), std::invalid_argument);
  CHECK_THROWS_AS(check_poincare(s, v3(1, 0, 0), F, 0.0375, b, cc), std::invalid_argument);
  EntropyOpts eo;
  eo.quad_intervals = 4;
  CHECK_THROWS_AS(check_poincare(s, v3(1, 0, 0), F, 0.2, b, cc, eo), std::invalid_argument);
  CHECK_THROWS_AS(check_logsobolev(s, v3(1, 0, 0), F, 0.15, 0.1, b, cc), std::invalid_argument);

  CheckConfig big = quick(118, 2000000, 0.2, 160);
  CHECK_THROWS_AS(check_poincare(s, v3(1, 0, 0), F, 0.1, b, big), std::invalid_argument);

  EntropyOpts bad_sq;
  bad_sq.f_squared = Fc;
  bad_sq.semigroup_sq = [](double, const Vec&) { return 1.0; };
  CHECK_THROWS_AS(check_logsobolev(s, v3(1, 0, 0), F, 0.0, 0.2, b, cc, bad_sq),
                  std::invalid_argument);

  // A slot representation that is not the square of F is caught pathwise.
  const CylindricFunction F2(CylindricFunction::Mode::sum,
                             {CylinderSlot{160, 1.0, TestFunction::coordinate(2)}}, 2.0);
  EntropyOpts wrong_sq;
  wrong_sq.f_squared = CylindricFunction(CylindricFunction::Mode::sum,
                                         {CylinderSlot{160, 1.0, TestFunction::coordinate(2)}},
                                         4.0);
  wrong_sq.semigroup_sq = [](double, const Vec&) { return 1.0; };
  CheckConfig tiny = quick(118, 64, 0.2, 160);
  CHECK_THROWS_AS(check_logsobolev(s, v3(1, 0, 0), F2, 0.0, 0.2, b, tiny, wrong_sq),
                  std::runtime_error);
}
