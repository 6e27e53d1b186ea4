#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <string>

#include <ldgeom/contraction.hpp>

#include "support.hpp"

using namespace ldgeom;
using testsupport::Mat;
using testsupport::Vec;

namespace {

// The worked three-state instance: p uniform, observable values (0, 1, 2),
// target mean 3/2.  The conjugate tilt solves t^2 = t + 3 in t = e^alpha.
const double kT = (1.0 + std::sqrt(13.0)) / 2.0;
const double kAlphaStar = std::log(kT);                     // 0.834115194352401154
const double kPhiStar = 0.197377588033948271;               // 1.5 alpha - log((1+t+t^2)/3)
const double kPsiStar = 1.05379520349465346;                // log((1+t+t^2)/3)

ObservableMatrix<double> ramp3() {
  Mat X(1, 3);
  X << 0.0, 1.0, 2.0;
  return ObservableMatrix<double>(X);
}

MomentPoint<double> point(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double t : v) x(i++) = t;
  return MomentPoint<double>(x);
}

NaturalParameter<double> natural(std::initializer_list<double> v) {
  Vec a(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double t : v) a(i++) = t;
  return NaturalParameter<double>(a);
}

}  // namespace

TEST_CASE("observable matrices enforce rank and gauge exclusions") {
  CHECK_THROWS_AS(ObservableMatrix<double>{Mat::Zero(3, 3)}, DimensionMismatch);
  CHECK_THROWS_AS(ObservableMatrix<double>{Mat::Zero(0, 4)}, DimensionMismatch);

  Mat dup(2, 4);
  dup << 0, 1, 2, 3, 0, 1, 2, 3;
  CHECK_THROWS_AS(ObservableMatrix<double>{dup}, DegenerateObservable);

  Mat with_ones(2, 3);
  with_ones << 1, 1, 1, 0, 1, 2;
  CHECK_THROWS_AS(ObservableMatrix<double>{with_ones}, DegenerateObservable);

  // A hidden constant combination is just as bad as a literal ones row.
  Mat hidden(2, 4);
  hidden << 0.5, 1.0, 1.5, 2.0, 0.5, 0.0, -0.5, -1.0;  // rows sum to the ones row
  CHECK_THROWS_AS(ObservableMatrix<double>{hidden}, DegenerateObservable);

  Mat nan_entry(1, 3);
  nan_entry << 0.0, std::nan(""), 2.0;
  CHECK_THROWS_AS(ObservableMatrix<double>{nan_entry}, NonFiniteValue);

  // The two-state indicator observable is the smallest valid instance.
  Mat bern(1, 2);
  bern << 0.0, 1.0;
  const ObservableMatrix<double> B(bern);
  CHECK(B.observables() == 1);
  CHECK(B.states() == 2);

  // Rows dependent just above the rank tolerance still construct; the
  // conjugate solver is what reports the degeneracy (tested further down).
  Mat near(2, 4);
  near << 0, 1, 2, 3, 0, 1 + 1e-8, 2, 3;
  CHECK_NOTHROW(ObservableMatrix<double>{near});
}

TEST_CASE("log partition lifts the free energy") {
  const auto X = ramp3();
  const auto p = ProbabilityVector<double>::uniform(3);

  CHECK(log_partition(natural({0.0}), X, p) == 0.0);
  CHECK(log_partition(natural({1.0}), X, p) ==
        doctest::Approx(1.30899367577627061).epsilon(1e-14));

  std::mt19937_64 gen(111);
  for (int it = 0; it < 50; ++it) {
    const int n = 3 + int(gen() % 6);
    const int k = 1 + int(gen() % (n - 2));
    const Mat Xm = testsupport::random_observable(gen, n, k);
    const ObservableMatrix<double> Xo(Xm);
    const ProbabilityVector<double> pr(testsupport::random_simplex(gen, n));
    Vec a(k);
    for (int i = 0; i < k; ++i) a(i) = testsupport::uniform(gen, -3.0, 3.0);
    const NaturalParameter<double> alpha(a);
    const EnergyVector<double> lifted(Xm.transpose() * a);
    CHECK(log_partition(alpha, Xo, pr) == free_energy(lifted, pr));
  }
}

TEST_CASE("tilted mean and covariance are the first two cumulants") {
  const auto X = ramp3();
  const auto p = ProbabilityVector<double>::uniform(3);

  CHECK(std::abs(tilted_mean(natural({0.0}), X, p)(0) - 1.0) < 1e-15);
  CHECK(std::abs(tilted_mean(natural({kAlphaStar}), X, p)(0) - 1.5) < 1e-9);

  Mat bern(1, 2);
  bern << 0.0, 1.0;
  const ObservableMatrix<double> B(bern);
  const auto half = ProbabilityVector<double>::uniform(2);
  CHECK(std::abs(tilted_covariance(natural({0.0}), B, half)(0, 0) - 0.25) < 1e-15);

  std::mt19937_64 gen(112);
  for (int it = 0; it < 30; ++it) {
    const int n = 3 + int(gen() % 6);
    const int k = 1 + int(gen() % (n - 2));
    const ObservableMatrix<double> Xo(testsupport::random_observable(gen, n, k));
    const ProbabilityVector<double> pr(testsupport::random_simplex(gen, n));
    Vec a(k);
    for (int i = 0; i < k; ++i) a(i) = testsupport::uniform(gen, -2.0, 2.0);

    const auto psi = [&](const Vec& v) {
      return log_partition(NaturalParameter<double>(v), Xo, pr);
    };
    const auto mean = [&](const Vec& v) {
      return Vec(tilted_mean(NaturalParameter<double>(v), Xo, pr));
    };

    const Vec g = tilted_mean(NaturalParameter<double>(a), Xo, pr);
    CHECK((testsupport::gradient_fd(psi, a, 1e-5) - g).cwiseAbs().maxCoeff() < 1e-6);

    const Mat C = tilted_covariance(NaturalParameter<double>(a), Xo, pr);
    CHECK((C - C.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((testsupport::jacobian_fd(mean, a, 1e-5) - C).cwiseAbs().maxCoeff() < 1e-6);

    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("conjugate solves match hand algebra and round-trip") {
  const auto X = ramp3();
  const auto p = ProbabilityVector<double>::uniform(3);

  const auto sol = solve_conjugate(point({1.5}), X, p);
  CHECK(std::abs(sol.alpha.values()(0) - kAlphaStar) < 1e-9);
  CHECK(sol.residual <= 1e-12);
  CHECK(sol.iterations <= 20);

  // The prior mean is the zero-tilt fixed point, recognized without stepping.
  const auto at_mean = solve_conjugate(point({1.0}), X, p);
  CHECK(at_mean.alpha.values()(0) == 0.0);
  CHECK(at_mean.iterations == 0);

  // The boundary case k = n - 1 round-trips on a fixed well-conditioned
  // instance (the random generator targets k <= n - 2).
  Mat holo(2, 3);
  holo << 0, 1, 2, 0, 1, 4;
  const ObservableMatrix<double> Ho(holo);
  Vec ah(2);
  ah << 0.3, -0.2;
  const Vec xh = tilted_mean(NaturalParameter<double>(ah), Ho, p);
  CHECK((solve_conjugate(MomentPoint<double>(xh), Ho, p).alpha.values() - ah)
            .cwiseAbs()
            .maxCoeff() < 1e-8);

  std::mt19937_64 gen(113);
  for (int it = 0; it < 200; ++it) {
    const int n = 3 + int(gen() % 6);
    const int k = 1 + int(gen() % (n - 2));
    const Mat Xm = testsupport::random_observable(gen, n, k);
    const ObservableMatrix<double> Xo(Xm);
    const ProbabilityVector<double> pr(testsupport::random_simplex(gen, n));
    Vec a(k);
    for (int i = 0; i < k; ++i) a(i) = testsupport::uniform(gen, -3.0, 3.0);
    const NaturalParameter<double> alpha(a);
    const Vec x = tilted_mean(alpha, Xo, pr);

    const auto back = solve_conjugate(MomentPoint<double>(x), Xo, pr);
    CHECK((back.alpha.values() - a).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((tilted_mean(back.alpha, Xo, pr) - x).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("rate function matches the grid oracle and definitional identities") {
  const auto X = ramp3();
  const auto p = ProbabilityVector<double>::uniform(3);

  CHECK(std::abs(moment_rate(point({1.5}), X, p) - kPhiStar) < 1e-9);
  CHECK(std::abs(kAlphaStar * 1.5 - kPsiStar - kPhiStar) < 1e-15);
  CHECK(std::abs(moment_rate(point({1.0}), X, p)) < 1e-15);

  const auto nustar = information_projection(point({1.5}), X, p);
  Vec expect(3);
  expect << 0.116204060378000892, 0.267591879243998216, 0.616204060378000892;
  CHECK((nustar.values() - expect).cwiseAbs().maxCoeff() < 1e-9);

  std::mt19937_64 gen(114);
  for (int it = 0; it < 60; ++it) {
    const int n = 3 + int(gen() % 6);
    const int k = 1 + int(gen() % (n - 2));
    const Mat Xm = testsupport::random_observable(gen, n, k);
    const ObservableMatrix<double> Xo(Xm);
    const ProbabilityVector<double> pr(testsupport::random_simplex(gen, n));
    Vec a(k);
    for (int i = 0; i < k; ++i) a(i) = testsupport::uniform(gen, -1.5, 1.5);
    const Vec x = tilted_mean(NaturalParameter<double>(a), Xo, pr);
    const MomentPoint<double> xp(x);

    const double phi = moment_rate(xp, Xo, pr);
    CHECK(phi >= -1e-13);
    const auto proj = information_projection(xp, Xo, pr);
    CHECK((Xm * proj.values() - x).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(phi - kl_divergence(proj, pr)) < 1e-10);

    // Convexity along random midpoints of realized moments.
    Vec a2(k);
    for (int i = 0; i < k; ++i) a2(i) = testsupport::uniform(gen, -1.5, 1.5);
    const Vec y = tilted_mean(NaturalParameter<double>(a2), Xo, pr);
    const double mid = moment_rate(MomentPoint<double>((x + y) / 2.0), Xo, pr);
    CHECK(mid <= (phi + moment_rate(MomentPoint<double>(y), Xo, pr)) / 2.0 + 1e-12);
  }

  // Brute force: a fiber grid scan never finds a smaller divergence than the
  // projection, and localizes the same minimizer.
  std::mt19937_64 ggen(115);
  for (int it = 0; it < 5; ++it) {
    const int n = 3 + int(ggen() % 2);
    const int k = 1;
    const Mat Xm = testsupport::random_observable(ggen, n, k);
    const ObservableMatrix<double> Xo(Xm);
    const ProbabilityVector<double> pr(testsupport::random_simplex(ggen, n));
    Vec a(k);
    a(0) = testsupport::uniform(ggen, -0.8, 0.8);
    const Vec x = tilted_mean(NaturalParameter<double>(a), Xo, pr);

    const double phi = moment_rate(MomentPoint<double>(x), Xo, pr);
    const Vec nu = information_projection(MomentPoint<double>(x), Xo, pr).values();
    const auto grid = testsupport::fiber_grid_minimum(Xm, x, pr.values(), 1e-3);
    REQUIRE(grid.feasible);
    CHECK(grid.value >= phi - 1e-9);
    CHECK(std::abs(grid.value - phi) < 5e-3);
    CHECK((grid.argmin - nu).cwiseAbs().maxCoeff() < 2e-3);
  }
}

TEST_CASE("outside-domain and degenerate solves raise typed errors") {
  const auto X = ramp3();
  const auto p = ProbabilityVector<double>::uniform(3);

  CHECK_THROWS_AS(solve_conjugate(point({2.5}), X, p), OutsideDomain);
  CHECK_THROWS_AS(solve_conjugate(point({-0.5}), X, p), OutsideDomain);

  try {
    solve_conjugate(point({2.5}), X, p);
    FAIL("expected OutsideDomain");
  } catch (const OutsideDomain& e) {
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }

  // A moment exactly on a hull vertex saturates at the solver resolution and
  // returns the continuous extension: the rate of the vertex measure itself.
  CHECK(std::abs(moment_rate(point({2.0}), X, p) - std::log(3.0)) < 1e-10);
  CHECK(information_projection(point({2.0}), X, p).values()(2) > 1.0 - 1e-11);
  CHECK(std::abs(moment_rate(point({0.0}), X, p) - std::log(3.0)) < 1e-10);

  // Starving the iteration budget reports exhaustion rather than divergence.
  SolveOptions<double> tight;
  tight.max_iter = 1;
  try {
    solve_conjugate(point({1.5}), X, p, tight);
    FAIL("expected OutsideDomain");
  } catch (const OutsideDomain& e) {
    CHECK(std::string(e.what()).find("exhausted") != std::string::npos);
  }

  // Nearly dependent rows pass construction but the tilted covariance
  // collapses, which the solver reports as a degenerate observable.
  Mat near(2, 4);
  near << 0, 1, 2, 3, 0, 1 + 1e-8, 2, 3;
  const ObservableMatrix<double> No(near);
  const auto p4 = ProbabilityVector<double>::uniform(4);
  const Vec m = tilted_mean(natural({0.0, 0.0}), No, p4);
  CHECK_THROWS_AS(solve_conjugate(MomentPoint<double>(m.array() + 0.05), No, p4),
                  DegenerateObservable);
}

TEST_CASE("moment metric inverts the explained covariance") {
  Mat bern(1, 2);
  bern << 0.0, 1.0;
  const ObservableMatrix<double> B(bern);
  const auto half = ProbabilityVector<double>::uniform(2);
  CHECK(std::abs(moment_metric(point({0.5}), B, half)(0, 0) - 4.0) < 1e-10);

  std::mt19937_64 gen(116);
  for (int it = 0; it < 25; ++it) {
    const int n = 3 + int(gen() % 6);
    const int k = 1 + int(gen() % (n - 2));
    const Mat Xm = testsupport::random_observable(gen, n, k);
    const ObservableMatrix<double> Xo(Xm);
    const ProbabilityVector<double> pr(testsupport::random_simplex(gen, n));
    Vec a(k);
    for (int i = 0; i < k; ++i) a(i) = testsupport::uniform(gen, -1.5, 1.5);
    const NaturalParameter<double> alpha(a);
    const Vec x = tilted_mean(alpha, Xo, pr);
    const MomentPoint<double> xp(x);

    const Mat M = moment_metric(xp, Xo, pr);
    const Mat C = tilted_covariance(alpha, Xo, pr);
    CHECK((M * C - Mat::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);

    // The gradient of the rate function is the conjugate parameter, so its
    // Hessian is the Jacobian of the solve.
    const auto conj = [&](const Vec& v) {
      return Vec(solve_conjugate(MomentPoint<double>(v), Xo, pr).alpha.values());
    };
    CHECK((testsupport::jacobian_fd(conj, x, 1e-5) - M).cwiseAbs().maxCoeff() <
          1e-5 * (1.0 + M.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("metric pulls back through linear recombinations of coordinates") {
  std::mt19937_64 gen(117);
  for (int it = 0; it < 20; ++it) {
    const double rho = testsupport::uniform(gen, 0.05, 0.95);
    Mat L(2, 2);
    L << 1.0, 0.0, rho, std::sqrt(1.0 - rho * rho);

    // Pure transformation rule: mapping increments through L and measuring
    // with (L L^T)^{-1} recovers the Euclidean length.
    Vec dx(2);
    dx << testsupport::uniform(gen, -2.0, 2.0), testsupport::uniform(gen, -2.0, 2.0);
    const Vec dy = L * dx;
    const Mat gram_inv = (L * L.transpose()).inverse();
    CHECK(std::abs(dy.dot(gram_inv * dy) - dx.squaredNorm()) < 1e-12);

    // The same rule moves the moment metric across Y = L X.
    const int n = 5;
    const Mat Xm = testsupport::random_observable(gen, n, 2);
    const ObservableMatrix<double> Xo(Xm);
    const ObservableMatrix<double> Yo(L * Xm);
    const ProbabilityVector<double> pr(testsupport::random_simplex(gen, n));
    Vec a(2);
    a << testsupport::uniform(gen, -1.0, 1.0), testsupport::uniform(gen, -1.0, 1.0);
    const Vec x = tilted_mean(NaturalParameter<double>(a), Xo, pr);

    const Mat Mx = moment_metric(MomentPoint<double>(x), Xo, pr);
    const Mat My = moment_metric(MomentPoint<double>(L * x), Yo, pr);
    const Mat Linv = L.inverse();
    CHECK((My - Linv.transpose() * Mx * Linv).cwiseAbs().maxCoeff() < 1e-8);
  }
}
