#include <doctest.h>

#include <cmath>

#include "certctl/eig.hpp"
#include "certctl/integrate.hpp"
#include "certctl/lls.hpp"
#include "certctl/matrix.hpp"
#include "certctl/rng.hpp"

using namespace certctl;

namespace {

SymMatrix random_sym(RngStream& rng, int n, double scale = 1.0) {
  RealMatrix m(n, n);
  for (double& x : m.a) x = scale * rng.gaussian();
  return SymMatrix::symmetrize(m);
}

double reconstruction_error(const SymMatrix& S, const EigResult& e) {
  const int n = S.dim;
  RealMatrix D(n, n);
  for (int i = 0; i < n; ++i) D(i, i) = e.eigenvalues[i];
  const RealMatrix R = e.basis * D * e.basis.transposed() - S.dense();
  return R.frobenius() / std::max(1.0, S.frobenius());
}

}  // namespace

TEST_CASE("sym_eig identity and diagonal") {
  const EigResult e3 = sym_eig(SymMatrix::identity(3));
  for (double w : e3.eigenvalues) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));

  SymMatrix d(2);
  d(0, 0) = 2.0;
  d(1, 1) = 1.0;
  const EigResult ed = sym_eig(d);
  CHECK(ed.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ed.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("sym_eig reconstructs random matrices") {
  RngStream rng(42);
  SymMatrix S6 = random_sym(rng, 6);
  CHECK(reconstruction_error(S6, sym_eig(S6)) <= 1e-10);

  for (int n : {1, 2, 5, 11, 17, 32}) {
    SymMatrix S = random_sym(rng, n, 3.0);
    const EigResult e = sym_eig(S);
    CHECK(reconstruction_error(S, e) <= 1e-10);
    // ascending order
    for (size_t i = 1; i < e.eigenvalues.size(); ++i)
      CHECK(e.eigenvalues[i] >= e.eigenvalues[i - 1]);
    // orthonormal basis
    const RealMatrix G = e.basis.transposed() * e.basis;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        CHECK(G(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
  }
}

TEST_CASE("is_neg_def basics") {
  SymMatrix mI2 = SymMatrix::identity(2).scaled(-1.0);
  CHECK(is_neg_def(mI2, 0.0));

  SymMatrix z2(2);
  CHECK_FALSE(is_neg_def(z2, 0.0));

  SymMatrix d(2);
  d(0, 0) = -1.0;
  d(1, 1) = -1e-9;
  CHECK_FALSE(is_neg_def(d, 1e-8));
}

TEST_CASE("is_neg_def agrees with Cholesky of -S") {
  RngStream rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + rng.uniform_int(8);
    SymMatrix S = random_sym(rng, n);
    // shift to make roughly half the trials negative definite
    const double shift = rng.uniform(-4.0, 4.0);
    for (int i = 0; i < n; ++i) S(i, i) += shift;
    SymMatrix mS = S.scaled(-1.0);
    CHECK(is_neg_def(S, 0.0) == cholesky(mS).has_value());
  }
}

TEST_CASE("ridge_lls identity and exact recovery") {
  RngStream rng(3);
  RealMatrix B(4, 2);
  for (double& x : B.a) x = rng.gaussian();
  const RealMatrix X = ridge_lls(RealMatrix::identity(4), B, 0.0);
  for (size_t i = 0; i < B.a.size(); ++i) CHECK(X.a[i] == doctest::Approx(B.a[i]).epsilon(1e-12));

  // consistent overdetermined system recovers the generator
  RealMatrix A(20, 3);
  for (double& x : A.a) x = rng.gaussian();
  RealMatrix X0(3, 2);
  for (double& x : X0.a) x = rng.gaussian();
  const RealMatrix Bc = A * X0;
  const RealMatrix Xr = ridge_lls(A, Bc, 0.0);
  for (size_t i = 0; i < X0.a.size(); ++i) CHECK(std::abs(Xr.a[i] - X0.a[i]) <= 1e-10);
}

TEST_CASE("ridge_lls shrinkage limit and singular diagnostics") {
  RngStream rng(11);
  RealMatrix A(10, 3), B(10, 2);
  for (double& x : A.a) x = rng.uniform(-1.0, 1.0);
  for (double& x : B.a) x = rng.uniform(-1.0, 1.0);
  const RealMatrix X = ridge_lls(A, B, 1e6);
  CHECK(X.frobenius() <= 1e-5);

  // duplicated column makes A^T A singular
  RealMatrix S(5, 2);
  for (int i = 0; i < 5; ++i) {
    S(i, 0) = i + 1.0;
    S(i, 1) = i + 1.0;
  }
  RealMatrix b(5, 1, 1.0);
  CHECK_THROWS_WITH_AS(ridge_lls(S, b, 0.0),
                       "ridge_lls: singular normal equations; supply rho > 0", NumericError);
  CHECK_NOTHROW(ridge_lls(S, b, 1e-8));
}

TEST_CASE("ridge_lls normal-equations residual on full-rank systems") {
  RngStream rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    RealMatrix A(30, 5), B(30, 3);
    for (double& x : A.a) x = rng.gaussian();
    for (double& x : B.a) x = rng.gaussian();
    const RealMatrix X = ridge_lls(A, B, 0.0);
    CHECK(normal_eq_residual(A, B, X, 0.0) <= 1e-8);
  }
}

TEST_CASE("rk4_step zero field and exponential") {
  const Vec x0{1.5, -2.0};
  const Vec x1 = rk4_step([](double, const Vec& x) { return Vec(x.size(), 0.0); }, x0, 0.0, 0.1);
  CHECK(x1[0] == x0[0]);
  CHECK(x1[1] == x0[1]);

  const Vec e = rk4_step([](double, const Vec& x) { return x; }, Vec{1.0}, 0.0, 0.01);
  CHECK(std::abs(e[0] - std::exp(0.01)) <= 1e-10);
}

TEST_CASE("rk4_step non-finite derivative diagnostics") {
  auto bad = [](double, const Vec& x) {
    Vec d(x.size(), 0.0);
    d[1] = std::numeric_limits<double>::quiet_NaN();
    return d;
  };
  try {
    rk4_step(bad, Vec{0.0, 0.0, 0.0}, 0.0, 0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& err) {
    CHECK(err.detail() == 1);
  }
}

namespace {
// unforced Duffing (damping 0.3, cubic stiffness) used as the smooth
// convergence-study test field
Vec duffing_rhs(double, const Vec& x) { return Vec{x[1], -0.3 * x[1] - x[0] * x[0] * x[0]}; }

Vec integrate_fixed(double h, double t_end, Vec x) {
  const int steps = static_cast<int>(std::round(t_end / h));
  for (int s = 0; s < steps; ++s) x = rk4_step(duffing_rhs, x, s * h, h);
  return x;
}
}  // namespace

TEST_CASE("rk4 step-halving shows 4th-order convergence") {
  const Vec x0{1.2, 0.0};
  const double t_end = 4.0;
  const Vec ref = integrate_fixed(1.0 / 4096.0, t_end, x0);

  auto global_err = [&](double h) {
    const Vec x = integrate_fixed(h, t_end, x0);
    return std::hypot(x[0] - ref[0], x[1] - ref[1]);
  };

  const double e1 = global_err(0.08);
  const double e2 = global_err(0.04);
  const double e3 = global_err(0.02);
  CHECK(e1 / e2 >= 12.0);
  CHECK(e1 / e2 <= 20.0);
  CHECK(e2 / e3 >= 12.0);
  CHECK(e2 / e3 <= 20.0);
}

TEST_CASE("seeded_gaussian determinism and moments") {
  const Vec one{1.0};
  const RealMatrix a = seeded_gaussian(99, 100, 1, one);
  const RealMatrix b = seeded_gaussian(99, 100, 1, one);
  CHECK(a.a == b.a);

  const RealMatrix big = seeded_gaussian(123, 100000, 1, one);
  double mean = 0.0;
  for (double x : big.a) mean += x;
  mean /= big.a.size();
  double var = 0.0;
  for (double x : big.a) var += (x - mean) * (x - mean);
  var /= (big.a.size() - 1);
  CHECK(var >= 0.98);
  CHECK(var <= 1.02);

  const RealMatrix scaled = seeded_gaussian(123, 100000, 1, Vec{2.0});
  double v2 = 0.0, m2 = 0.0;
  for (double x : scaled.a) m2 += x;
  m2 /= scaled.a.size();
  for (double x : scaled.a) v2 += (x - m2) * (x - m2);
  v2 /= (scaled.a.size() - 1);
  CHECK(std::sqrt(v2) == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("rng splits give unequal streams, halton covers the box") {
  RngStream root(5);
  RngStream c1 = root.split(1);
  RngStream c2 = root.split(2);
  CHECK(c1.key() != c2.key());
  CHECK(c1.next_u64() != c2.next_u64());

  // crude uniformity check on halton
  int in_lower_half = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec p = halton_point(i, 3);
    for (double c : p) {
      CHECK(c >= 0.0);
      CHECK(c < 1.0);
    }
    if (p[0] < 0.5) ++in_lower_half;
  }
  CHECK(in_lower_half >= 450);
  CHECK(in_lower_half <= 550);
}
