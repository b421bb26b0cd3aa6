#include "swg/error.hpp"
#include "swg/infotheory.hpp"

#include <doctest.h>

#include <cmath>

using namespace swg;
using namespace swg::infotheory;
using Eigen::MatrixXd;

namespace {

// I(x;Z) = 1/2 ln( det S_zz / det(S_zz - S_zx S_xx^-1 S_xz) ), via LU.
double mi_oracle(const GaussianPair & p) {
    const MatrixXd sxx = p.cov_xx(), szz = p.cov_zz(), sxz = p.cov_xz();
    const MatrixXd cond = szz - sxz.transpose() * sxx.fullPivLu().solve(sxz);
    return 0.5 * std::log(szz.determinant() / cond.determinant());
}

GaussianPair transformed(const GaussianPair & p, const MatrixXd & a) {
    const int n = int(a.rows());
    MatrixXd t = MatrixXd::Zero(n + p.dim_z, p.dim_x + p.dim_z);
    t.topLeftCorner(n, p.dim_x) = a;
    t.bottomRightCorner(p.dim_z, p.dim_z).setIdentity();
    GaussianPair out;
    out.dim_x = n;
    out.dim_z = p.dim_z;
    out.cov = t * p.cov * t.transpose();
    return out;
}

MatrixXd random_matrix(int r, int c, CounterRng & rng) {
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

} // namespace

TEST_CASE("scalar Gaussian channel") {
    GaussianPair p;
    p.dim_x = 1;
    p.dim_z = 1;
    p.cov.resize(2, 2);
    p.cov << 1, 1, 1, 2;  // z = x + n, var(x) = var(n) = 1
    CHECK(gaussian_mi(p) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("independent blocks carry no information") {
    CounterRng rng(1);
    auto p = random_pair(6, 3, rng);
    p.cov.topRightCorner(6, 3).setZero();
    p.cov.bottomLeftCorner(3, 6).setZero();
    CHECK(std::abs(gaussian_mi(p)) < 1e-12);
}

TEST_CASE("closed form agrees with the conditional-covariance oracle") {
    CounterRng rng(2);
    for (int t = 0; t < 30; ++t) {
        const auto p = random_pair(5 + t % 7, 1 + t % 4, rng);
        CHECK(gaussian_mi(p) == doctest::Approx(mi_oracle(p)).epsilon(1e-9));
        CHECK(gaussian_mi(p) >= -1e-10);
    }
}

TEST_CASE("invertible maps keep mutual information") {
    CounterRng rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_pair(16, 4, rng);
        const double base = gaussian_mi(p);
        MatrixXd a = 2.0 * MatrixXd::Identity(16, 16) + random_matrix(16, 16, rng) / 4.0;
        CHECK(std::abs(linear_image_mi(p, a) - base) < 1e-8);
        CHECK(std::abs(mi_oracle(transformed(p, a)) - base) < 1e-8);
        CHECK(std::abs(linear_image_mi(p, stacked_dft(16)) - base) < 1e-8);
        CHECK(std::abs(linear_image_mi(p, -3.5 * MatrixXd::Identity(16, 16)) - base) < 1e-8);
    }
}

TEST_CASE("stacked DFT is an isometry") {
    const MatrixXd w = stacked_dft(12);
    CHECK((w.transpose() * w - MatrixXd::Identity(12, 12)).norm() < 1e-12);
}

TEST_CASE("weakening operator matches weaken()") {
    CounterRng rng(4);
    const auto mask = spectral::SelectionMask::from_range(16, 0.0, 0.2, true);
    const MatrixXd op = weakening_operator(mask);
    std::vector<double> x(16);
    for (auto & v : x) v = rng.normal();
    const auto y = spectral::weaken(x, mask, {spectral::RenormKind::None, 1e-8});
    const Eigen::VectorXd ox = op * Eigen::Map<const Eigen::VectorXd>(x.data(), 16);
    for (int i = 0; i < 16; ++i) CHECK(std::abs(ox(i) - y[i]) < 1e-12);
    CHECK((op * op - op).norm() < 1e-10);
    CHECK((op - op.transpose()).norm() < 1e-10);
}

TEST_CASE("mask extremes") {
    CounterRng rng(5);
    const auto p = random_pair(16, 4, rng);
    const auto full = verify_information_loss(p, spectral::SelectionMask::all(16));
    CHECK(full.holds);
    CHECK(std::abs(full.slack) <= 1e-9);
    CHECK(full.rank == 16);
    const auto none = verify_information_loss(p, spectral::SelectionMask::none(16));
    CHECK(none.i_masked == 0.0);
    CHECK(none.rank == 0);
    CHECK(none.slack == doctest::Approx(none.i_full));
}

TEST_CASE("selection never adds information and is strict when the discarded part matters") {
    CounterRng rng(6);
    int strict = 0;
    for (int t = 0; t < 100; ++t) {
        const auto p = random_pair(16, 4, rng);
        const auto mask = random_symmetric_mask(16, 4, rng);
        REQUIRE(mask.rank() == 4);
        REQUIRE(mask.is_symmetric());
        const auto r = verify_information_loss(p, mask);
        CHECK(r.holds);
        CHECK(r.i_masked <= r.i_full + 1e-9);
        // oracle on the explicit projected covariance
        CHECK(r.i_masked == doctest::Approx(linear_image_mi(p, weakening_operator(mask))).epsilon(1e-12));
        const double pc = discarded_partial_covariance(p, mask);
        if (pc > 1e-6) {
            CHECK(r.slack > 1e-6);
            ++strict;
        }
    }
    CHECK(strict > 90);
}

TEST_CASE("no loss when the discarded part is conditionally independent") {
    CounterRng rng(7);
    const auto mask = spectral::SelectionMask::from_range(16, 0.0, 0.15, true);
    const MatrixXd proj = weakening_operator(mask);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(proj);
    // eigenvalues ascending: zeros first, then ones
    const int r = int(mask.rank());
    const MatrixXd ud = es.eigenvectors().leftCols(16 - r);
    const MatrixXd ur = es.eigenvectors().rightCols(r);

    const auto az = random_pair(r, 4, rng);  // (a, Z) jointly Gaussian
    const MatrixXd sb = random_pair(16 - r, 1, rng).cov_xx();  // b independent of everything
    MatrixXd q(16, 16);
    q << ur, ud;
    MatrixXd sx = MatrixXd::Zero(16, 16);
    sx.topLeftCorner(r, r) = az.cov_xx();
    sx.bottomRightCorner(16 - r, 16 - r) = sb;
    MatrixXd sxz = MatrixXd::Zero(16, 4);
    sxz.topRows(r) = az.cov_xz();

    GaussianPair p;
    p.dim_x = 16;
    p.dim_z = 4;
    p.cov.resize(20, 20);
    p.cov.topLeftCorner(16, 16) = q * sx * q.transpose();
    p.cov.topRightCorner(16, 4) = q * sxz;
    p.cov.bottomLeftCorner(4, 16) = (q * sxz).transpose();
    p.cov.bottomRightCorner(4, 4) = az.cov_zz();
    p.cov = 0.5 * (p.cov + p.cov.transpose());

    const auto res = verify_information_loss(p, mask);
    CHECK(std::abs(res.slack) < 1e-9);
    CHECK(discarded_partial_covariance(p, mask) < 1e-9);
    CHECK(res.i_full > 0.01);
}

TEST_CASE("nested masks are monotone") {
    CounterRng rng(8);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_pair(16, 4, rng);
        double prev = 0.0;
        for (int hi = 1; hi <= 16; ++hi) {
            const auto r = verify_information_loss(p, spectral::SelectionMask::from_range(16, 0.0, hi / 16.0, true));
            CHECK(r.i_masked >= prev - 1e-9);
            prev = r.i_masked;
        }
    }
}

TEST_CASE("invalid covariances") {
    GaussianPair p;
    p.dim_x = 1;
    p.dim_z = 1;
    p.cov.resize(2, 2);
    p.cov << 1, 1, 1, 1;
    CHECK_THROWS_AS(gaussian_mi(p), DegenerateInput);
    p.cov << 1, 0.5, 0.4, 1;
    CHECK_THROWS_AS(gaussian_mi(p), InvalidArgument);
    p.cov.resize(3, 3);
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("theory report") {
    const auto rep = run_theory_checks(16, 4, 100, 0);
    CHECK(rep.ok());
    CHECK(rep.loss_violations == 0);
    CHECK(rep.invariance_violations == 0);
    CHECK(rep.max_invariance_gap < 1e-8);
    CHECK(rep.trials == 100);
    const auto json = rep.to_json();
    CHECK(json.find("\"information_loss\"") != std::string::npos);
    CHECK(run_theory_checks(16, 4, 5, 9).to_json() == run_theory_checks(16, 4, 5, 9).to_json());
}
