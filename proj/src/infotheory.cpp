#include "swg/infotheory.hpp"

#include "swg/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace swg::infotheory {

void GaussianPair::validate() const {
    if (dim_x <= 0 || dim_z <= 0) throw InvalidArgument("Gaussian pair needs positive dim_x and dim_z");
    const int n = dim_x + dim_z;
    if (cov.rows() != n || cov.cols() != n) throw InvalidArgument("joint covariance must be (dim_x+dim_z) square");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw InvalidArgument("joint covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
        throw DegenerateInput("joint covariance not positive definite (min eigenvalue " +
                              std::to_string(es.eigenvalues().minCoeff()) + ")");
}

GaussianPair random_pair(int dim_x, int dim_z, CounterRng & rng, double jitter) {
    const int n = dim_x + dim_z;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    GaussianPair p;
    p.dim_x = dim_x;
    p.dim_z = dim_z;
    p.cov = a * a.transpose() / double(n) + jitter * Eigen::MatrixXd::Identity(n, n);
    p.cov = 0.5 * (p.cov + p.cov.transpose());
    return p;
}

double log_det_spd(const Eigen::MatrixXd & m, const std::string & what) {
    if (m.rows() == 0) return 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw DegenerateInput(what + " is not positive definite");
    const Eigen::MatrixXd & l = llt.matrixL();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

double gaussian_mi(const GaussianPair & pair) {
    pair.validate();
    return 0.5 * (log_det_spd(pair.cov_xx(), "Cov(x)") + log_det_spd(pair.cov_zz(), "Cov(Z)") -
                  log_det_spd(pair.cov, "Cov(x, Z)"));
}

double linear_image_mi(const GaussianPair & pair, const Eigen::MatrixXd & a, double rank_tol) {
    pair.validate();
    if (a.cols() != pair.dim_x) throw InvalidArgument("linear map width does not match dim_x");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
    const auto & sv = svd.singularValues();
    const double smax = sv.size() ? sv.maxCoeff() : 0.0;
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rank_tol * std::max(smax, 1e-300)) ++r;
    if (r == 0 || smax == 0.0) return 0.0;

    // y = U_r^T A x carries the same information as A x.
    const Eigen::MatrixXd b = svd.matrixU().leftCols(r).transpose() * a;
    GaussianPair proj;
    proj.dim_x = r;
    proj.dim_z = pair.dim_z;
    proj.cov.resize(r + pair.dim_z, r + pair.dim_z);
    proj.cov.topLeftCorner(r, r) = b * pair.cov_xx() * b.transpose();
    proj.cov.topRightCorner(r, pair.dim_z) = b * pair.cov_xz();
    proj.cov.bottomLeftCorner(pair.dim_z, r) = proj.cov.topRightCorner(r, pair.dim_z).transpose();
    proj.cov.bottomRightCorner(pair.dim_z, pair.dim_z) = pair.cov_zz();
    proj.cov = 0.5 * (proj.cov + proj.cov.transpose());
    try {
        return 0.5 * (log_det_spd(proj.cov.topLeftCorner(r, r), "projected Cov(x')") +
                      log_det_spd(pair.cov_zz(), "Cov(Z)") - log_det_spd(proj.cov, "projected Cov(x', Z)"));
    } catch (const DegenerateInput & e) {
        throw DegenerateInput(std::string(e.what()) + " after projecting onto rank " + std::to_string(r));
    }
}

Eigen::MatrixXd weakening_operator(const spectral::SelectionMask & mask) {
    const int c = int(mask.size());
    if (c == 0) throw InvalidArgument("empty mask");
    Eigen::MatrixXd op(c, c);
    std::vector<double> e(c, 0.0);
    spectral::RenormMode none{spectral::RenormKind::None, 1e-8};
    for (int j = 0; j < c; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        const auto col = spectral::weaken(e, mask, none);
        for (int i = 0; i < c; ++i) op(i, j) = col[i];
    }
    return op;
}

Eigen::MatrixXd stacked_dft(int channels) {
    Eigen::MatrixXd w(2 * channels, channels);
    const double s = 1.0 / std::sqrt(double(channels));
    for (int k = 0; k < channels; ++k)
        for (int n = 0; n < channels; ++n) {
            const double th = -2.0 * std::numbers::pi * double((k * n) % channels) / double(channels);
            w(k, n) = std::cos(th) * s;
            w(channels + k, n) = std::sin(th) * s;
        }
    return w;
}

InformationLoss verify_information_loss(const GaussianPair & pair, const spectral::SelectionMask & mask) {
    if (int(mask.size()) != pair.dim_x) throw InvalidArgument("mask length does not match dim_x");
    InformationLoss r;
    r.i_full = gaussian_mi(pair);
    r.rank = int(mask.rank());
    r.i_masked = linear_image_mi(pair, weakening_operator(mask));
    r.slack = r.i_full - r.i_masked;
    r.holds = r.i_masked <= r.i_full + 1e-9;
    return r;
}

double discarded_partial_covariance(const GaussianPair & pair, const spectral::SelectionMask & mask) {
    pair.validate();
    const int c = pair.dim_x;
    if (int(mask.size()) != c) throw InvalidArgument("mask length does not match dim_x");
    // Orthonormal real bases of the retained and discarded subspaces.
    const Eigen::MatrixXd keep = weakening_operator(mask);
    const Eigen::MatrixXd drop = Eigen::MatrixXd::Identity(c, c) - keep;
    auto basis = [](const Eigen::MatrixXd & p) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (p + p.transpose()));
        std::vector<int> idx;
        for (int i = 0; i < int(es.eigenvalues().size()); ++i)
            if (es.eigenvalues()(i) > 0.5) idx.push_back(i);
        Eigen::MatrixXd u(p.rows(), Eigen::Index(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) u.col(Eigen::Index(j)) = es.eigenvectors().col(idx[j]);
        return u;
    };
    const Eigen::MatrixXd ur = basis(keep), ud = basis(drop);
    if (ud.cols() == 0) return 0.0;
    const Eigen::MatrixXd sxx = pair.cov_xx(), sxz = pair.cov_xz();
    const Eigen::MatrixXd s_dz = ud.transpose() * sxz;
    if (ur.cols() == 0) return s_dz.norm();
    const Eigen::MatrixXd s_rr = ur.transpose() * sxx * ur;
    const Eigen::MatrixXd s_dr = ud.transpose() * sxx * ur;
    const Eigen::MatrixXd s_rz = ur.transpose() * sxz;
    return (s_dz - s_dr * s_rr.ldlt().solve(s_rz)).norm();
}

spectral::SelectionMask random_symmetric_mask(int channels, int rank, CounterRng & rng) {
    if (rank < 0 || rank > channels) throw InvalidArgument("mask rank outside [0, C]");
    // Symmetric masks are unions of orbits {k, C-k}: singletons k = 0 and
    // (for even C) k = C/2, pairs otherwise.
    std::vector<std::vector<int>> orbits;
    for (int k = 0; k <= channels / 2; ++k) {
        const int m = (channels - k) % channels;
        if (m == k) orbits.push_back({k});
        else orbits.push_back({k, m});
    }
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<int> order(orbits.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        std::vector<uint8_t> bits(channels, 0);
        int have = 0;
        for (int o : order) {
            const int sz = int(orbits[o].size());
            if (have + sz > rank) continue;
            for (int k : orbits[o]) bits[k] = 1;
            have += sz;
            if (have == rank) break;
        }
        if (have == rank) return spectral::SelectionMask::from_bits(std::move(bits));
    }
    throw InvalidArgument("no symmetric mask of rank " + std::to_string(rank) + " for C = " + std::to_string(channels));
}

std::string TheoryReport::to_json() const {
    nlohmann::ordered_json j;
    j["dim_x"] = dim_x;
    j["dim_z"] = dim_z;
    j["trials"] = trials;
    j["seed"] = seed;
    j["mask_rank"] = mask_rank;
    j["information_loss"] = {{"violations", loss_violations},
                             {"tolerance", 1e-9},
                             {"strict_cases", strict_cases},
                             {"strictness_mismatches", strictness_mismatches},
                             {"min_slack", min_slack},
                             {"max_slack", max_slack},
                             {"nested_violations", nested_violations}};
    j["invertible_invariance"] = {{"violations", invariance_violations}, {"tolerance", 1e-8}, {"max_gap", max_invariance_gap}};
    j["min_mi"] = min_mi;
    j["ok"] = ok();
    return j.dump(2) + "\n";
}

TheoryReport run_theory_checks(int dim_x, int dim_z, int trials, uint64_t seed, int mask_rank) {
    if (dim_x <= 0 || dim_z <= 0 || trials <= 0) throw InvalidArgument("dims and trials must be positive");
    TheoryReport rep;
    rep.dim_x = dim_x;
    rep.dim_z = dim_z;
    rep.trials = trials;
    rep.seed = seed;
    rep.mask_rank = mask_rank;
    rep.min_slack = std::numeric_limits<double>::infinity();
    rep.max_slack = -std::numeric_limits<double>::infinity();
    rep.min_mi = std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd w = stacked_dft(dim_x);

    for (int t = 0; t < trials; ++t) {
        CounterRng rng(derive_seed(seed, "theory", uint64_t(t)));
        const GaussianPair pair = random_pair(dim_x, dim_z, rng);
        const auto mask = random_symmetric_mask(dim_x, std::min(mask_rank, dim_x), rng);

        const auto loss = verify_information_loss(pair, mask);
        rep.min_mi = std::min({rep.min_mi, loss.i_full, loss.i_masked});
        if (!loss.holds) ++rep.loss_violations;
        rep.min_slack = std::min(rep.min_slack, loss.slack);
        rep.max_slack = std::max(rep.max_slack, loss.slack);
        const bool strict = loss.slack > 1e-6;
        if (strict) ++rep.strict_cases;
        if (discarded_partial_covariance(pair, mask) > 1e-6 && !strict) ++rep.strictness_mismatches;

        // Growing the retained set by one orbit never loses information.
        std::vector<uint8_t> bigger = mask.bits();
        for (int k = 0; k < dim_x; ++k)
            if (!bigger[k]) {
                bigger[k] = 1;
                bigger[(dim_x - k) % dim_x] = 1;
                break;
            }
        const auto loss_big = verify_information_loss(pair, spectral::SelectionMask::from_bits(bigger));
        if (loss_big.i_masked + 1e-9 < loss.i_masked) ++rep.nested_violations;

        // Invariance under invertible maps: a random well-conditioned P, the
        // DFT in real stacked form, and nonzero scalings.
        Eigen::MatrixXd p(dim_x, dim_x);
        for (int i = 0; i < dim_x; ++i)
            for (int j = 0; j < dim_x; ++j) p(i, j) = rng.normal() / std::sqrt(double(dim_x));
        p += 2.0 * Eigen::MatrixXd::Identity(dim_x, dim_x);
        const double scale = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.1 + 9.9 * rng.uniform());
        for (const Eigen::MatrixXd & map :
             {p, w, Eigen::MatrixXd(scale * Eigen::MatrixXd::Identity(dim_x, dim_x)), Eigen::MatrixXd(scale * p)}) {
            const double gap = std::abs(linear_image_mi(pair, map) - loss.i_full);
            rep.max_invariance_gap = std::max(rep.max_invariance_gap, gap);
            if (gap > 1e-8) ++rep.invariance_violations;
        }
    }
    return rep;
}

} // namespace swg::infotheory
