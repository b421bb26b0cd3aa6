#pragma once

// Closed-form mutual information for jointly Gaussian (x, Z), used to check
// information loss under spectral selection on concrete instances.

#include "swg/rng.hpp"
#include "swg/spectral.hpp"

#include <Eigen/Dense>

#include <string>

namespace swg::infotheory {

struct GaussianPair {
    int dim_x = 0;
    int dim_z = 0;
    Eigen::MatrixXd cov;  // (dim_x + dim_z)^2, x block first

    // Throws InvalidArgument on shape/symmetry (1e-10), DegenerateInput when
    // the minimum eigenvalue is not positive.
    void validate() const;

    Eigen::MatrixXd cov_xx() const { return cov.topLeftCorner(dim_x, dim_x); }
    Eigen::MatrixXd cov_zz() const { return cov.bottomRightCorner(dim_z, dim_z); }
    Eigen::MatrixXd cov_xz() const { return cov.topRightCorner(dim_x, dim_z); }
};

// A A^T / n + jitter I with A standard normal, size dim_x + dim_z.
GaussianPair random_pair(int dim_x, int dim_z, CounterRng & rng, double jitter = 0.1);

double log_det_spd(const Eigen::MatrixXd & m, const std::string & what);

// I(x; Z) = 1/2 (ln det S_xx + ln det S_zz - ln det S).
double gaussian_mi(const GaussianPair & pair);

// I(A x; Z) for a real linear map A (rows x dim_x). A x is projected onto an
// orthonormal basis of range(A) first, so rank-deficient maps are fine; a
// rank-0 map gives 0.
double linear_image_mi(const GaussianPair & pair, const Eigen::MatrixXd & a, double rank_tol = 1e-9);

// Real C x C matrix of x -> Re(W^* M W x).
Eigen::MatrixXd weakening_operator(const spectral::SelectionMask & mask);

// [Re W; Im W], the real 2C x C form of the unitary DFT.
Eigen::MatrixXd stacked_dft(int channels);

struct InformationLoss {
    double i_full = 0.0;
    double i_masked = 0.0;
    double slack = 0.0;  // i_full - i_masked
    bool holds = false;  // i_masked <= i_full + 1e-9
    int rank = 0;
};

InformationLoss verify_information_loss(const GaussianPair & pair, const spectral::SelectionMask & mask);

// Frobenius norm of Cov(d, Z | r), where r are the retained spectral
// coordinates and d the discarded ones. Zero exactly when the discarded part
// carries no information about Z beyond the retained part.
double discarded_partial_covariance(const GaussianPair & pair, const spectral::SelectionMask & mask);

// Symmetric random mask of exactly `rank` retained indices (rank <= C, and
// rank parity compatible with C; see implementation).
spectral::SelectionMask random_symmetric_mask(int channels, int rank, CounterRng & rng);

struct TheoryReport {
    int dim_x = 0, dim_z = 0, trials = 0;
    uint64_t seed = 0;
    int mask_rank = 0;
    int loss_violations = 0;        // i_masked > i_full + 1e-9
    int strict_cases = 0;           // slack > 1e-6
    int strictness_mismatches = 0;  // partial covariance nonzero but slack <= 1e-6
    double min_slack = 0.0, max_slack = 0.0;
    int nested_violations = 0;      // larger retained set lost information
    double max_invariance_gap = 0.0;     // |I(Px;Z) - I(x;Z)| over random P, DFT and scalings
    int invariance_violations = 0;       // gap > 1e-8
    double min_mi = 0.0;

    bool ok() const { return loss_violations == 0 && invariance_violations == 0 && nested_violations == 0 &&
                             strictness_mismatches == 0 && min_mi >= -1e-10; }
    std::string to_json() const;
};

// Trial t uses CounterRng(derive_seed(seed, "theory", t)).
TheoryReport run_theory_checks(int dim_x, int dim_z, int trials, uint64_t seed, int mask_rank = 4);

} // namespace swg::infotheory
