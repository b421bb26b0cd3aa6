#pragma once

// Channel-axis spectrum weakening: unitary DFT, binary spectrum selection,
// real-part extraction and the two renormalization strategies.
//
// Conventions:
//   X[k] = C^{-1/2} sum_n x[n] exp(-2 pi i k n / C)      (forward)
//   x[n] = C^{-1/2} sum_k X[k] exp(+2 pi i k n / C)      (inverse)
// so both directions preserve the 2-norm exactly.

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace swg::spectral {

using Complex = std::complex<double>;
using FeatureVector = std::vector<double>;
using Spectrum = std::vector<Complex>;

Spectrum dft(std::span<const double> x);
Spectrum dft(std::span<const Complex> x);
std::vector<Complex> idft(std::span<const Complex> s);
FeatureVector take_real(std::span<const Complex> v);

// Binary diagonal selection over DFT indices.
class SelectionMask {
public:
    SelectionMask() = default;

    // Retains k in [floor(lo*C), floor(hi*C)); with `symmetrize` the set is
    // closed under k -> (C - k) mod C by union.
    static SelectionMask from_range(std::size_t channels, double lo, double hi, bool symmetrize = true);
    // Explicit bits; range_spec is reported as (0, 0).
    static SelectionMask from_bits(std::vector<uint8_t> bits, bool symmetrize = false);
    static SelectionMask all(std::size_t channels);
    static SelectionMask none(std::size_t channels);

    std::size_t size() const { return bits_.size(); }
    std::size_t rank() const;
    bool retains(std::size_t k) const { return bits_[k] != 0; }
    const std::vector<uint8_t> & bits() const { return bits_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    bool symmetrize() const { return symmetrize_; }
    // bits[k] == bits[(C-k) mod C] for all k.
    bool is_symmetric() const;

    // Same range spec re-evaluated for another channel count. Masks built
    // from explicit bits cannot be resized.
    SelectionMask resized(std::size_t channels) const;

    std::string describe() const;

private:
    std::vector<uint8_t> bits_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    bool symmetrize_ = false;
    bool from_range_ = false;
};

Spectrum apply_mask(std::span<const Complex> s, const SelectionMask & m);

enum class RenormKind { None, Spectral, Spatial, UnitSpatial };

struct RenormMode {
    RenormKind kind = RenormKind::Spectral;
    double epsilon = 1e-8;
};

RenormKind parse_renorm_kind(const std::string & name);
std::string to_string(RenormKind kind);

double l2_norm(std::span<const double> v);
double l2_norm(std::span<const Complex> v);

// masked * ||original|| / (||masked|| + eps)
Spectrum renorm_spectral(std::span<const Complex> masked, std::span<const Complex> original, double eps);

// reconstructed * ||original|| / (||reconstructed|| + eps), or for
// `unit` reconstructed / (||reconstructed|| + eps).
FeatureVector renorm_spatial(std::span<const double> reconstructed, std::span<const double> original,
                             double eps, bool unit = false);

// x -> dft -> mask -> [spectral renorm] -> idft -> real -> [spatial renorm]
FeatureVector weaken(std::span<const double> x, const SelectionMask & m, const RenormMode & mode);

// Precomputed weakening for a fixed channel count and mask. Used on the hot
// path of the model, where the same mask is applied to many rows.
// Matches weaken() up to rounding.
class Weakener {
public:
    Weakener(SelectionMask mask, RenormMode mode);

    std::size_t channels() const { return mask_.size(); }
    const SelectionMask & mask() const { return mask_; }
    const RenormMode & mode() const { return mode_; }

    void apply(std::span<float> row) const;
    void apply(std::span<double> row) const;
    // `data` holds `rows` contiguous rows of channels() floats.
    void apply_rows(std::span<float> data) const;

private:
    template <typename T>
    void apply_impl(std::span<T> row) const;

    SelectionMask mask_;
    RenormMode mode_;
    std::vector<double> cos_;
    std::vector<double> sin_;
    std::vector<std::size_t> kept_;
};

} // namespace swg::spectral
