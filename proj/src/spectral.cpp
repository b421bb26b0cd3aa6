#include "swg/spectral.hpp"

#include "swg/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace swg::spectral {

namespace {

// cos/sin of 2*pi*j/C for j in [0, C). Indexing by (k*n) mod C keeps the
// phase argument exact for every (k, n).
void twiddles(std::size_t c, std::vector<double> & cs, std::vector<double> & sn) {
    cs.resize(c);
    sn.resize(c);
    for (std::size_t j = 0; j < c; ++j) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(c);
        cs[j] = std::cos(theta);
        sn[j] = std::sin(theta);
    }
}

// sign = -1 forward, +1 inverse.
std::vector<Complex> transform(std::span<const Complex> x, double sign) {
    const std::size_t c = x.size();
    if (c == 0) throw InvalidArgument("spectral transform of an empty vector");
    std::vector<double> cs, sn;
    twiddles(c, cs, sn);
    const double scale = 1.0 / std::sqrt(static_cast<double>(c));
    std::vector<Complex> out(c);
    for (std::size_t k = 0; k < c; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t n = 0; n < c; ++n) {
            const std::size_t j = (k * n) % c;
            const double wr = cs[j];
            const double wi = sign * sn[j];
            re += x[n].real() * wr - x[n].imag() * wi;
            im += x[n].real() * wi + x[n].imag() * wr;
        }
        out[k] = Complex(re * scale, im * scale);
    }
    return out;
}

std::size_t band_edge(double frac, std::size_t c) {
    // 1e-9 absorbs representation error such as 0.29 * 100 = 28.999...
    const double v = std::floor(frac * static_cast<double>(c) + 1e-9);
    if (v <= 0.0) return 0;
    return std::min(c, static_cast<std::size_t>(v));
}

} // namespace

Spectrum dft(std::span<const double> x) {
    std::vector<Complex> cx(x.begin(), x.end());
    return transform(cx, -1.0);
}

Spectrum dft(std::span<const Complex> x) { return transform(x, -1.0); }

std::vector<Complex> idft(std::span<const Complex> s) { return transform(s, +1.0); }

FeatureVector take_real(std::span<const Complex> v) {
    FeatureVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].real();
    return out;
}

SelectionMask SelectionMask::from_range(std::size_t channels, double lo, double hi, bool symmetrize) {
    if (channels == 0) throw InvalidArgument("mask needs at least one channel");
    if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi))
        throw InvalidArgument("retention band must satisfy 0 <= lo <= hi <= 1");
    SelectionMask m;
    m.bits_.assign(channels, 0);
    for (std::size_t k = band_edge(lo, channels); k < band_edge(hi, channels); ++k) m.bits_[k] = 1;
    if (symmetrize) {
        const auto raw = m.bits_;
        for (std::size_t k = 0; k < channels; ++k) m.bits_[k] = raw[k] | raw[(channels - k) % channels];
    }
    m.lo_ = lo;
    m.hi_ = hi;
    m.symmetrize_ = symmetrize;
    m.from_range_ = true;
    return m;
}

SelectionMask SelectionMask::from_bits(std::vector<uint8_t> bits, bool symmetrize) {
    if (bits.empty()) throw InvalidArgument("mask needs at least one channel");
    SelectionMask m;
    const std::size_t c = bits.size();
    for (auto & b : bits) b = b ? 1 : 0;
    m.bits_ = bits;
    if (symmetrize)
        for (std::size_t k = 0; k < c; ++k) m.bits_[k] = bits[k] | bits[(c - k) % c];
    m.symmetrize_ = symmetrize;
    return m;
}

SelectionMask SelectionMask::all(std::size_t channels) { return from_range(channels, 0.0, 1.0, false); }
SelectionMask SelectionMask::none(std::size_t channels) { return from_range(channels, 0.0, 0.0, false); }

std::size_t SelectionMask::rank() const {
    std::size_t r = 0;
    for (auto b : bits_) r += b;
    return r;
}

bool SelectionMask::is_symmetric() const {
    const std::size_t c = bits_.size();
    for (std::size_t k = 0; k < c; ++k)
        if (bits_[k] != bits_[(c - k) % c]) return false;
    return true;
}

SelectionMask SelectionMask::resized(std::size_t channels) const {
    if (channels == size()) return *this;
    if (!from_range_) throw InvalidArgument("mask built from explicit bits cannot be resized");
    return from_range(channels, lo_, hi_, symmetrize_);
}

std::string SelectionMask::describe() const {
    std::ostringstream os;
    if (from_range_)
        os << lo_ << ":" << hi_ << (symmetrize_ ? " sym" : " asym");
    else
        os << "bits";
    os << " rank " << rank() << "/" << size();
    return os.str();
}

Spectrum apply_mask(std::span<const Complex> s, const SelectionMask & m) {
    if (s.size() != m.size()) throw InvalidArgument("spectrum and mask lengths differ");
    Spectrum out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) out[k] = m.retains(k) ? s[k] : Complex(0.0, 0.0);
    return out;
}

RenormKind parse_renorm_kind(const std::string & name) {
    if (name == "none") return RenormKind::None;
    if (name == "spectral") return RenormKind::Spectral;
    if (name == "spatial") return RenormKind::Spatial;
    if (name == "unit-spatial") return RenormKind::UnitSpatial;
    throw InvalidArgument("unknown renorm mode '" + name + "' (none|spectral|spatial|unit-spatial)");
}

std::string to_string(RenormKind kind) {
    switch (kind) {
        case RenormKind::None: return "none";
        case RenormKind::Spectral: return "spectral";
        case RenormKind::Spatial: return "spatial";
        case RenormKind::UnitSpatial: return "unit-spatial";
    }
    return "?";
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double l2_norm(std::span<const Complex> v) {
    double s = 0.0;
    for (const auto & x : v) s += std::norm(x);
    return std::sqrt(s);
}

Spectrum renorm_spectral(std::span<const Complex> masked, std::span<const Complex> original, double eps) {
    if (masked.size() != original.size()) throw InvalidArgument("renorm_spectral: length mismatch");
    if (!(eps > 0.0)) throw InvalidArgument("renorm epsilon must be positive");
    const double scale = l2_norm(original) / (l2_norm(masked) + eps);
    Spectrum out(masked.begin(), masked.end());
    for (auto & v : out) v *= scale;
    return out;
}

FeatureVector renorm_spatial(std::span<const double> reconstructed, std::span<const double> original,
                             double eps, bool unit) {
    if (reconstructed.size() != original.size()) throw InvalidArgument("renorm_spatial: length mismatch");
    if (!(eps > 0.0)) throw InvalidArgument("renorm epsilon must be positive");
    const double target = unit ? 1.0 : l2_norm(original);
    const double scale = target / (l2_norm(reconstructed) + eps);
    FeatureVector out(reconstructed.begin(), reconstructed.end());
    for (auto & v : out) v *= scale;
    return out;
}

FeatureVector weaken(std::span<const double> x, const SelectionMask & m, const RenormMode & mode) {
    if (x.size() != m.size()) throw InvalidArgument("weaken: vector and mask lengths differ");
    const Spectrum spec = dft(x);
    Spectrum kept = apply_mask(spec, m);
    if (mode.kind == RenormKind::Spectral) kept = renorm_spectral(kept, spec, mode.epsilon);
    FeatureVector out = take_real(idft(kept));
    if (mode.kind == RenormKind::Spatial || mode.kind == RenormKind::UnitSpatial)
        out = renorm_spatial(out, x, mode.epsilon, mode.kind == RenormKind::UnitSpatial);
    return out;
}

Weakener::Weakener(SelectionMask mask, RenormMode mode) : mask_(std::move(mask)), mode_(mode) {
    if (mask_.size() == 0) throw InvalidArgument("Weakener needs a non-empty mask");
    if (!(mode_.epsilon > 0.0)) throw InvalidArgument("renorm epsilon must be positive");
    twiddles(mask_.size(), cos_, sin_);
    for (std::size_t k = 0; k < mask_.size(); ++k)
        if (mask_.retains(k)) kept_.push_back(k);
}

template <typename T>
void Weakener::apply_impl(std::span<T> row) const {
    const std::size_t c = channels();
    if (row.size() != c) throw InvalidArgument("Weakener: row length does not match mask");
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(c));

    double in_norm2 = 0.0;
    for (T v : row) in_norm2 += double(v) * double(v);

    // Only retained coefficients are ever needed.
    std::vector<double> re(kept_.size()), im(kept_.size());
    double kept_norm2 = 0.0;
    for (std::size_t i = 0; i < kept_.size(); ++i) {
        const std::size_t k = kept_[i];
        double a = 0.0, b = 0.0;
        for (std::size_t n = 0; n < c; ++n) {
            const std::size_t j = (k * n) % c;
            a += row[n] * cos_[j];
            b -= row[n] * sin_[j];
        }
        re[i] = a * inv_sqrt;
        im[i] = b * inv_sqrt;
        kept_norm2 += re[i] * re[i] + im[i] * im[i];
    }

    double pre_scale = 1.0;
    // Parseval: ||X|| = ||x||.
    if (mode_.kind == RenormKind::Spectral)
        pre_scale = std::sqrt(in_norm2) / (std::sqrt(kept_norm2) + mode_.epsilon);

    std::vector<double> out(c, 0.0);
    for (std::size_t n = 0; n < c; ++n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < kept_.size(); ++i) {
            const std::size_t j = (kept_[i] * n) % c;
            acc += re[i] * cos_[j] - im[i] * sin_[j];
        }
        out[n] = acc * inv_sqrt * pre_scale;
    }

    if (mode_.kind == RenormKind::Spatial || mode_.kind == RenormKind::UnitSpatial) {
        double out_norm2 = 0.0;
        for (double v : out) out_norm2 += v * v;
        const double target = mode_.kind == RenormKind::UnitSpatial ? 1.0 : std::sqrt(in_norm2);
        const double s = target / (std::sqrt(out_norm2) + mode_.epsilon);
        for (auto & v : out) v *= s;
    }
    for (std::size_t n = 0; n < c; ++n) row[n] = static_cast<T>(out[n]);
}

void Weakener::apply(std::span<float> row) const { apply_impl(row); }
void Weakener::apply(std::span<double> row) const { apply_impl(row); }

void Weakener::apply_rows(std::span<float> data) const {
    const std::size_t c = channels();
    if (data.size() % c != 0) throw InvalidArgument("Weakener: data is not a whole number of rows");
    for (std::size_t off = 0; off < data.size(); off += c) apply(data.subspan(off, c));
}

} // namespace swg::spectral
