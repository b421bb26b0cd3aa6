#include "swg/dataset.hpp"

#include "swg/error.hpp"
#include "swg/io.hpp"
#include "swg/rng.hpp"

#include <array>
#include <map>
#include <memory>
#include <mutex>

namespace swg::dataset {

namespace {

constexpr std::array<std::string_view, kMaxClasses> kNames = {"rect",    "frame",    "hstripes", "vstripes",
                                                             "checker", "gradient", "cross",    "plus"};

// A member of a class family. Two-band members carry a foreground mask;
// gradient members carry the band of every cell.
struct Member {
    std::vector<uint8_t> fg;
    std::vector<int8_t> bands;
};

using Family = std::vector<Member>;
using Families = std::array<Family, kMaxClasses>;

Family two_band(int side, const auto & pred) {
    Member m;
    m.fg.resize(std::size_t(side) * side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) m.fg[std::size_t(i) * side + j] = pred(i, j) ? 1 : 0;
    return {m};
}

Families build_families(int side) {
    Families f;
    auto add = [](Family & dst, Family src) { dst.insert(dst.end(), src.begin(), src.end()); };

    for (int h = 2; h <= side - 3; ++h)
        for (int w = 2; w <= side - 3; ++w)
            for (int r0 = 0; r0 + h <= side; ++r0)
                for (int c0 = 0; c0 + w <= side; ++c0)
                    add(f[int(Pattern::Rect)], two_band(side, [&](int i, int j) {
                            return i >= r0 && i < r0 + h && j >= c0 && j < c0 + w;
                        }));

    add(f[int(Pattern::Frame)],
        two_band(side, [&](int i, int j) { return i == 0 || j == 0 || i == side - 1 || j == side - 1; }));

    for (int p : {1, 2}) {
        add(f[int(Pattern::HStripes)], two_band(side, [&](int i, int) { return (i / p) % 2 == 1; }));
        add(f[int(Pattern::VStripes)], two_band(side, [&](int, int j) { return (j / p) % 2 == 1; }));
        add(f[int(Pattern::Checker)], two_band(side, [&](int i, int j) { return (i / p + j / p) % 2 == 1; }));
    }

    for (int k : {3, 4})
        for (int b0 = 0; b0 + k <= kBands; ++b0) {
            Member m;
            m.bands.resize(std::size_t(side) * side);
            for (int i = 0; i < side; ++i)
                for (int j = 0; j < side; ++j) m.bands[std::size_t(i) * side + j] = int8_t(b0 + (j * k) / side);
            f[int(Pattern::Gradient)].push_back(std::move(m));
        }

    add(f[int(Pattern::Cross)], two_band(side, [&](int i, int j) { return i == j || i + j == side - 1; }));

    for (int r = 1; r <= side - 2; ++r)
        for (int c = 1; c <= side - 2; ++c)
            add(f[int(Pattern::Plus)], two_band(side, [&](int i, int j) { return i == r || j == c; }));
    return f;
}

const Families & families(int side) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Families>> cache;
    if (side < 6 || side > 64) throw InvalidArgument("grid side must be in [6, 64]");
    std::lock_guard lock(mu);
    auto & slot = cache[side];
    if (!slot) slot = std::make_unique<Families>(build_families(side));
    return *slot;
}

void check_class(int class_id) {
    if (class_id < 0 || class_id >= kMaxClasses)
        throw InvalidArgument("class id " + std::to_string(class_id) + " outside [0, 8)");
}

// Number of cells consistent with `m` under the best band assignment.
int consistent_cells(const Member & m, std::span<const int> tokens) {
    if (!m.bands.empty()) {
        int hits = 0;
        for (std::size_t i = 0; i < tokens.size(); ++i) hits += (tokens[i] / kBandWidth == m.bands[i]);
        return hits;
    }
    std::array<int, kBands> hist_fg{}, hist_bg{};
    for (std::size_t i = 0; i < tokens.size(); ++i) (m.fg[i] ? hist_fg : hist_bg)[tokens[i] / kBandWidth]++;
    int best = 0;
    for (int a = 0; a < kBands; ++a)
        for (int b = 0; b < kBands; ++b)
            if (a != b) best = std::max(best, hist_bg[a] + hist_fg[b]);
    return best;
}

int best_for_class(const Families & fam, int class_id, std::span<const int> tokens) {
    int best = 0;
    for (const auto & m : fam[class_id]) {
        best = std::max(best, consistent_cells(m, tokens));
        if (best == int(tokens.size())) break;
    }
    return best;
}

void check_tokens(std::span<const int> tokens, int side) {
    if (side <= 0 || tokens.size() != std::size_t(side) * side)
        throw InvalidArgument("grid has " + std::to_string(tokens.size()) + " tokens, expected side^2 = " +
                              std::to_string(side * side));
    for (int t : tokens)
        if (t < 0 || t >= kLevels) throw InvalidArgument("token " + std::to_string(t) + " outside [0, 64)");
}

} // namespace

std::string_view pattern_name(int class_id) {
    check_class(class_id);
    return kNames[class_id];
}

int pattern_id(std::string_view name) {
    for (int i = 0; i < kMaxClasses; ++i)
        if (kNames[i] == name) return i;
    throw InvalidArgument("unknown pattern '" + std::string(name) + "'");
}

TokenGrid render_grid(int class_id, uint64_t key, int side) {
    check_class(class_id);
    const Family & fam = families(side)[class_id];
    CounterRng rng(key);
    const Member & m = fam[rng.below(fam.size())];
    const int bg = int(rng.below(kBands));
    int fg = int(rng.below(kBands - 1));
    if (fg >= bg) ++fg;

    TokenGrid g;
    g.side = side;
    g.class_id = class_id;
    g.tokens.resize(std::size_t(side) * side);
    for (std::size_t i = 0; i < g.tokens.size(); ++i) {
        const int band = m.bands.empty() ? (m.fg[i] ? fg : bg) : m.bands[i];
        g.tokens[i] = band * kBandWidth + int(rng.below(kBandWidth));
    }
    return g;
}

Corpus generate_corpus(int count, uint64_t seed, int class_count, int side) {
    if (count <= 0) throw InvalidArgument("corpus count must be positive");
    if (class_count <= 0 || class_count > kMaxClasses) throw InvalidArgument("class_count must be in [1, 8]");
    Corpus out;
    out.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) {
        CounterRng pick(derive_seed(seed, "grid", uint64_t(i)));
        const int cls = int(pick.below(uint64_t(class_count)));
        out.push_back(render_grid(cls, pick.next_u64(), side));
    }
    return out;
}

Validity validity(std::span<const int> tokens, int side, std::optional<int> label, int class_count) {
    check_tokens(tokens, side);
    if (class_count <= 0 || class_count > kMaxClasses) throw InvalidArgument("class_count must be in [1, 8]");
    if (label) check_class(*label);
    const Families & fam = families(side);
    const int n = int(tokens.size());

    Validity v;
    int best = 0;
    for (int c = 0; c < class_count; ++c) {
        const int hits = best_for_class(fam, c, tokens);
        if (hits == n && v.matched_class < 0) v.matched_class = c;
        best = std::max(best, hits);
    }
    v.valid = v.matched_class >= 0;
    v.score = double(best) / double(n);
    if (label) v.class_match = v.matched_class == *label;
    return v;
}

Validity validity(const TokenGrid & g, int class_count) { return validity(g.tokens, g.side, g.class_id, class_count); }

bool matches_class(std::span<const int> tokens, int side, int class_id) {
    check_tokens(tokens, side);
    check_class(class_id);
    return best_for_class(families(side), class_id, tokens) == int(tokens.size());
}

std::string encode_corpus(const Corpus & c) {
    std::string out;
    for (const auto & g : c) {
        out += std::to_string(g.class_id);
        for (int t : g.tokens) {
            out += ',';
            out += std::to_string(t);
        }
        out += '\n';
    }
    return out;
}

Corpus decode_corpus(std::string_view text) {
    Corpus out;
    int line_no = 0;
    for (const auto & raw : io::split(text, '\n')) {
        ++line_no;
        const auto line = io::trim(raw);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        const auto cells = io::split(line, ',');
        if (cells.size() < 2) throw FormatError(where, "expected class id followed by tokens");
        TokenGrid g;
        try {
            g.class_id = int(io::parse_int(cells[0], "class id"));
            for (std::size_t i = 1; i < cells.size(); ++i) g.tokens.push_back(int(io::parse_int(cells[i], "token")));
        } catch (const InvalidArgument & e) {
            throw FormatError(where, e.what());
        }
        int side = 0;
        while (std::size_t(side + 1) * (side + 1) <= g.tokens.size()) ++side;
        if (std::size_t(side) * side != g.tokens.size())
            throw FormatError(where, std::to_string(g.tokens.size()) + " tokens is not a square grid");
        g.side = side;
        if (g.class_id < 0 || g.class_id >= kMaxClasses) throw FormatError(where, "class id outside [0, 8)");
        for (int t : g.tokens)
            if (t < 0 || t >= kLevels) throw FormatError(where, "token outside [0, 64)");
        if (!out.empty() && out.front().side != side) throw FormatError(where, "grid side differs from line 1");
        out.push_back(std::move(g));
    }
    if (out.empty()) throw FormatError("corpus", "no grids");
    return out;
}

std::string render_pgm(std::span<const int> tokens, int side, int scale) {
    check_tokens(tokens, side);
    if (scale <= 0) throw InvalidArgument("pgm scale must be positive");
    const int px = side * scale;
    std::string out = "P5\n" + std::to_string(px) + " " + std::to_string(px) + "\n255\n";
    for (int y = 0; y < px; ++y)
        for (int x = 0; x < px; ++x)
            out.push_back(static_cast<char>(tokens[std::size_t(y / scale) * side + x / scale] * 4));
    return out;
}

} // namespace swg::dataset
