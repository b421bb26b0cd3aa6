#pragma once

// Procedural token grids with an exact grammar.
//
// Tokens are 6-bit intensities in [0, 64). The grammar only looks at the
// value band, band(t) = t / 8. Every class is a family of band maps
// parameterised by a few integers; a grid is valid for a class when some
// member of the family reproduces its band map exactly.
//
//   rect      filled rectangle, height and width in [2, side-3]
//   frame     one-cell border vs interior
//   hstripes  rows alternate between two bands with period 1 or 2
//   vstripes  columns alternate likewise
//   checker   checkerboard with cell size 1 or 2
//   gradient  column band = b0 + floor(j * k / side), k in {3, 4}
//   cross     both diagonals vs the rest
//   plus      one full row and one full column, both off the border
//
// Two-band classes need distinct foreground and background bands. The
// families are pairwise disjoint, so a valid grid matches exactly one class.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace swg::dataset {

inline constexpr int kLevels = 64;
inline constexpr int kBands = 8;
inline constexpr int kBandWidth = kLevels / kBands;
inline constexpr int kMaxClasses = 8;

enum class Pattern { Rect, Frame, HStripes, VStripes, Checker, Gradient, Cross, Plus };

std::string_view pattern_name(int class_id);
int pattern_id(std::string_view name);

struct TokenGrid {
    int side = 8;
    int class_id = 0;
    std::vector<int> tokens;  // row-major, side*side

    bool operator==(const TokenGrid &) const = default;
};

using Corpus = std::vector<TokenGrid>;

// One grid of class `class_id`, drawn from the stream keyed by `key`.
TokenGrid render_grid(int class_id, uint64_t key, int side = 8);

// Grid i uses class below(class_count) and parameters from the stream
// derive_seed(seed, "grid", i).
Corpus generate_corpus(int count, uint64_t seed, int class_count = kMaxClasses, int side = 8);

struct Validity {
    bool valid = false;
    std::optional<bool> class_match;  // set when a label was supplied
    double score = 0.0;               // best fraction of cells consistent with any family member
    int matched_class = -1;           // class whose grammar matched, -1 if none
};

// Throws InvalidArgument when tokens.size() != side*side or a token is
// outside [0, 64).
Validity validity(std::span<const int> tokens, int side, std::optional<int> label = std::nullopt,
                  int class_count = kMaxClasses);
Validity validity(const TokenGrid & g, int class_count = kMaxClasses);

// Exact predicate for a single class.
bool matches_class(std::span<const int> tokens, int side, int class_id);

// "class,t0,...,tN-1\n" per grid.
std::string encode_corpus(const Corpus & c);
// Throws FormatError naming the line.
Corpus decode_corpus(std::string_view text);

// Binary PGM (P5), each token drawn as a `scale` x `scale` block with
// intensity 4 * token.
std::string render_pgm(std::span<const int> tokens, int side, int scale = 4);

} // namespace swg::dataset
