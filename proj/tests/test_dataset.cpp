#include "swg/dataset.hpp"
#include "swg/error.hpp"
#include "swg/rng.hpp"

#include <doctest.h>

using namespace swg;
using namespace swg::dataset;

namespace {

int band(int t) { return t / kBandWidth; }

// Replaces k distinct cells by tokens from a different band.
std::vector<int> flip(std::vector<int> t, int k, CounterRng & rng) {
    std::vector<int> idx(t.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
    for (int i = 0; i < k; ++i) {
        const std::size_t j = i + rng.below(idx.size() - i);
        std::swap(idx[i], idx[j]);
        const int old_band = band(t[idx[i]]);
        int nb = int(rng.below(kBands - 1));
        if (nb >= old_band) ++nb;
        t[idx[i]] = nb * kBandWidth + int(rng.below(kBandWidth));
    }
    return t;
}

} // namespace

TEST_CASE("generation is deterministic") {
    CHECK(generate_corpus(1, 0) == generate_corpus(1, 0));
    CHECK(generate_corpus(64, 3) == generate_corpus(64, 3));
    CHECK(generate_corpus(64, 3) != generate_corpus(64, 4));
    // grid i does not depend on how many grids follow
    const auto a = generate_corpus(10, 9), b = generate_corpus(20, 9);
    for (int i = 0; i < 10; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("every generated grid is valid for exactly its own class") {
    const auto corpus = generate_corpus(4096, 0);
    std::vector<int> per_class(kMaxClasses, 0);
    for (const auto & g : corpus) {
        REQUIRE(g.tokens.size() == 64);
        for (int t : g.tokens) CHECK((t >= 0 && t < kLevels));
        const auto v = validity(g.tokens, g.side, g.class_id);
        CHECK(v.valid);
        CHECK(v.score == 1.0);
        CHECK(v.class_match == true);
        CHECK(v.matched_class == g.class_id);
        int matches = 0;
        for (int c = 0; c < kMaxClasses; ++c) matches += matches_class(g.tokens, g.side, c);
        CHECK(matches == 1);
        ++per_class[g.class_id];
    }
    for (int n : per_class) CHECK(n > 400);
}

TEST_CASE("frame grids have a one-band border around another band") {
    const int frame = pattern_id("frame");
    CounterRng keys(1);
    for (int i = 0; i < 50; ++i) {
        const auto g = render_grid(frame, keys.next_u64());
        const int side = g.side;
        const int border = band(g.tokens[0]);
        const int inner = band(g.tokens[side + 1]);
        CHECK(border != inner);
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) {
                const bool edge = r == 0 || c == 0 || r == side - 1 || c == side - 1;
                CHECK(band(g.tokens[r * side + c]) == (edge ? border : inner));
            }
    }
}

TEST_CASE("random grids are invalid") {
    CounterRng rng(2);
    int valid = 0;
    const int n = 100000;
    std::vector<int> t(64);
    for (int i = 0; i < n; ++i) {
        for (auto & v : t) v = int(rng.below(kLevels));
        valid += validity(t, 8).valid;
    }
    CHECK(double(valid) / n < 1e-3);
}

TEST_CASE("relabeled stripes are valid but mismatch") {
    const auto g = render_grid(pattern_id("hstripes"), 77);
    const auto v = validity(g.tokens, g.side, pattern_id("checker"));
    CHECK(v.valid);
    CHECK(v.class_match == false);
    CHECK(v.matched_class == pattern_id("hstripes"));
    CHECK_FALSE(validity(g.tokens, g.side).class_match.has_value());
}

TEST_CASE("score decreases with corruption") {
    const auto corpus = generate_corpus(1000, 5);
    CounterRng rng(6);
    std::vector<double> mean(9, 0.0);
    for (const auto & g : corpus)
        for (int k = 0; k <= 8; ++k) mean[k] += validity(flip(g.tokens, k, rng), g.side).score / corpus.size();
    CHECK(mean[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 1; k <= 8; ++k) CHECK(mean[k] <= mean[k - 1]);
    CHECK(mean[8] < mean[1]);
    // a single wrong cell always breaks validity
    for (int i = 0; i < 200; ++i) CHECK_FALSE(validity(flip(corpus[i].tokens, 1, rng), 8).valid);
}

TEST_CASE("the grammar ignores the level inside a band") {
    auto g = render_grid(pattern_id("checker"), 5);
    for (auto & t : g.tokens) t = band(t) * kBandWidth + (kBandWidth - 1);
    CHECK(validity(g).valid);
}

TEST_CASE("malformed grids are rejected") {
    CHECK_THROWS_AS(validity(std::vector<int>(63, 0), 8), InvalidArgument);
    std::vector<int> t(64, 0);
    t[3] = 64;
    CHECK_THROWS_AS(validity(t, 8), InvalidArgument);
    CHECK_THROWS_AS(generate_corpus(0, 1), InvalidArgument);
}

TEST_CASE("class names") {
    for (int c = 0; c < kMaxClasses; ++c) CHECK(pattern_id(pattern_name(c)) == c);
    CHECK(pattern_name(0) == "rect");
    CHECK_THROWS_AS(pattern_id("spiral"), InvalidArgument);
}

TEST_CASE("fewer classes and other sides") {
    for (const auto & g : generate_corpus(200, 8, 3)) CHECK(g.class_id < 3);
    for (const auto & g : generate_corpus(100, 8, 8, 10)) {
        CHECK(g.tokens.size() == 100);
        CHECK(validity(g).valid);
    }
}

TEST_CASE("corpus text round trip and errors") {
    const auto c = generate_corpus(20, 1);
    const auto text = encode_corpus(c);
    CHECK(decode_corpus(text) == c);
    CHECK(text.substr(0, text.find(',')) == std::to_string(c[0].class_id));
    CHECK_THROWS_AS(decode_corpus(""), FormatError);
    CHECK_THROWS_AS(decode_corpus("1,2,3\n"), FormatError);
    std::string bad = text;
    bad.replace(bad.find(','), 1, ",x");
    try {
        decode_corpus(bad);
        FAIL("expected FormatError");
    } catch (const FormatError & e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("pgm render") {
    const auto g = render_grid(0, 1);
    const auto pgm = render_pgm(g.tokens, 8, 4);
    const std::string header = "P5\n32 32\n255\n";
    CHECK(pgm.substr(0, header.size()) == header);
    CHECK(pgm.size() == header.size() + 32 * 32);
    CHECK(uint8_t(pgm[header.size()]) == uint8_t(4 * g.tokens[0]));
}
