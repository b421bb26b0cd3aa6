#include "swg/error.hpp"
#include "swg/experiment.hpp"
#include "swg/guidance.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace swg;
using namespace swg::guidance;

namespace {

model::ModelWeights noisy_weights(const model::ModelConfig & cfg, uint64_t seed) {
    auto w = model::init_weights(cfg, seed);
    CounterRng rng(seed + 77);
    w.visit([&](const std::string &, float * d, int r, int c) {
        for (int i = 0; i < r * c; ++i) d[i] += float(0.15 * rng.normal());
    });
    return w;
}

const model::Model & test_model() {
    static const model::Model m(noisy_weights(model::ModelConfig{}, 31));
    return m;
}

std::vector<double> softmax(const std::vector<double> & z) {
    const double mx = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) s += p[i] = std::exp(z[i] - mx);
    for (auto & v : p) v /= s;
    return p;
}

} // namespace

TEST_CASE("blend arithmetic") {
    const std::vector<double> zc{1, 0}, zp{0, 1}, zb{0.5, 0.5};
    CHECK(blend(zc, zp, std::nullopt, 3.0, 0.0) == std::vector<double>{4, -3});
    CHECK(blend(zc, zp, std::nullopt, 0.0, 0.0) == zc);
    CHECK(blend(zc, zc, std::nullopt, 2.5, 0.0) == zc);
    // z = zc + 1*(zc - zp) = (2,-1); z += 2*(zc - zb) = (3,-2)
    CHECK(blend(zc, zp, std::span<const double>(zb), 1.0, 2.0) == std::vector<double>{3, -2});
    CHECK_THROWS_AS(blend(zc, std::vector<double>{1}, std::nullopt, 1, 0), InvalidArgument);
}

TEST_CASE("entropy values") {
    CHECK(entropy(std::vector<double>(64, 0.3)) == doctest::Approx(std::log(64.0)).epsilon(1e-12));
    std::vector<double> peaked(64, 0.0);
    peaked[0] = 1000;
    CHECK(entropy(peaked) < 1e-6);
    CHECK(entropy(std::vector<double>{std::log(3.0), 0.0}) == doctest::Approx(0.5623351446).epsilon(1e-9));
    // temperature 2 halves the logits
    CHECK(entropy(std::vector<double>{2 * std::log(3.0), 0.0}, 2.0) ==
          doctest::Approx(0.5623351446).epsilon(1e-9));
    CHECK_THROWS_AS(entropy(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("sampling probabilities and top-k") {
    const std::vector<double> z{1.0, 3.0, 3.0, 0.5, 2.0};
    const auto p = sampling_probs(z, {1.0, 0});
    const auto ref = softmax(z);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(p[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    const auto p2 = sampling_probs(z, {1.0, 2});
    CHECK(p2[1] == doctest::Approx(0.5));
    CHECK(p2[2] == doctest::Approx(0.5));
    CHECK(p2[0] == 0.0);
    const auto p1 = sampling_probs(z, {1.0, 1});
    CHECK(p1[1] == 1.0);  // tie goes to the lower index
    CounterRng rng(1);
    for (int i = 0; i < 20; ++i) CHECK(sample_token(z, {0.7, 1}, rng) == 1);
}

TEST_CASE("sampler frequencies follow the distribution") {
    const std::vector<double> z{0.0, 1.0, 2.0};
    const auto p = softmax(z);
    CounterRng rng(2);
    std::vector<int> hist(3, 0);
    const int n = 200000;
    for (int i = 0; i < n; ++i) ++hist[sample_token(z, {}, rng)];
    for (int i = 0; i < 3; ++i) CHECK(std::abs(hist[i] / double(n) - p[i]) < 0.005);
}

TEST_CASE("shifting every branch by a constant leaves the sample unchanged") {
    CounterRng src(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> zc(64), zp(64), zb(64);
        for (int i = 0; i < 64; ++i) {
            zc[i] = src.normal();
            zp[i] = src.normal();
            zb[i] = src.normal();
        }
        const double shift = 10 * src.normal();
        auto sc = zc, sp = zp, sb = zb;
        for (int i = 0; i < 64; ++i) {
            sc[i] += shift;
            sp[i] += shift;
            sb[i] += shift;
        }
        const auto a = blend(zc, zp, std::span<const double>(zb), 1.5, 2.0);
        const auto b = blend(sc, sp, std::span<const double>(sb), 1.5, 2.0);
        const auto pa = sampling_probs(a, {}), pb = sampling_probs(b, {});
        for (int i = 0; i < 64; ++i) CHECK(std::abs(pa[i] - pb[i]) < 1e-12);
        CounterRng r1(trial), r2(trial);
        CHECK(sample_token(a, {}, r1) == sample_token(b, {}, r2));
    }
}

TEST_CASE("greedy without guidance is plain greedy decoding") {
    const auto & m = test_model();
    const auto & mc = m.config();
    auto cfg = GuidanceConfig::defaults(mc);
    cfg.sampler.top_k = 1;
    cfg.condition = 2;
    const auto g = generate(m, cfg, 64, 5);

    model::KVCache cache(mc);
    auto z = model::prefill(m, cache, std::vector<int>{mc.bos(), mc.class_token(2)});
    for (int t = 0; t < 64; ++t) {
        const int tok = int(std::max_element(z.begin(), z.end()) - z.begin());
        CHECK(g.image[t] == tok);
        if (t + 1 < 64) z = model::forward_step(m, cache, tok);
    }
}

TEST_CASE("zero guidance never uses the weak branch") {
    const auto & m = test_model();
    auto cfg = GuidanceConfig::defaults(m.config());
    const auto g = generate(m, cfg, 64, 9);
    auto off = cfg;
    off.weak.sites = model::parse_hook_sites("all.mlp,all.q", 4);
    off.weak.mask = spectral::SelectionMask::from_range(64, 0, 0.05);
    const auto g2 = generate(m, off, 64, 9);
    CHECK(g.image == g2.image);
    for (const auto & s : g.trace) CHECK(s.blended_logits == s.base_logits);
}

TEST_CASE("every branch consumes the sampled token") {
    const auto & m = test_model();
    const auto & mc = m.config();
    auto cfg = GuidanceConfig::defaults(mc);
    cfg.omega_s = 2.0;
    cfg.omega_c = 1.5;
    cfg.condition = 4;
    const auto g = generate(m, cfg, 20, 11);
    CHECK(g.cache_length_base == 21);
    CHECK(g.cache_length_perturbed == 21);
    CHECK(g.cache_length_uncond == 21);

    const model::HookPlan plan(cfg.weak, mc);
    model::KVCache c(mc), p(mc), u(mc);
    auto zc = model::prefill(m, c, g.prefix);
    auto zp = model::prefill(m, p, g.prefix, &plan);
    auto zb = model::prefill(m, u, std::vector<int>{mc.bos(), mc.null_token()});
    for (int t = 0; t < 20; ++t) {
        const auto & s = g.trace[t];
        CHECK(s.base_logits == zc);
        CHECK(s.perturbed_logits == zp);
        CHECK(*s.uncond_logits == zb);
        CHECK(s.blended_logits == blend(zc, zp, std::span<const double>(zb), 2.0, 1.5));
        CHECK(s.base_entropy >= 0.0);
        CHECK(s.base_entropy <= std::log(64.0) + 1e-12);
        CHECK(s.perturbed_entropy <= std::log(64.0) + 1e-12);
        zc = model::forward_step(m, c, g.image[t]);
        zp = model::forward_step(m, p, g.image[t], &plan);
        zb = model::forward_step(m, u, g.image[t]);
    }
}

TEST_CASE("unhooked prefill feeds the prompt without hooks") {
    const auto & m = test_model();
    const auto & mc = m.config();
    auto cfg = GuidanceConfig::defaults(mc);
    cfg.omega_s = 1.0;
    cfg.hooked_prefill = false;
    const auto g = generate(m, cfg, 3, 12);
    const model::HookPlan plan(cfg.weak, mc);
    model::KVCache p(mc);
    model::forward_step(m, p, mc.bos());
    CHECK(g.trace[0].perturbed_logits == model::forward_step(m, p, mc.null_token(), &plan));

    cfg.hooked_prefill = true;
    CHECK(generate(m, cfg, 3, 12).trace[0].perturbed_logits != g.trace[0].perturbed_logits);
}

TEST_CASE("generation is deterministic and seed dependent") {
    const auto & m = test_model();
    auto cfg = GuidanceConfig::defaults(m.config());
    cfg.omega_s = 1.0;
    const auto a = generate(m, cfg, 64, 3);
    const auto b = generate(m, cfg, 64, 3);
    CHECK(a.image == b.image);
    CHECK(trace_csv(a.trace) == trace_csv(b.trace));
    CHECK(generate(m, cfg, 64, 4).image != a.image);
    CHECK(a.prefix == std::vector<int>{64, 73});
    CHECK(a.cache_length_uncond == -1);
}

TEST_CASE("configuration errors") {
    const auto & m = test_model();
    auto cfg = GuidanceConfig::defaults(m.config());
    cfg.omega_c = 1.0;
    CHECK_THROWS_AS(generate(m, cfg, 4, 0), InvalidArgument);
    cfg = GuidanceConfig::defaults(m.config());
    CHECK_THROWS_AS(generate(m, cfg, 65, 0), SequenceTooLong);
    cfg.omega_s = -1;
    CHECK_THROWS_AS(generate(m, cfg, 4, 0), InvalidArgument);
    cfg.omega_s = 0;
    cfg.sampler.temperature = 0;
    CHECK_THROWS_AS(generate(m, cfg, 4, 0), InvalidArgument);
    cfg.sampler.temperature = 1;
    cfg.condition = 8;
    CHECK_THROWS_AS(generate(m, cfg, 4, 0), InvalidArgument);
}

TEST_CASE("trace exports") {
    const auto & m = test_model();
    auto cfg = GuidanceConfig::defaults(m.config());
    const auto g = generate(m, cfg, 3, 1);
    const auto csv = trace_csv(g.trace);
    CHECK(csv.rfind("step,base_entropy,perturbed_entropy,sampled_token\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    const auto json = trace_json(g.trace);
    CHECK(json.find("\"blended_logits\"") != std::string::npos);
    CHECK(json.find("\"uncond_logits\":null") != std::string::npos);
}

TEST_CASE("sample results do not depend on thread count") {
    const auto & m = test_model();
    auto cfg = GuidanceConfig::defaults(m.config());
    cfg.omega_s = 1.0;
    experiment::Conditioning cond;
    cond.kind = experiment::Conditioning::Kind::Cycle;
    const auto a = experiment::run_samples(m, cfg, cond, 12, 7, 8, 1);
    const auto b = experiment::run_samples(m, cfg, cond, 12, 7, 8, 4);
    for (int i = 0; i < 12; ++i) {
        CHECK(a[i].generation.image == b[i].generation.image);
        CHECK(a[i].condition == std::optional<int>(i % 8));
    }
    const auto single = experiment::run_sample(m, cfg, cond, 5, 7);
    CHECK(single.generation.image == a[5].generation.image);
    CHECK(experiment::sample_seed(7, 5) == derive_seed(7, "sample", 5));
}
