#include "swg/guidance.hpp"

#include "swg/error.hpp"
#include "swg/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace swg::guidance {

GuidanceConfig GuidanceConfig::defaults(const model::ModelConfig & mc) {
    GuidanceConfig g;
    for (int l = 0; l < mc.layers; ++l) g.weak.sites.push_back({l, model::Site::Value});
    g.weak.mask = spectral::SelectionMask::from_range(std::size_t(mc.hidden), 0.0, 0.1, true);
    g.weak.mode = {spectral::RenormKind::Spectral, 1e-8};
    return g;
}

void GuidanceConfig::validate(const model::ModelConfig & mc) const {
    if (!(omega_s >= 0.0)) throw InvalidArgument("omega_s must be >= 0");
    if (omega_c && !(*omega_c >= 0.0)) throw InvalidArgument("omega_c must be >= 0");
    if (!(sampler.temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
    if (sampler.top_k < 0) throw InvalidArgument("top_k must be >= 0");
    if (condition && (*condition < 0 || *condition >= mc.class_count))
        throw InvalidArgument("condition class " + std::to_string(*condition) + " outside [0, " +
                              std::to_string(mc.class_count) + ")");
    if (!condition && omega_c) throw InvalidArgument("CFG needs a condition; unconditional sampling cannot use omega_c");
    if (weak.kind == model::WeakKind::Spectral && !weak.sites.empty() && weak.mask.size() == 0)
        throw InvalidArgument("weak branch has hooks but no mask");
}

std::vector<double> blend(std::span<const double> z_c, std::span<const double> z_p,
                          std::optional<std::span<const double>> z_b, double omega_s, double omega_c) {
    if (z_c.size() != z_p.size() || (z_b && z_b->size() != z_c.size()))
        throw InvalidArgument("blend: logit vectors differ in length");
    std::vector<double> z(z_c.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = z_c[i] + omega_s * (z_c[i] - z_p[i]);
    if (z_b)
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = z[i] + omega_c * (z_c[i] - (*z_b)[i]);
    return z;
}

double entropy(std::span<const double> logits, double temperature) {
    if (logits.empty()) throw InvalidArgument("entropy of empty logits");
    if (!(temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v / temperature);
    double sum = 0.0, weighted = 0.0;
    for (double v : logits) {
        const double a = v / temperature - mx;
        const double e = std::exp(a);
        sum += e;
        weighted += e * a;
    }
    // H = log Z - E[a] with a shifted so that log Z is well conditioned.
    const double h = std::log(sum) - weighted / sum;
    return std::max(0.0, h);
}

std::vector<double> sampling_probs(std::span<const double> logits, const Sampler & s) {
    if (logits.empty()) throw InvalidArgument("sampling from empty logits");
    if (!(s.temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
    const std::size_t n = logits.size();
    std::vector<uint8_t> keep(n, 1);
    if (s.top_k > 0 && std::size_t(s.top_k) < n) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
        std::fill(keep.begin(), keep.end(), 0);
        for (int i = 0; i < s.top_k; ++i) keep[order[i]] = 1;
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) mx = std::max(mx, logits[i] / s.temperature);
    std::vector<double> p(n, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) sum += p[i] = std::exp(logits[i] / s.temperature - mx);
    for (auto & v : p) v /= sum;
    return p;
}

int sample_token(std::span<const double> logits, const Sampler & s, CounterRng & rng) {
    const auto p = sampling_probs(logits, s);
    const double u = rng.uniform();
    double acc = 0.0;
    int last = -1;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        acc += p[i];
        last = int(i);
        if (u < acc) return int(i);
    }
    return last;
}

Generation generate(const model::Model & m, const GuidanceConfig & cfg, int length, uint64_t seed) {
    const auto & mc = m.config();
    cfg.validate(mc);
    if (length < 0) throw InvalidArgument("length must be non-negative");

    Generation out;
    out.prefix = {mc.bos(), cfg.condition ? mc.class_token(*cfg.condition) : mc.null_token()};
    if (int(out.prefix.size()) + length > mc.max_seq)
        throw SequenceTooLong("prefix + " + std::to_string(length) + " tokens exceeds max_seq " +
                              std::to_string(mc.max_seq));

    const model::HookPlan plan(cfg.weak, mc);
    const bool use_cfg = cfg.omega_c.has_value();

    model::KVCache base(mc), weak(mc), uncond(mc);
    std::vector<double> zc = model::prefill(m, base, out.prefix);
    std::vector<double> zp;
    if (cfg.hooked_prefill) {
        zp = model::prefill(m, weak, out.prefix, &plan);
    } else {
        const std::span<const int> pre(out.prefix);
        model::prefill(m, weak, pre.first(pre.size() - 1));
        zp = model::forward_step(m, weak, pre.back(), &plan);
    }
    std::vector<double> zb;
    if (use_cfg) {
        const std::vector<int> null_prefix{mc.bos(), mc.null_token()};
        zb = model::prefill(m, uncond, null_prefix);
    }

    CounterRng rng(seed);
    for (int t = 0; t < length; ++t) {
        StepTrace st;
        st.blended_logits = blend(zc, zp, use_cfg ? std::optional<std::span<const double>>(zb) : std::nullopt,
                                  cfg.omega_s, cfg.omega_c.value_or(0.0));
        st.sampled_token = sample_token(st.blended_logits, cfg.sampler, rng);
        st.base_entropy = entropy(zc, cfg.sampler.temperature);
        st.perturbed_entropy = entropy(zp, cfg.sampler.temperature);
        st.base_logits = zc;
        st.perturbed_logits = zp;
        if (use_cfg) st.uncond_logits = zb;
        out.image.push_back(st.sampled_token);
        out.trace.push_back(std::move(st));

        if (t + 1 == length) break;
        const int tok = out.image.back();
        zc = model::forward_step(m, base, tok);
        zp = model::forward_step(m, weak, tok, &plan);
        if (use_cfg) zb = model::forward_step(m, uncond, tok);
    }
    out.cache_length_base = base.length();
    out.cache_length_perturbed = weak.length();
    out.cache_length_uncond = use_cfg ? uncond.length() : -1;
    return out;
}

std::string trace_csv(const std::vector<StepTrace> & trace) {
    std::string out = "step,base_entropy,perturbed_entropy,sampled_token\n";
    for (std::size_t t = 0; t < trace.size(); ++t) {
        out += std::to_string(t) + "," + io::format_double(trace[t].base_entropy) + "," +
               io::format_double(trace[t].perturbed_entropy) + "," + std::to_string(trace[t].sampled_token) + "\n";
    }
    return out;
}

std::string trace_json(const std::vector<StepTrace> & trace) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t t = 0; t < trace.size(); ++t) {
        const auto & s = trace[t];
        nlohmann::json j;
        j["step"] = t;
        j["sampled_token"] = s.sampled_token;
        j["base_entropy"] = s.base_entropy;
        j["perturbed_entropy"] = s.perturbed_entropy;
        j["base_logits"] = s.base_logits;
        j["perturbed_logits"] = s.perturbed_logits;
        j["uncond_logits"] = s.uncond_logits ? nlohmann::json(*s.uncond_logits) : nlohmann::json(nullptr);
        j["blended_logits"] = s.blended_logits;
        arr.push_back(std::move(j));
    }
    return arr.dump() + "\n";
}

} // namespace swg::guidance
