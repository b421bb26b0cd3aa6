#pragma once

// Guided sampling: per step, a hook-free conditional branch, a weakened
// branch and optionally an unconditional branch are run on their own KV
// caches; their logits are blended and one token is sampled and fed to every
// branch.
//
//   z = z_c + omega_s * (z_c - z_p)
//   z = z + omega_c * (z_c - z_b)          (when omega_c is set)

#include "swg/model.hpp"
#include "swg/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace swg::guidance {

struct Sampler {
    double temperature = 1.0;
    int top_k = 0;  // 0 keeps the full vocabulary; 1 is greedy
};

struct GuidanceConfig {
    double omega_s = 0.0;
    std::optional<double> omega_c;
    model::HookConfig weak;
    Sampler sampler;
    std::optional<int> condition;  // class id; nullopt is unconditional
    // Feed the prompt prefix through the weak branch with hooks active. When
    // false, all prefix tokens but the last are fed without hooks.
    bool hooked_prefill = true;

    // Value hooks on every layer, symmetric retention 0:0.1, spectral renorm.
    static GuidanceConfig defaults(const model::ModelConfig & mc);

    void validate(const model::ModelConfig & mc) const;
};

struct StepTrace {
    std::vector<double> base_logits;
    std::vector<double> perturbed_logits;
    std::optional<std::vector<double>> uncond_logits;
    std::vector<double> blended_logits;
    int sampled_token = -1;
    double base_entropy = 0.0;       // nats, at the sampler temperature
    double perturbed_entropy = 0.0;
};

struct Generation {
    std::vector<int> prefix;   // [BOS, class or null]
    std::vector<int> image;    // sampled image tokens
    std::vector<StepTrace> trace;
    int cache_length_base = 0;
    int cache_length_perturbed = 0;
    int cache_length_uncond = -1;  // -1 when the CFG branch is off
};

std::vector<double> blend(std::span<const double> z_c, std::span<const double> z_p,
                          std::optional<std::span<const double>> z_b, double omega_s, double omega_c);

double entropy(std::span<const double> logits, double temperature = 1.0);

// softmax(logits / temperature), optionally restricted to the top_k largest
// logits (ties go to the lower index).
std::vector<double> sampling_probs(std::span<const double> logits, const Sampler & s);

// Inverse-CDF draw over token order with one uniform from `rng`.
int sample_token(std::span<const double> logits, const Sampler & s, CounterRng & rng);

// Step t consumes the t-th draw of CounterRng(seed). Throws SequenceTooLong
// when prefix + length exceeds max_seq.
Generation generate(const model::Model & m, const GuidanceConfig & cfg, int length, uint64_t seed);

// StepTrace CSV: "step,base_entropy,perturbed_entropy,sampled_token".
std::string trace_csv(const std::vector<StepTrace> & trace);
// JSON array of objects with every StepTrace field.
std::string trace_json(const std::vector<StepTrace> & trace);

} // namespace swg::guidance
