#pragma once

// Batches of guided samples scored by the grid grammar.

#include "swg/dataset.hpp"
#include "swg/guidance.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace swg::experiment {

// Which class each sample is conditioned on.
struct Conditioning {
    enum class Kind { Unconditional, Fixed, Cycle } kind = Kind::Unconditional;
    int fixed_class = 0;

    std::optional<int> for_sample(int index, int class_count) const;
};

struct SampleOutcome {
    std::optional<int> condition;
    guidance::Generation generation;
    dataset::Validity validity;
};

struct CellResult {
    int n = 0;
    double validity_rate = 0.0;
    // Fraction that is valid AND matches its conditioning class; equals
    // validity_rate for unconditional cells.
    double valid_match_rate = 0.0;
    double mean_score = 0.0;
    double mean_final_base_entropy = 0.0;       // cumulative, nats
    double mean_final_perturbed_entropy = 0.0;  // cumulative, nats
    double mean_final_entropy_gap = 0.0;        // perturbed - base
};

// Sample i is generated with seed derive_seed(root_seed, "sample", i), so a
// sample's randomness does not depend on the cell it belongs to.
uint64_t sample_seed(uint64_t root_seed, int index);

// Threads from SWG_THREADS when set and positive, else hardware concurrency.
int worker_count();

// Results are ordered by sample index regardless of thread count.
std::vector<SampleOutcome> run_samples(const model::Model & m, const guidance::GuidanceConfig & cfg,
                                       const Conditioning & cond, int n, uint64_t root_seed, int side = 8,
                                       int threads = 0, bool keep_logits = false);

// One sample; logits are dropped from the trace unless `keep_logits`.
SampleOutcome run_sample(const model::Model & m, const guidance::GuidanceConfig & cfg, const Conditioning & cond,
                         int index, uint64_t root_seed, int side = 8, bool keep_logits = false);

CellResult summarize(const std::vector<SampleOutcome> & outcomes);

// Runs `jobs` closures over a pool of `threads` workers; job i writes only
// its own output slot.
void parallel_for(int jobs, int threads, const std::function<void(int)> & fn);

} // namespace swg::experiment
