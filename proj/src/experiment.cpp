#include "swg/experiment.hpp"

#include "swg/error.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace swg::experiment {

std::optional<int> Conditioning::for_sample(int index, int class_count) const {
    switch (kind) {
        case Kind::Unconditional: return std::nullopt;
        case Kind::Fixed: return fixed_class;
        case Kind::Cycle: return index % class_count;
    }
    return std::nullopt;
}

uint64_t sample_seed(uint64_t root_seed, int index) { return derive_seed(root_seed, "sample", uint64_t(index)); }

int worker_count() {
    if (const char * env = std::getenv("SWG_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int jobs, int threads, const std::function<void(int)> & fn) {
    if (threads <= 0) threads = worker_count();
    threads = std::max(1, std::min(threads, jobs));
    if (threads == 1) {
        for (int i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < jobs; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto & th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

SampleOutcome run_sample(const model::Model & m, const guidance::GuidanceConfig & cfg, const Conditioning & cond,
                         int index, uint64_t root_seed, int side, bool keep_logits) {
    guidance::GuidanceConfig c = cfg;
    c.condition = cond.for_sample(index, m.config().class_count);
    if (!c.condition) c.omega_c.reset();
    SampleOutcome o;
    o.condition = c.condition;
    o.generation = guidance::generate(m, c, side * side, sample_seed(root_seed, index));
    o.validity = dataset::validity(o.generation.image, side, c.condition);
    if (!keep_logits)
        for (auto & s : o.generation.trace) {
            s.base_logits = {};
            s.perturbed_logits = {};
            s.uncond_logits.reset();
            s.blended_logits = {};
        }
    return o;
}

std::vector<SampleOutcome> run_samples(const model::Model & m, const guidance::GuidanceConfig & cfg,
                                       const Conditioning & cond, int n, uint64_t root_seed, int side, int threads,
                                       bool keep_logits) {
    if (n <= 0) throw InvalidArgument("sample count must be positive");
    std::vector<SampleOutcome> out(n);
    parallel_for(n, threads,
                 [&](int i) { out[i] = run_sample(m, cfg, cond, i, root_seed, side, keep_logits); });
    return out;
}

CellResult summarize(const std::vector<SampleOutcome> & outcomes) {
    CellResult r;
    r.n = int(outcomes.size());
    if (r.n == 0) return r;
    for (const auto & o : outcomes) {
        const bool valid = o.validity.valid;
        r.validity_rate += valid;
        r.valid_match_rate += valid && o.validity.class_match.value_or(true);
        r.mean_score += o.validity.score;
        double hb = 0.0, hp = 0.0;
        for (const auto & s : o.generation.trace) {
            hb += s.base_entropy;
            hp += s.perturbed_entropy;
        }
        r.mean_final_base_entropy += hb;
        r.mean_final_perturbed_entropy += hp;
    }
    const double n = r.n;
    r.validity_rate /= n;
    r.valid_match_rate /= n;
    r.mean_score /= n;
    r.mean_final_base_entropy /= n;
    r.mean_final_perturbed_entropy /= n;
    r.mean_final_entropy_gap = r.mean_final_perturbed_entropy - r.mean_final_base_entropy;
    return r;
}

} // namespace swg::experiment
