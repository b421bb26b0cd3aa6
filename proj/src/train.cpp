#include "swg/train.hpp"

#include "swg/error.hpp"
#include "swg/io.hpp"
#include "swg/rng.hpp"
#include "transformer_impl.hpp"

#include <cmath>
#include <numbers>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace swg::train {

using model::ModelConfig;
using model::ParamSet;

void TrainConfig::validate() const {
    auto need = [](bool ok, const char * what) {
        if (!ok) throw InvalidArgument(std::string("train config: ") + what);
    };
    need(batch > 0, "batch must be positive");
    need(lr > 0, "lr must be positive");
    need(min_lr_frac >= 0 && min_lr_frac <= 1, "min_lr_frac must be in [0, 1]");
    need(warmup >= 0, "warmup must be non-negative");
    need(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "betas must be in [0, 1)");
    need(adam_eps > 0, "adam_eps must be positive");
    need(grad_clip >= 0, "grad_clip must be non-negative");
    need(null_class_prob >= 0 && null_class_prob <= 1, "null_class_prob must be in [0, 1]");
}

void apply_config_text(std::string_view text, ModelConfig & mc, TrainConfig & tc) {
    for (const auto & [key, value] : io::parse_key_values(text)) {
        auto i = [&] { return int(io::parse_int(value, key)); };
        auto d = [&] { return io::parse_double(value, key); };
        if (key == "vocab") mc.vocab = i();
        else if (key == "hidden") mc.hidden = i();
        else if (key == "heads") mc.heads = i();
        else if (key == "layers") mc.layers = i();
        else if (key == "max_seq") mc.max_seq = i();
        else if (key == "class_count") mc.class_count = i();
        else if (key == "mlp_mult") mc.mlp_mult = i();
        else if (key == "batch") tc.batch = i();
        else if (key == "lr") tc.lr = d();
        else if (key == "min_lr_frac") tc.min_lr_frac = d();
        else if (key == "warmup") tc.warmup = i();
        else if (key == "beta1") tc.beta1 = d();
        else if (key == "beta2") tc.beta2 = d();
        else if (key == "adam_eps") tc.adam_eps = d();
        else if (key == "weight_decay") tc.weight_decay = d();
        else if (key == "grad_clip") tc.grad_clip = d();
        else if (key == "null_class_prob") tc.null_class_prob = d();
        else throw InvalidArgument("unknown config key '" + key + "'");
    }
    mc.validate();
    tc.validate();
}

std::vector<int> grid_sequence(const ModelConfig & mc, const dataset::TokenGrid & g, bool null_class) {
    if (g.class_id >= mc.class_count && !null_class)
        throw InvalidArgument("grid class " + std::to_string(g.class_id) + " exceeds model class_count");
    std::vector<int> seq{mc.bos(), null_class ? mc.null_token() : mc.class_token(g.class_id)};
    for (int t : g.tokens) {
        if (t < 0 || t >= mc.vocab) throw InvalidArgument("grid token outside the model vocabulary");
        seq.push_back(t);
    }
    return seq;
}

template <typename S>
S loss_and_grad(const ParamSet<S> & p, const std::vector<std::vector<int>> & sequences, ParamSet<S> * grad) {
    if (sequences.empty()) throw InvalidArgument("empty batch");
    const int len = int(sequences.front().size());
    const int seq = len - 1;
    if (seq < 2) throw InvalidArgument("sequences too short to train on");
    if (len > p.config.max_seq) throw SequenceTooLong("training sequence longer than max_seq");
    const int batch = int(sequences.size());
    std::vector<int> inputs, targets;
    inputs.reserve(std::size_t(batch) * seq);
    targets.reserve(std::size_t(batch) * seq);
    for (const auto & s : sequences) {
        if (int(s.size()) != len) throw InvalidArgument("batch sequences differ in length");
        for (int t = 0; t < seq; ++t) {
            inputs.push_back(s[t]);
            // Position 0 would predict the class token, which is not an
            // image token; it carries no loss.
            targets.push_back(t == 0 ? -1 : s[t + 1]);
        }
    }
    model::detail::BatchActs<S> acts;
    model::detail::forward_batch(p, inputs, batch, seq, acts);
    const S loss = model::detail::cross_entropy(acts, targets);
    if (grad) model::detail::backward_batch(p, acts, *grad);
    return loss;
}

template float loss_and_grad<float>(const ParamSet<float> &, const std::vector<std::vector<int>> &,
                                    ParamSet<float> *);
template double loss_and_grad<double>(const ParamSet<double> &, const std::vector<std::vector<int>> &,
                                      ParamSet<double> *);

namespace {

struct Slot {
    float * w;
    float * g;
    float * m;
    float * v;
    std::size_t n;
    bool decay;
};

double learning_rate(const TrainConfig & tc, int step, int steps) {
    if (tc.warmup > 0 && step < tc.warmup) return tc.lr * double(step + 1) / double(tc.warmup);
    const double span = std::max(1, steps - tc.warmup);
    const double progress = std::min(1.0, double(step - tc.warmup) / span);
    const double floor = tc.lr * tc.min_lr_frac;
    return floor + 0.5 * (tc.lr - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

} // namespace

TrainResult train(const dataset::Corpus & corpus, const ModelConfig & mc, const TrainConfig & tc, int steps,
                  uint64_t seed, const std::function<void(int, double)> & progress) {
    if (corpus.empty()) throw InvalidArgument("training corpus is empty");
    if (steps < 0) throw InvalidArgument("steps must be non-negative");
    mc.validate();
    tc.validate();
    const std::size_t grid_len = corpus.front().tokens.size();
    for (const auto & g : corpus)
        if (g.tokens.size() != grid_len) throw InvalidArgument("corpus grids differ in size");
    if (int(grid_len) + 2 > mc.max_seq) throw InvalidArgument("grids do not fit in max_seq");

    TrainResult res;
    res.weights = model::init_weights(mc, seed);
    if (steps == 0) return res;

#if defined(__GLIBC__)
    // activation buffers are a few MB each; keep them on the heap between steps
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif

    ParamSet<float> grad = ParamSet<float>::zeros(mc);
    ParamSet<float> m1 = ParamSet<float>::zeros(mc);
    ParamSet<float> m2 = ParamSet<float>::zeros(mc);
    std::vector<Slot> slots;
    {
        std::vector<std::pair<float *, std::size_t>> w, g, a, b;
        std::vector<bool> decay;
        res.weights.visit([&](const std::string & name, float * d, int r, int c) {
            w.emplace_back(d, std::size_t(r) * c);
            // No decay on LayerNorm parameters and biases.
            decay.push_back(r > 1 && name.find(".b") == std::string::npos);
        });
        grad.visit([&](const std::string &, float * d, int r, int c) { g.emplace_back(d, std::size_t(r) * c); });
        m1.visit([&](const std::string &, float * d, int r, int c) { a.emplace_back(d, std::size_t(r) * c); });
        m2.visit([&](const std::string &, float * d, int r, int c) { b.emplace_back(d, std::size_t(r) * c); });
        for (std::size_t i = 0; i < w.size(); ++i)
            slots.push_back({w[i].first, g[i].first, a[i].first, b[i].first, w[i].second, decay[i]});
    }

    std::vector<std::vector<int>> batch(tc.batch);
    for (int step = 0; step < steps; ++step) {
        CounterRng rng(derive_seed(seed, "batch", uint64_t(step)));
        std::vector<std::size_t> picks(tc.batch);
        for (auto & p : picks) p = rng.below(corpus.size());
        for (int b = 0; b < tc.batch; ++b) {
            const bool drop = rng.uniform() < tc.null_class_prob;
            batch[b] = grid_sequence(mc, corpus[picks[b]], drop);
        }

        for (auto & s : slots) std::fill(s.g, s.g + s.n, 0.0f);
        const float loss = loss_and_grad(res.weights, batch, &grad);
        res.losses.push_back(loss);
        if (progress) progress(step, loss);

        double gnorm2 = 0.0;
        for (const auto & s : slots)
            for (std::size_t i = 0; i < s.n; ++i) gnorm2 += double(s.g[i]) * s.g[i];
        const double gnorm = std::sqrt(gnorm2);
        const float clip = (tc.grad_clip > 0 && gnorm > tc.grad_clip) ? float(tc.grad_clip / gnorm) : 1.0f;

        const double lr = learning_rate(tc, step, steps);
        const double bc1 = 1.0 - std::pow(tc.beta1, step + 1);
        const double bc2 = 1.0 - std::pow(tc.beta2, step + 1);
        const float b1 = float(tc.beta1), b2 = float(tc.beta2);
        const float step_size = float(lr / bc1);
        const float inv_bc2 = float(1.0 / bc2);
        const float eps = float(tc.adam_eps);
        const float wd = float(lr * tc.weight_decay);
        for (auto & s : slots) {
            for (std::size_t i = 0; i < s.n; ++i) {
                const float g = s.g[i] * clip;
                s.m[i] = b1 * s.m[i] + (1.0f - b1) * g;
                s.v[i] = b2 * s.v[i] + (1.0f - b2) * g * g;
                if (s.decay) s.w[i] -= wd * s.w[i];
                s.w[i] -= step_size * s.m[i] / (std::sqrt(s.v[i] * inv_bc2) + eps);
            }
        }
    }
    return res;
}

} // namespace swg::train
