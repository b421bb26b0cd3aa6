#pragma once

#include "swg/dataset.hpp"
#include "swg/model.hpp"

#include <filesystem>
#include <functional>
#include <string_view>
#include <vector>

namespace swg::train {

// Optimizer recipe. Defaults mirror configs/train.cfg.
struct TrainConfig {
    int batch = 16;
    double lr = 3e-3;
    double min_lr_frac = 0.1;  // cosine floor as a fraction of lr
    int warmup = 100;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    double grad_clip = 1.0;        // global L2 norm, 0 disables
    double null_class_prob = 0.1;  // class token replaced by the null class

    void validate() const;
};

// Recognised keys: the TrainConfig field names plus the ModelConfig field
// names (vocab, hidden, heads, layers, max_seq, class_count, mlp_mult).
// Unknown keys throw InvalidArgument.
void apply_config_text(std::string_view text, model::ModelConfig & mc, TrainConfig & tc);

struct TrainResult {
    model::ModelWeights weights;
    std::vector<double> losses;  // one per step, before the update
};

// Step s draws its batch from derive_seed(seed, "batch", s): `batch` grid
// indices, then one null-class coin per sequence, in that order.
TrainResult train(const dataset::Corpus & corpus, const model::ModelConfig & mc, const TrainConfig & tc, int steps,
                  uint64_t seed, const std::function<void(int, double)> & progress = {});

// Mean cross-entropy of one batch and its gradient, exposed for gradient
// checks. `sequences` are full token sequences of equal length.
template <typename S>
S loss_and_grad(const model::ParamSet<S> & p, const std::vector<std::vector<int>> & sequences,
                model::ParamSet<S> * grad);

// [BOS, class-or-null, image tokens...]
std::vector<int> grid_sequence(const model::ModelConfig & mc, const dataset::TokenGrid & g, bool null_class);

} // namespace swg::train
