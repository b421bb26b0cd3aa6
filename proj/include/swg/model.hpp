#pragma once

// Small pre-norm decoder-only transformer over discrete tokens.
//
// Token ids: [0, V) image tokens, V = BOS, V+1+c for class c, and
// V+1+class_count for the null class used by the unconditional branch.
// Output logits cover only the V image tokens and share weights with the
// first V rows of the token embedding.

#include "swg/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace swg::model {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, 1, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
    int vocab = 64;
    int hidden = 64;
    int heads = 4;
    int layers = 4;
    int max_seq = 66;
    int class_count = 8;
    int mlp_mult = 4;

    int head_dim() const { return hidden / heads; }
    int bos() const { return vocab; }
    int class_token(int c) const { return vocab + 1 + c; }
    int null_token() const { return vocab + 1 + class_count; }
    int embed_rows() const { return vocab + 2 + class_count; }

    // Throws InvalidArgument naming the broken constraint.
    void validate() const;
    bool operator==(const ModelConfig &) const = default;
};

template <typename S>
struct LayerParams {
    Vec<S> ln1_g, ln1_b;
    Mat<S> wq, wk, wv, wo;   // [C, C], applied as x * W
    Vec<S> ln2_g, ln2_b;
    Mat<S> w1;               // [C, mlp_mult*C]
    Vec<S> b1;
    Mat<S> w2;               // [mlp_mult*C, C]
    Vec<S> b2;
};

template <typename S>
struct ParamSet {
    ModelConfig config;
    Mat<S> tok_emb;          // [embed_rows, C]
    Mat<S> pos_emb;          // [max_seq, C]
    std::vector<LayerParams<S>> layers;
    Vec<S> lnf_g, lnf_b;

    // Zero tensors shaped for `cfg` (LayerNorm gains included).
    static ParamSet zeros(const ModelConfig & cfg);

    // Calls f(name, data, rows, cols) for every tensor in a fixed order.
    template <typename F>
    void visit(F && f);
    template <typename F>
    void visit(F && f) const;

    std::size_t parameter_count() const;

    template <typename T>
    ParamSet<T> cast() const;
};

using ModelWeights = ParamSet<float>;

// Initial weights: N(0, 0.02) matrices, residual projections scaled by
// 1/sqrt(2L), unit LayerNorm gains, zero biases.
ModelWeights init_weights(const ModelConfig & cfg, uint64_t seed);

// ---------------------------------------------------------------- hooks

enum class Site { Query, Key, Value, AttnOut, MlpOut, Residual };

struct HookSite {
    int layer = 0;
    Site site = Site::Value;
    bool operator==(const HookSite &) const = default;
};

// "0.v", "3.residual", ...
HookSite parse_hook_site(const std::string & text);
// Comma list, also accepts "all.v" for every layer.
std::vector<HookSite> parse_hook_sites(const std::string & text, int layers);
std::string to_string(const HookSite & h);
std::string to_string(const std::vector<HookSite> & hs);

// How the hooked activation is degraded. Spectral is the weakening pipeline;
// Average replaces the vector by its channel mean; Prune drops the whole
// block output of every hooked layer.
enum class WeakKind { Spectral, Average, Prune };

WeakKind parse_weak_kind(const std::string & name);
std::string to_string(WeakKind k);

struct HookConfig {
    std::vector<HookSite> sites;
    spectral::SelectionMask mask;
    spectral::RenormMode mode;
    WeakKind kind = WeakKind::Spectral;
};

// HookConfig resolved against a model: validated layer indices, a prepared
// Weakener and per-layer site flags.
class HookPlan {
public:
    HookPlan() = default;
    HookPlan(const HookConfig & hooks, const ModelConfig & cfg);

    bool empty() const { return sites_.empty(); }
    bool hooked(int layer, Site s) const;
    bool pruned(int layer) const;
    // Degrades one activation row in place.
    void apply(std::span<double> row) const;

private:
    std::vector<HookSite> sites_;
    std::vector<uint8_t> flags_;  // layers x 6
    std::vector<uint8_t> pruned_;
    std::optional<spectral::Weakener> weakener_;
    WeakKind kind_ = WeakKind::Spectral;
    spectral::RenormMode mode_;
};

// ---------------------------------------------------------------- inference

// Read-only double-precision copy of a ModelWeights, shareable across
// threads.
class Model {
public:
    explicit Model(const ModelWeights & w);

    const ModelConfig & config() const { return params_.config; }
    const ParamSet<double> & params() const { return params_; }

private:
    ParamSet<double> params_;
};

class KVCache {
public:
    explicit KVCache(const ModelConfig & cfg);

    int length() const { return length_; }
    int capacity() const { return max_seq_; }
    // Rows [0, length) of layer `l`, each `hidden` wide.
    std::span<const double> keys(int layer) const;
    std::span<const double> values(int layer) const;

    void clear() { length_ = 0; }

    // Write access for the decoding step: row `pos` of layer `l`.
    std::span<double> key_row(int layer, int pos);
    std::span<double> value_row(int layer, int pos);
    void advance() { ++length_; }

private:
    int layers_, hidden_, max_seq_;
    int length_ = 0;
    std::vector<std::vector<double>> k_, v_;
};

// Residual stream after each block of one step.
struct ActivationTrace {
    std::vector<std::vector<double>> residual;
};

// One incremental decoding step. Consumes `token` at position
// cache.length(), appends its keys/values, returns V next-token logits.
// Throws SequenceTooLong when the cache is full.
std::vector<double> forward_step(const Model & m, KVCache & cache, int token, const HookPlan * hooks = nullptr,
                                 ActivationTrace * trace = nullptr);

std::vector<double> forward_step(const Model & m, KVCache & cache, int token, const std::vector<HookSite> & hooks,
                                 const spectral::SelectionMask & mask, const spectral::RenormMode & mode);

// Feeds a prefix through the cache; returns the logits after its last token.
std::vector<double> prefill(const Model & m, KVCache & cache, std::span<const int> tokens,
                            const HookPlan * hooks = nullptr);

// Full-sequence causal recompute without a cache (the batched training
// forward in double precision). Row t holds the logits after tokens[0..t].
Mat<double> recompute_logits(const Model & m, std::span<const int> tokens);

// Mean next-token negative log-likelihood of an image-token sequence under
// prefix [BOS, cls]. `cls_token` is a full token id.
double image_nll(const Model & m, int cls_token, std::span<const int> image_tokens);

// ---------------------------------------------------------------- templates

template <typename S>
ParamSet<S> ParamSet<S>::zeros(const ModelConfig & cfg) {
    cfg.validate();
    const int c = cfg.hidden, m = cfg.mlp_mult * cfg.hidden;
    ParamSet<S> p;
    p.config = cfg;
    p.tok_emb = Mat<S>::Zero(cfg.embed_rows(), c);
    p.pos_emb = Mat<S>::Zero(cfg.max_seq, c);
    p.layers.resize(cfg.layers);
    for (auto & l : p.layers) {
        l.ln1_g = Vec<S>::Zero(c);
        l.ln1_b = Vec<S>::Zero(c);
        l.wq = Mat<S>::Zero(c, c);
        l.wk = Mat<S>::Zero(c, c);
        l.wv = Mat<S>::Zero(c, c);
        l.wo = Mat<S>::Zero(c, c);
        l.ln2_g = Vec<S>::Zero(c);
        l.ln2_b = Vec<S>::Zero(c);
        l.w1 = Mat<S>::Zero(c, m);
        l.b1 = Vec<S>::Zero(m);
        l.w2 = Mat<S>::Zero(m, c);
        l.b2 = Vec<S>::Zero(c);
    }
    p.lnf_g = Vec<S>::Zero(c);
    p.lnf_b = Vec<S>::Zero(c);
    return p;
}

namespace detail {
template <typename P, typename F>
void visit_params(P & p, F && f) {
    auto mat = [&](const std::string & name, auto & m) { f(name, m.data(), int(m.rows()), int(m.cols())); };
    mat("tok_emb", p.tok_emb);
    mat("pos_emb", p.pos_emb);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        auto & l = p.layers[i];
        const std::string pre = "layers." + std::to_string(i) + ".";
        mat(pre + "ln1.g", l.ln1_g);
        mat(pre + "ln1.b", l.ln1_b);
        mat(pre + "attn.wq", l.wq);
        mat(pre + "attn.wk", l.wk);
        mat(pre + "attn.wv", l.wv);
        mat(pre + "attn.wo", l.wo);
        mat(pre + "ln2.g", l.ln2_g);
        mat(pre + "ln2.b", l.ln2_b);
        mat(pre + "mlp.w1", l.w1);
        mat(pre + "mlp.b1", l.b1);
        mat(pre + "mlp.w2", l.w2);
        mat(pre + "mlp.b2", l.b2);
    }
    mat("lnf.g", p.lnf_g);
    mat("lnf.b", p.lnf_b);
}
} // namespace detail

template <typename S>
template <typename F>
void ParamSet<S>::visit(F && f) {
    detail::visit_params(*this, std::forward<F>(f));
}

template <typename S>
template <typename F>
void ParamSet<S>::visit(F && f) const {
    detail::visit_params(*this, std::forward<F>(f));
}

template <typename S>
std::size_t ParamSet<S>::parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string &, const S *, int r, int c) { n += std::size_t(r) * c; });
    return n;
}

template <typename S>
template <typename T>
ParamSet<T> ParamSet<S>::cast() const {
    ParamSet<T> out = ParamSet<T>::zeros(config);
    std::vector<const S *> src;
    visit([&](const std::string &, const S * d, int, int) { src.push_back(d); });
    std::size_t i = 0;
    out.visit([&](const std::string &, T * d, int r, int c) {
        for (std::size_t j = 0; j < std::size_t(r) * c; ++j) d[j] = static_cast<T>(src[i][j]);
        ++i;
    });
    return out;
}

} // namespace swg::model
