#include "swg/model.hpp"

#include "swg/error.hpp"
#include "swg/rng.hpp"
#include "transformer_impl.hpp"

#include <cmath>
#include <sstream>

namespace swg::model {

void ModelConfig::validate() const {
    auto need = [](bool ok, const char * what) {
        if (!ok) throw InvalidArgument(std::string("model config: ") + what);
    };
    need(vocab > 0, "vocab must be positive");
    need(hidden > 0 && hidden % 2 == 0, "hidden must be positive and even");
    need(heads > 0 && hidden % heads == 0, "heads must divide hidden");
    need(layers > 0, "layers must be positive");
    need(max_seq >= 2, "max_seq must be at least 2");
    need(class_count >= 0, "class_count must be non-negative");
    need(mlp_mult > 0, "mlp_mult must be positive");
}

ModelWeights init_weights(const ModelConfig & cfg, uint64_t seed) {
    ModelWeights w = ModelWeights::zeros(cfg);
    CounterRng rng(derive_seed(seed, "init"));
    const double resid_std = 0.02 / std::sqrt(2.0 * cfg.layers);
    w.visit([&](const std::string & name, float * d, int r, int c) {
        const auto n = std::size_t(r) * c;
        const bool gain = name.ends_with(".g");
        const bool bias = name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2");
        if (gain) {
            std::fill(d, d + n, 1.0f);
        } else if (!bias) {
            const bool resid = name.ends_with("attn.wo") || name.ends_with("mlp.w2");
            const double sd = resid ? resid_std : 0.02;
            for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<float>(rng.normal() * sd);
        }
    });
    return w;
}

// ---------------------------------------------------------------- hooks

namespace {

constexpr int kSiteCount = 6;

Site parse_site(const std::string & s) {
    if (s == "q" || s == "query") return Site::Query;
    if (s == "k" || s == "key") return Site::Key;
    if (s == "v" || s == "value") return Site::Value;
    if (s == "attn" || s == "attn_out") return Site::AttnOut;
    if (s == "mlp" || s == "mlp_out") return Site::MlpOut;
    if (s == "res" || s == "residual") return Site::Residual;
    throw InvalidArgument("unknown hook site '" + s + "' (q|k|v|attn|mlp|residual)");
}

const char * site_name(Site s) {
    switch (s) {
        case Site::Query: return "q";
        case Site::Key: return "k";
        case Site::Value: return "v";
        case Site::AttnOut: return "attn";
        case Site::MlpOut: return "mlp";
        case Site::Residual: return "residual";
    }
    return "?";
}

int parse_int(const std::string & s, const std::string & ctx) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw InvalidArgument("bad layer index in hook '" + ctx + "'");
    return v;
}

} // namespace

HookSite parse_hook_site(const std::string & text) {
    const auto dot = text.find('.');
    if (dot == std::string::npos) throw InvalidArgument("hook '" + text + "' must look like <layer>.<site>");
    return HookSite{parse_int(text.substr(0, dot), text), parse_site(text.substr(dot + 1))};
}

std::vector<HookSite> parse_hook_sites(const std::string & text, int layers) {
    std::vector<HookSite> out;
    if (text.empty() || text == "none") return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item.starts_with("all.")) {
            const Site s = parse_site(item.substr(4));
            for (int l = 0; l < layers; ++l) out.push_back({l, s});
        } else {
            out.push_back(parse_hook_site(item));
        }
    }
    return out;
}

std::string to_string(const HookSite & h) { return std::to_string(h.layer) + "." + site_name(h.site); }

std::string to_string(const std::vector<HookSite> & hs) {
    if (hs.empty()) return "none";
    std::string out;
    for (const auto & h : hs) {
        if (!out.empty()) out += ",";
        out += to_string(h);
    }
    return out;
}

WeakKind parse_weak_kind(const std::string & name) {
    if (name == "spectral" || name == "swg") return WeakKind::Spectral;
    if (name == "avg" || name == "average") return WeakKind::Average;
    if (name == "prune") return WeakKind::Prune;
    throw InvalidArgument("unknown weak branch '" + name + "' (spectral|avg|prune)");
}

std::string to_string(WeakKind k) {
    switch (k) {
        case WeakKind::Spectral: return "spectral";
        case WeakKind::Average: return "avg";
        case WeakKind::Prune: return "prune";
    }
    return "?";
}

HookPlan::HookPlan(const HookConfig & hooks, const ModelConfig & cfg)
    : sites_(hooks.sites), kind_(hooks.kind), mode_(hooks.mode) {
    flags_.assign(std::size_t(cfg.layers) * kSiteCount, 0);
    pruned_.assign(cfg.layers, 0);
    for (const auto & h : sites_) {
        if (h.layer < 0 || h.layer >= cfg.layers)
            throw InvalidArgument("hook " + to_string(h) + " names a layer outside [0, " +
                                  std::to_string(cfg.layers) + ")");
        flags_[std::size_t(h.layer) * kSiteCount + int(h.site)] = 1;
        pruned_[h.layer] = 1;
    }
    if (!(mode_.epsilon > 0.0)) throw InvalidArgument("renorm epsilon must be positive");
    if (kind_ == WeakKind::Spectral && !sites_.empty())
        weakener_.emplace(hooks.mask.resized(std::size_t(cfg.hidden)), hooks.mode);
}

bool HookPlan::hooked(int layer, Site s) const {
    return kind_ != WeakKind::Prune && !flags_.empty() && flags_[std::size_t(layer) * kSiteCount + int(s)];
}

bool HookPlan::pruned(int layer) const { return kind_ == WeakKind::Prune && !pruned_.empty() && pruned_[layer]; }

void HookPlan::apply(std::span<double> row) const {
    if (kind_ == WeakKind::Spectral) {
        weakener_->apply(row);
        return;
    }
    // Channel mean broadcast: the DC-only reconstruction.
    double sum = 0.0, in2 = 0.0;
    for (double v : row) {
        sum += v;
        in2 += v * v;
    }
    const double mean = sum / double(row.size());
    double scale = 1.0;
    if (mode_.kind != spectral::RenormKind::None) {
        const double out_norm = std::abs(mean) * std::sqrt(double(row.size()));
        const double target = mode_.kind == spectral::RenormKind::UnitSpatial ? 1.0 : std::sqrt(in2);
        scale = target / (out_norm + mode_.epsilon);
    }
    for (auto & v : row) v = mean * scale;
}

// ---------------------------------------------------------------- inference

Model::Model(const ModelWeights & w) : params_(w.cast<double>()) {}

KVCache::KVCache(const ModelConfig & cfg) : layers_(cfg.layers), hidden_(cfg.hidden), max_seq_(cfg.max_seq) {
    k_.assign(layers_, std::vector<double>(std::size_t(max_seq_) * hidden_, 0.0));
    v_.assign(layers_, std::vector<double>(std::size_t(max_seq_) * hidden_, 0.0));
}

std::span<const double> KVCache::keys(int layer) const {
    return {k_.at(layer).data(), std::size_t(length_) * hidden_};
}

std::span<const double> KVCache::values(int layer) const {
    return {v_.at(layer).data(), std::size_t(length_) * hidden_};
}

std::span<double> KVCache::key_row(int layer, int pos) {
    return {k_.at(layer).data() + std::size_t(pos) * hidden_, std::size_t(hidden_)};
}

std::span<double> KVCache::value_row(int layer, int pos) {
    return {v_.at(layer).data() + std::size_t(pos) * hidden_, std::size_t(hidden_)};
}

namespace {

using RowVec = Vec<double>;

RowVec ln(const RowVec & x, const RowVec & g, const RowVec & b) {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    const double r = 1.0 / std::sqrt(var + detail::kLnEps<double>);
    return ((x.array() - mean) * r * g.array() + b.array()).matrix();
}

void maybe_hook(const HookPlan * plan, int layer, Site s, RowVec & v) {
    if (plan && plan->hooked(layer, s)) plan->apply({v.data(), std::size_t(v.size())});
}

} // namespace

std::vector<double> forward_step(const Model & m, KVCache & cache, int token, const HookPlan * hooks,
                                 ActivationTrace * trace) {
    const auto & p = m.params();
    const ModelConfig & cfg = p.config;
    const int pos = cache.length();
    if (pos >= cfg.max_seq || pos >= cache.capacity())
        throw SequenceTooLong("KV cache is full at " + std::to_string(pos) + " positions");
    if (token < 0 || token >= cfg.embed_rows())
        throw InvalidArgument("token id " + std::to_string(token) + " outside the embedding table");
    if (hooks && hooks->empty()) hooks = nullptr;

    const int c = cfg.hidden, nh = cfg.heads, hd = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(double(hd));
    if (trace) trace->residual.assign(cfg.layers, {});

    RowVec x = p.tok_emb.row(token) + p.pos_emb.row(pos);
    std::vector<double> scores(pos + 1);
    for (int l = 0; l < cfg.layers; ++l) {
        const auto & w = p.layers[l];
        const bool skip = hooks && hooks->pruned(l);
        RowVec h = ln(x, w.ln1_g, w.ln1_b);
        RowVec q = h * w.wq;
        RowVec k = h * w.wk;
        RowVec v = h * w.wv;
        maybe_hook(hooks, l, Site::Query, q);
        maybe_hook(hooks, l, Site::Key, k);
        maybe_hook(hooks, l, Site::Value, v);
        std::copy(k.data(), k.data() + c, cache.key_row(l, pos).begin());
        std::copy(v.data(), v.data() + c, cache.value_row(l, pos).begin());

        if (!skip) {
            const double * kc = cache.key_row(l, 0).data();
            const double * vc = cache.value_row(l, 0).data();
            RowVec attn = RowVec::Zero(c);
            for (int hh = 0; hh < nh; ++hh) {
                const int off = hh * hd;
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j <= pos; ++j) {
                    double s = 0.0;
                    for (int d = 0; d < hd; ++d) s += q[off + d] * kc[std::size_t(j) * c + off + d];
                    scores[j] = s * scale;
                    mx = std::max(mx, scores[j]);
                }
                double sum = 0.0;
                for (int j = 0; j <= pos; ++j) {
                    scores[j] = std::exp(scores[j] - mx);
                    sum += scores[j];
                }
                for (int j = 0; j <= pos; ++j) {
                    const double wgt = scores[j] / sum;
                    for (int d = 0; d < hd; ++d) attn[off + d] += wgt * vc[std::size_t(j) * c + off + d];
                }
            }
            RowVec o = attn * w.wo;
            maybe_hook(hooks, l, Site::AttnOut, o);
            x += o;

            RowVec h2 = ln(x, w.ln2_g, w.ln2_b);
            RowVec u = h2 * w.w1 + w.b1;
            u = u.unaryExpr([](double t) { return detail::gelu(t); });
            RowVec mo = u * w.w2 + w.b2;
            maybe_hook(hooks, l, Site::MlpOut, mo);
            x += mo;
            maybe_hook(hooks, l, Site::Residual, x);
        }
        if (trace) trace->residual[l].assign(x.data(), x.data() + c);
    }
    cache.advance();

    const RowVec hf = ln(x, p.lnf_g, p.lnf_b);
    const RowVec logits = hf * p.tok_emb.topRows(cfg.vocab).transpose();
    return {logits.data(), logits.data() + cfg.vocab};
}

std::vector<double> forward_step(const Model & m, KVCache & cache, int token, const std::vector<HookSite> & hooks,
                                 const spectral::SelectionMask & mask, const spectral::RenormMode & mode) {
    const HookPlan plan(HookConfig{hooks, mask, mode, WeakKind::Spectral}, m.config());
    return forward_step(m, cache, token, &plan);
}

std::vector<double> prefill(const Model & m, KVCache & cache, std::span<const int> tokens, const HookPlan * hooks) {
    if (tokens.empty()) throw InvalidArgument("prefill needs at least one token");
    std::vector<double> logits;
    for (int t : tokens) logits = forward_step(m, cache, t, hooks);
    return logits;
}

Mat<double> recompute_logits(const Model & m, std::span<const int> tokens) {
    const int seq = int(tokens.size());
    if (seq == 0) throw InvalidArgument("recompute_logits needs at least one token");
    if (seq > m.config().max_seq) throw SequenceTooLong("sequence longer than max_seq");
    detail::BatchActs<double> acts;
    detail::forward_batch(m.params(), tokens, 1, seq, acts);
    return acts.logits;
}

double image_nll(const Model & m, int cls_token, std::span<const int> image_tokens) {
    const ModelConfig & cfg = m.config();
    if (image_tokens.empty()) throw InvalidArgument("image_nll needs at least one image token");
    if (int(image_tokens.size()) + 2 > cfg.max_seq) throw SequenceTooLong("image longer than max_seq - 2");
    std::vector<int> seq{cfg.bos(), cls_token};
    seq.insert(seq.end(), image_tokens.begin(), image_tokens.end());
    seq.pop_back();
    const Mat<double> logits = recompute_logits(m, seq);
    double nll = 0.0;
    for (std::size_t i = 0; i < image_tokens.size(); ++i) {
        const auto row = logits.row(Eigen::Index(i) + 1);
        const double mx = row.maxCoeff();
        const double lse = mx + std::log((row.array() - mx).exp().sum());
        nll += lse - row(image_tokens[i]);
    }
    return nll / double(image_tokens.size());
}

} // namespace swg::model
