#pragma once

// Batched causal forward/backward over B sequences of length T, templated on
// the scalar so training runs in float and the recompute oracle in double.

#include "swg/model.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace swg::model::detail {

template <typename S>
constexpr S kGeluK = S(0.7978845608028654);  // sqrt(2/pi)
template <typename S>
constexpr S kGeluC = S(0.044715);
template <typename S>
constexpr S kLnEps = S(1e-5);

template <typename S>
inline S gelu(S u) {
    const S t = std::tanh(kGeluK<S> * (u + kGeluC<S> * u * u * u));
    return S(0.5) * u * (S(1) + t);
}

template <typename S>
inline S gelu_grad(S u) {
    const S t = std::tanh(kGeluK<S> * (u + kGeluC<S> * u * u * u));
    return S(0.5) * (S(1) + t) + S(0.5) * u * (S(1) - t * t) * kGeluK<S> * (S(1) + S(3) * kGeluC<S> * u * u);
}

// out = LN(x) * g + b, row-wise. Saves normalized rows and 1/std for backward.
template <typename S>
void layer_norm(const Mat<S> & x, const Vec<S> & g, const Vec<S> & b, Mat<S> & out, Mat<S> * xhat,
                std::vector<S> * rstd) {
    const Eigen::Index n = x.rows(), c = x.cols();
    out.resize(n, c);
    if (xhat) xhat->resize(n, c);
    if (rstd) rstd->resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const S mean = x.row(i).mean();
        const S var = (x.row(i).array() - mean).square().mean();
        const S r = S(1) / std::sqrt(var + kLnEps<S>);
        auto h = ((x.row(i).array() - mean) * r).matrix();
        if (xhat) xhat->row(i) = h;
        if (rstd) (*rstd)[i] = r;
        out.row(i) = (h.array() * g.array() + b.array()).matrix();
    }
}

template <typename S>
void layer_norm_backward(const Mat<S> & dy, const Mat<S> & xhat, const std::vector<S> & rstd, const Vec<S> & g,
                         Mat<S> & dx, Vec<S> & dg, Vec<S> & db) {
    const Eigen::Index n = dy.rows(), c = dy.cols();
    dg += (dy.array() * xhat.array()).colwise().sum().matrix();
    db += dy.colwise().sum();
    dx.resize(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto dxh = (dy.row(i).array() * g.array()).eval();
        const S m1 = dxh.mean();
        const S m2 = (dxh * xhat.row(i).array()).mean();
        dx.row(i) = (rstd[i] * (dxh - m1 - xhat.row(i).array() * m2)).matrix();
    }
}

template <typename S>
struct LayerActs {
    Mat<S> h1, h1hat;
    std::vector<S> r1;
    Mat<S> q, k, v;
    std::vector<Mat<S>> probs;  // B*heads matrices of [T, T]
    Mat<S> attn;                // concatenated head outputs
    Mat<S> h2, h2hat;
    std::vector<S> r2;
    Mat<S> u, tanh_u, gact;
};

template <typename S>
struct BatchActs {
    int batch = 0, seq = 0;
    std::vector<int> tokens;
    std::vector<LayerActs<S>> layers;
    Mat<S> x_final, hf, hfhat;
    std::vector<S> rf;
    Mat<S> logits;
    Mat<S> dlogits;  // filled by the loss
};

// tokens: batch*seq ids, row-major by sequence.
template <typename S>
void forward_batch(const ParamSet<S> & p, std::span<const int> tokens, int batch, int seq, BatchActs<S> & a) {
    const ModelConfig & cfg = p.config;
    const int c = cfg.hidden, nh = cfg.heads, hd = cfg.head_dim();
    const Eigen::Index n = Eigen::Index(batch) * seq;
    a.batch = batch;
    a.seq = seq;
    a.tokens.assign(tokens.begin(), tokens.end());
    a.layers.resize(cfg.layers);

    Mat<S> x(n, c);
    for (int b = 0; b < batch; ++b)
        for (int t = 0; t < seq; ++t) {
            const Eigen::Index r = Eigen::Index(b) * seq + t;
            x.row(r) = p.tok_emb.row(tokens[r]) + p.pos_emb.row(t);
        }

    const S scale = S(1) / std::sqrt(S(hd));
    for (int l = 0; l < cfg.layers; ++l) {
        const auto & w = p.layers[l];
        auto & s = a.layers[l];
        layer_norm(x, w.ln1_g, w.ln1_b, s.h1, &s.h1hat, &s.r1);
        s.q.noalias() = s.h1 * w.wq;
        s.k.noalias() = s.h1 * w.wk;
        s.v.noalias() = s.h1 * w.wv;
        s.attn.resize(n, c);
        s.probs.resize(std::size_t(batch) * nh);
        for (int b = 0; b < batch; ++b) {
            const Eigen::Index r0 = Eigen::Index(b) * seq;
            for (int h = 0; h < nh; ++h) {
                auto qh = s.q.block(r0, h * hd, seq, hd);
                auto kh = s.k.block(r0, h * hd, seq, hd);
                auto vh = s.v.block(r0, h * hd, seq, hd);
                Mat<S> & pm = s.probs[std::size_t(b) * nh + h];
                pm.noalias() = qh * kh.transpose();
                for (int i = 0; i < seq; ++i) {
                    S mx = -std::numeric_limits<S>::infinity();
                    for (int j = 0; j <= i; ++j) {
                        pm(i, j) *= scale;
                        mx = std::max(mx, pm(i, j));
                    }
                    S sum = 0;
                    for (int j = 0; j <= i; ++j) {
                        pm(i, j) = std::exp(pm(i, j) - mx);
                        sum += pm(i, j);
                    }
                    for (int j = 0; j <= i; ++j) pm(i, j) /= sum;
                    for (int j = i + 1; j < seq; ++j) pm(i, j) = 0;
                }
                s.attn.block(r0, h * hd, seq, hd).noalias() = pm * vh;
            }
        }
        x.noalias() += s.attn * w.wo;
        layer_norm(x, w.ln2_g, w.ln2_b, s.h2, &s.h2hat, &s.r2);
        s.u.noalias() = s.h2 * w.w1;
        s.u.rowwise() += w.b1;
        s.tanh_u = (kGeluK<S> * (s.u.array() + kGeluC<S> * s.u.array().cube())).tanh().matrix();
        s.gact = (S(0.5) * s.u.array() * (S(1) + s.tanh_u.array())).matrix();
        x.noalias() += s.gact * w.w2;
        x.rowwise() += w.b2;
    }
    a.x_final = x;
    layer_norm(x, p.lnf_g, p.lnf_b, a.hf, &a.hfhat, &a.rf);
    a.logits.noalias() = a.hf * p.tok_emb.topRows(cfg.vocab).transpose();
}

// Mean cross-entropy over rows whose target is >= 0; also sets a.dlogits.
template <typename S>
S cross_entropy(BatchActs<S> & a, std::span<const int> targets) {
    const Eigen::Index n = a.logits.rows(), v = a.logits.cols();
    a.dlogits.setZero(n, v);
    int count = 0;
    for (Eigen::Index r = 0; r < n; ++r)
        if (targets[r] >= 0) ++count;
    if (count == 0) return S(0);
    double loss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        if (targets[r] < 0) continue;
        const S mx = a.logits.row(r).maxCoeff();
        const auto e = (a.logits.row(r).array() - mx).exp().eval();
        const S sum = e.sum();
        loss += double(std::log(sum) + mx - a.logits(r, targets[r]));
        a.dlogits.row(r) = (e / (sum * S(count))).matrix();
        a.dlogits(r, targets[r]) -= S(1) / S(count);
    }
    return S(loss / count);
}

// Accumulates into `g` (same shapes as p). Requires cross_entropy first.
template <typename S>
void backward_batch(const ParamSet<S> & p, const BatchActs<S> & a, ParamSet<S> & g) {
    const ModelConfig & cfg = p.config;
    const int nh = cfg.heads, hd = cfg.head_dim();
    const int batch = a.batch, seq = a.seq;
    const S scale = S(1) / std::sqrt(S(hd));

    Mat<S> dhf = a.dlogits * p.tok_emb.topRows(cfg.vocab);
    g.tok_emb.topRows(cfg.vocab).noalias() += a.dlogits.transpose() * a.hf;
    Mat<S> dx;
    layer_norm_backward(dhf, a.hfhat, a.rf, p.lnf_g, dx, g.lnf_g, g.lnf_b);

    for (int l = cfg.layers - 1; l >= 0; --l) {
        const auto & w = p.layers[l];
        const auto & s = a.layers[l];
        auto & gw = g.layers[l];

        // MLP
        gw.w2.noalias() += s.gact.transpose() * dx;
        gw.b2 += dx.colwise().sum();
        Mat<S> du = dx * w.w2.transpose();
        {
            const auto u = s.u.array();
            const auto t = s.tanh_u.array();
            du.array() *= S(0.5) * (S(1) + t) +
                          S(0.5) * u * (S(1) - t * t) * kGeluK<S> * (S(1) + S(3) * kGeluC<S> * u.square());
        }
        gw.w1.noalias() += s.h2.transpose() * du;
        gw.b1 += du.colwise().sum();
        Mat<S> dh2 = du * w.w1.transpose();
        Mat<S> dln2;
        layer_norm_backward(dh2, s.h2hat, s.r2, w.ln2_g, dln2, gw.ln2_g, gw.ln2_b);
        dx += dln2;

        // attention
        gw.wo.noalias() += s.attn.transpose() * dx;
        Mat<S> dattn = dx * w.wo.transpose();
        Mat<S> dq(dx.rows(), dx.cols()), dk(dx.rows(), dx.cols()), dv(dx.rows(), dx.cols());
        for (int b = 0; b < batch; ++b) {
            const Eigen::Index r0 = Eigen::Index(b) * seq;
            for (int h = 0; h < nh; ++h) {
                const Mat<S> & pm = s.probs[std::size_t(b) * nh + h];
                auto qh = s.q.block(r0, h * hd, seq, hd);
                auto kh = s.k.block(r0, h * hd, seq, hd);
                auto vh = s.v.block(r0, h * hd, seq, hd);
                auto dah = dattn.block(r0, h * hd, seq, hd);
                Mat<S> dp = dah * vh.transpose();
                dv.block(r0, h * hd, seq, hd).noalias() = pm.transpose() * dah;
                const auto rowdot = (dp.array() * pm.array()).rowwise().sum().eval();
                Mat<S> ds = (pm.array() * (dp.array().colwise() - rowdot)).matrix() * scale;
                dq.block(r0, h * hd, seq, hd).noalias() = ds * kh;
                dk.block(r0, h * hd, seq, hd).noalias() = ds.transpose() * qh;
            }
        }
        gw.wq.noalias() += s.h1.transpose() * dq;
        gw.wk.noalias() += s.h1.transpose() * dk;
        gw.wv.noalias() += s.h1.transpose() * dv;
        Mat<S> dh1 = dq * w.wq.transpose();
        dh1.noalias() += dk * w.wk.transpose();
        dh1.noalias() += dv * w.wv.transpose();
        Mat<S> dln1;
        layer_norm_backward(dh1, s.h1hat, s.r1, w.ln1_g, dln1, gw.ln1_g, gw.ln1_b);
        dx += dln1;
    }

    for (int b = 0; b < batch; ++b)
        for (int t = 0; t < seq; ++t) {
            const Eigen::Index r = Eigen::Index(b) * seq + t;
            g.tok_emb.row(a.tokens[r]) += dx.row(r);
            g.pos_emb.row(t) += dx.row(r);
        }
}

} // namespace swg::model::detail
