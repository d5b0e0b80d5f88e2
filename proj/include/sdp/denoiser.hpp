#pragma once

#include "sdp/common.hpp"

#include <array>
#include <cstddef>

namespace sdp {

// Noise-prediction network eps_theta(A; O, k) with a distinct diffusion level
// per trajectory position. Two architectures share one interface:
//   Unet1d — temporal conv encoder-decoder, two avg-pool stages, additive
//            skips, FiLM conditioning at every conv; horizon must divide by 4.
//   Mlp    — per-position MLP on [action, conditioning]; no horizon constraint.
// All math is fp64 with hand-written backward passes so gradients can be
// checked against finite differences exactly.

enum class ArchKind { Unet1d, Mlp };

inline std::string to_string(ArchKind a) { return a == ArchKind::Unet1d ? "unet1d" : "mlp"; }

inline ArchKind arch_from_string(const std::string& s) {
    if (s == "unet1d") return ArchKind::Unet1d;
    if (s == "mlp") return ArchKind::Mlp;
    throw std::invalid_argument("unknown architecture '" + s + "' (expected unet1d or mlp)");
}

struct DenoiserConfig {
    int action_dim = 2;   // D_a
    int obs_dim = 6;      // D_o
    int obs_len = 2;      // T_o
    int horizon = 16;     // T_p
    int width1 = 16;      // channels at full resolution
    int width2 = 32;      // channels at half/quarter resolution
    int cond_dim = 32;    // conditioning vector size
    int embed_dim = 32;   // sinusoidal level embedding size (even)
    int num_levels = 100; // N, for level validation
    ArchKind arch = ArchKind::Unet1d;

    int divisibility() const { return arch == ArchKind::Unet1d ? 4 : 1; }

    void validate() const {
        require(action_dim > 0 && obs_dim > 0 && obs_len > 0 && horizon > 0, "config: dims must be positive");
        require(width1 > 0 && width2 > 0 && cond_dim > 0 && num_levels > 0, "config: widths must be positive");
        require(embed_dim >= 2 && embed_dim % 2 == 0, "config: embed_dim must be even and >= 2");
        require(horizon % divisibility() == 0,
                "config: horizon " + std::to_string(horizon) + " must be divisible by " +
                    std::to_string(divisibility()) + " for arch " + to_string(arch));
    }
};

struct TensorSpec {
    std::string name;
    int rows = 0, cols = 0;
    std::ptrdiff_t offset = 0;
    int size() const { return rows * cols; }
};

inline std::vector<TensorSpec> parameter_specs(const DenoiserConfig& c) {
    std::vector<TensorSpec> specs;
    std::ptrdiff_t off = 0;
    auto add = [&](const std::string& name, int rows, int cols) {
        specs.push_back({name, rows, cols, off});
        off += static_cast<std::ptrdiff_t>(rows) * cols;
    };
    const int F = c.obs_len * c.obs_dim;
    add("obs_w", F, c.cond_dim);
    add("obs_b", 1, c.cond_dim);
    add("lvl_w", c.embed_dim, c.cond_dim);
    add("lvl_b", 1, c.cond_dim);
    if (c.arch == ArchKind::Unet1d) {
        auto conv = [&](const std::string& n, int cin, int cout) {
            add(n + "_w", 3 * cin, cout);
            add(n + "_b", 1, cout);
        };
        auto film = [&](const std::string& n, int w) {
            add(n + "_gw", c.cond_dim, w);
            add(n + "_gb", 1, w);
            add(n + "_bw", c.cond_dim, w);
            add(n + "_bb", 1, w);
        };
        conv("enc1", c.action_dim, c.width1);
        film("film1", c.width1);
        conv("enc2", c.width1, c.width2);
        film("film2", c.width2);
        conv("mid", c.width2, c.width2);
        film("film3", c.width2);
        conv("dec2", c.width2, c.width1);
        film("film4", c.width1);
        conv("dec1", c.width1, c.width1);
        film("film5", c.width1);
        add("head_w", c.width1, c.action_dim);
        add("head_b", 1, c.action_dim);
    } else {
        add("mlp1_w", c.action_dim + c.cond_dim, c.width1);
        add("mlp1_b", 1, c.width1);
        add("mlp2_w", c.width1, c.width2);
        add("mlp2_b", 1, c.width2);
        add("head_w", c.width2, c.action_dim);
        add("head_b", 1, c.action_dim);
    }
    return specs;
}

inline int parameter_count(const DenoiserConfig& c) {
    int total = 0;
    for (const auto& s : parameter_specs(c)) total += s.size();
    return total;
}

struct ParameterSet {
    DenoiserConfig config;
    std::vector<TensorSpec> specs;
    Vec values;
    int version = 1;

    Eigen::Map<const Mat> view(std::size_t idx) const {
        const auto& s = specs[idx];
        return {values.data() + s.offset, s.rows, s.cols};
    }
    Eigen::Map<Mat> view(std::size_t idx) {
        const auto& s = specs[idx];
        return {values.data() + s.offset, s.rows, s.cols};
    }
    int total() const { return static_cast<int>(values.size()); }
};

// Uniform +-1/sqrt(fan_in) weights, zero biases, zero output head: the fresh
// network predicts exactly zero, so the initial denoising loss sits at the
// unit-Gaussian second moment.
inline ParameterSet init_params(const DenoiserConfig& config, Rng& rng) {
    config.validate();
    ParameterSet p;
    p.config = config;
    p.specs = parameter_specs(config);
    int total = 0;
    for (const auto& s : p.specs) total += s.size();
    p.values = Vec::Zero(total);
    for (std::size_t i = 0; i < p.specs.size(); ++i) {
        const auto& s = p.specs[i];
        const bool is_bias = s.rows == 1;
        const bool is_head = s.name.rfind("head", 0) == 0;
        if (is_bias || is_head) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
        auto m = p.view(i);
        for (int cc = 0; cc < s.cols; ++cc)
            for (int r = 0; r < s.rows; ++r) m(r, cc) = (2.0 * rng.uniform01() - 1.0) * bound;
    }
    return p;
}

// Transformer-style sinusoidal embedding of an integer level.
inline Mat level_embedding(const LevelVector& k, int embed_dim) {
    const int half = embed_dim / 2;
    Mat emb(static_cast<int>(k.size()), embed_dim);
    for (int i = 0; i < static_cast<int>(k.size()); ++i) {
        for (int j = 0; j < half; ++j) {
            const double omega = std::exp(-std::log(10000.0) * j / half);
            const double arg = k[static_cast<std::size_t>(i)] * omega;
            emb(i, 2 * j) = std::sin(arg);
            emb(i, 2 * j + 1) = std::cos(arg);
        }
    }
    return emb;
}

namespace detail {

inline Mat silu(const Mat& x) { return (x.array() / (1.0 + (-x.array()).exp())).matrix(); }

inline Mat silu_grad(const Mat& x) {
    const auto sig = 1.0 / (1.0 + (-x.array()).exp());
    return (sig * (1.0 + x.array() * (1.0 - sig))).matrix();
}

// "Same" 1-D convolution along rows, kernel 3, zero padding, expressed as
// three GEMMs on shifted copies.
inline Mat shift_down(const Mat& x) {  // row t <- row t-1
    Mat out = Mat::Zero(x.rows(), x.cols());
    if (x.rows() > 1) out.bottomRows(x.rows() - 1) = x.topRows(x.rows() - 1);
    return out;
}

inline Mat shift_up(const Mat& x) {  // row t <- row t+1
    Mat out = Mat::Zero(x.rows(), x.cols());
    if (x.rows() > 1) out.topRows(x.rows() - 1) = x.bottomRows(x.rows() - 1);
    return out;
}

inline Mat conv3(const Mat& x, const Eigen::Map<const Mat>& w, const Eigen::Map<const Mat>& b) {
    const int cin = static_cast<int>(x.cols());
    Mat y = shift_down(x) * w.topRows(cin) + x * w.middleRows(cin, cin) + shift_up(x) * w.bottomRows(cin);
    y.rowwise() += b.row(0);
    return y;
}

struct ConvGrads {
    Mat dw;  // 3*cin x cout
    Mat db;  // 1 x cout
    Mat dx;
};

inline ConvGrads conv3_backward(const Mat& x, const Eigen::Map<const Mat>& w, const Mat& dy) {
    const int cin = static_cast<int>(x.cols());
    ConvGrads g;
    g.dw.resize(3 * cin, dy.cols());
    g.dw.topRows(cin) = shift_down(x).transpose() * dy;
    g.dw.middleRows(cin, cin) = x.transpose() * dy;
    g.dw.bottomRows(cin) = shift_up(x).transpose() * dy;
    g.db = dy.colwise().sum();
    g.dx = shift_up(dy * w.topRows(cin).transpose()) + dy * w.middleRows(cin, cin).transpose() +
           shift_down(dy * w.bottomRows(cin).transpose());
    return g;
}

inline Mat avgpool2(const Mat& x) {
    Mat out(x.rows() / 2, x.cols());
    for (int r = 0; r < out.rows(); ++r) out.row(r) = 0.5 * (x.row(2 * r) + x.row(2 * r + 1));
    return out;
}

inline Mat avgpool2_backward(const Mat& dp, Eigen::Index rows_out) {
    Mat dx(rows_out, dp.cols());
    for (int r = 0; r < dp.rows(); ++r) {
        dx.row(2 * r) = 0.5 * dp.row(r);
        dx.row(2 * r + 1) = 0.5 * dp.row(r);
    }
    return dx;
}

inline Mat upsample2(const Mat& x) {
    Mat out(x.rows() * 2, x.cols());
    for (int r = 0; r < x.rows(); ++r) {
        out.row(2 * r) = x.row(r);
        out.row(2 * r + 1) = x.row(r);
    }
    return out;
}

inline Mat upsample2_backward(const Mat& du) {
    Mat dx(du.rows() / 2, du.cols());
    for (int r = 0; r < dx.rows(); ++r) dx.row(r) = du.row(2 * r) + du.row(2 * r + 1);
    return dx;
}

}  // namespace detail

// Everything forward computes that backward reuses. One conv/FiLM/SiLU block
// caches its input, pre-FiLM output, gamma, and pre-activation.
struct Workspace {
    Mat a, obs_flat, emb;
    Mat obs_pre, lvl_pre;
    Mat cond0, cond1, cond2;
    struct Stage {
        Mat in, pre, gamma, film;
    };
    std::array<Stage, 5> stage;  // enc1, enc2, mid, dec2, dec1 (or mlp1, mlp2)
    Mat e1, e2, d2, d1;          // post-activation outputs needed for skips/head
    Mat head_in;
};

inline Mat forward(const ParameterSet& p, const Mat& a_noisy, const Mat& obs, const LevelVector& k,
                   Workspace& ws) {
    const auto& c = p.config;
    require(a_noisy.rows() == c.horizon && a_noisy.cols() == c.action_dim,
            "forward: actions must be horizon x action_dim");
    require(obs.rows() == c.obs_len && obs.cols() == c.obs_dim, "forward: obs must be obs_len x obs_dim");
    require(static_cast<int>(k.size()) == c.horizon, "forward: one level per horizon position required");
    for (int kv : k)
        require(kv >= 0 && kv <= c.num_levels, "forward: level " + std::to_string(kv) + " outside [0, N]");

    using namespace detail;
    std::size_t idx = 0;
    auto next = [&] { return p.view(idx++); };
    const auto obs_w = next(), obs_b = next(), lvl_w = next(), lvl_b = next();

    ws.a = a_noisy;
    ws.emb = level_embedding(k, c.embed_dim);
    ws.obs_flat.resize(1, c.obs_len * c.obs_dim);
    for (int t = 0; t < c.obs_len; ++t) ws.obs_flat.block(0, t * c.obs_dim, 1, c.obs_dim) = obs.row(t);

    ws.obs_pre = ws.obs_flat * obs_w + obs_b;
    ws.lvl_pre = ws.emb * lvl_w;
    ws.lvl_pre.rowwise() += lvl_b.row(0);
    ws.cond0 = silu(ws.lvl_pre);
    ws.cond0.rowwise() += silu(ws.obs_pre).row(0);

    if (c.arch == ArchKind::Mlp) {
        const auto w1 = next(), b1 = next(), w2 = next(), b2 = next(), hw = next(), hb = next();
        auto& s1 = ws.stage[0];
        s1.in.resize(c.horizon, c.action_dim + c.cond_dim);
        s1.in << ws.a, ws.cond0;
        s1.pre = s1.in * w1;
        s1.pre.rowwise() += b1.row(0);
        ws.d2 = silu(s1.pre);
        auto& s2 = ws.stage[1];
        s2.in = ws.d2;
        s2.pre = s2.in * w2;
        s2.pre.rowwise() += b2.row(0);
        ws.head_in = silu(s2.pre);
        Mat eps = ws.head_in * hw;
        eps.rowwise() += hb.row(0);
        return eps;
    }

    ws.cond1 = avgpool2(ws.cond0);
    ws.cond2 = avgpool2(ws.cond1);

    auto block = [&](Workspace::Stage& st, const Mat& in, const Mat& cond) {
        const auto cw = next(), cb = next(), gw = next(), gb = next(), bw = next(), bb = next();
        st.in = in;
        st.pre = conv3(in, cw, cb);
        st.gamma = cond * gw;
        st.gamma.rowwise() += gb.row(0);
        Mat beta = cond * bw;
        beta.rowwise() += bb.row(0);
        st.film = ((1.0 + st.gamma.array()) * st.pre.array()).matrix() + beta;
        return silu(st.film);
    };

    ws.e1 = block(ws.stage[0], ws.a, ws.cond0);
    Mat p1 = avgpool2(ws.e1);
    ws.e2 = block(ws.stage[1], p1, ws.cond1);
    Mat p2 = avgpool2(ws.e2);
    Mat mid = block(ws.stage[2], p2, ws.cond2);
    Mat u2 = upsample2(mid) + ws.e2;
    ws.d2 = block(ws.stage[3], u2, ws.cond1);
    Mat u1 = upsample2(ws.d2) + ws.e1;
    ws.d1 = block(ws.stage[4], u1, ws.cond0);
    ws.head_in = ws.d1;

    const auto hw = next(), hb = next();
    Mat eps = ws.head_in * hw;
    eps.rowwise() += hb.row(0);
    return eps;
}

inline Mat forward(const ParameterSet& p, const Mat& a_noisy, const Mat& obs, const LevelVector& k) {
    Workspace ws;
    return forward(p, a_noisy, obs, k, ws);
}

// Gradient of a scalar loss w.r.t. every parameter, given dL/d(eps_hat).
// Mirrors forward exactly; see the stage cache layout in Workspace.
inline Vec backward(const ParameterSet& p, const Workspace& ws, const Mat& grad_eps) {
    const auto& c = p.config;
    require(grad_eps.rows() == c.horizon && grad_eps.cols() == c.action_dim,
            "backward: upstream gradient must match eps_hat shape");

    using namespace detail;
    Vec grad = Vec::Zero(p.values.size());
    auto gview = [&](std::size_t idx) {
        const auto& s = p.specs[idx];
        return Eigen::Map<Mat>(grad.data() + s.offset, s.rows, s.cols);
    };

    Mat dcond0;

    if (c.arch == ArchKind::Mlp) {
        const auto hw = p.view(8);
        gview(9).row(0) = grad_eps.colwise().sum();         // head_b
        gview(8) = ws.head_in.transpose() * grad_eps;       // head_w
        Mat dh2 = grad_eps * hw.transpose();

        Mat dz2 = (dh2.array() * silu_grad(ws.stage[1].pre).array()).matrix();
        gview(7).row(0) = dz2.colwise().sum();              // mlp2_b
        gview(6) = ws.stage[1].in.transpose() * dz2;        // mlp2_w
        Mat dh1 = dz2 * p.view(6).transpose();

        Mat dz1 = (dh1.array() * silu_grad(ws.stage[0].pre).array()).matrix();
        gview(5).row(0) = dz1.colwise().sum();              // mlp1_b
        gview(4) = ws.stage[0].in.transpose() * dz1;        // mlp1_w
        Mat din = dz1 * p.view(4).transpose();
        dcond0 = din.rightCols(c.cond_dim);
    } else {
        // parameter indices: 4 shared + 6 per block * 5 blocks + head at 34/35
        auto block_backward = [&](int b, const Workspace::Stage& st, const Mat& cond, const Mat& dout,
                                  Mat& dcond_acc) {
            const std::size_t base = 4 + 6 * static_cast<std::size_t>(b);
            Mat dfilm = (dout.array() * silu_grad(st.film).array()).matrix();
            Mat dpre = ((1.0 + st.gamma.array()) * dfilm.array()).matrix();
            Mat dgamma = (dfilm.array() * st.pre.array()).matrix();
            gview(base + 2) = cond.transpose() * dgamma;      // gw
            gview(base + 3).row(0) = dgamma.colwise().sum();  // gb
            gview(base + 4) = cond.transpose() * dfilm;       // bw
            gview(base + 5).row(0) = dfilm.colwise().sum();   // bb
            dcond_acc += dgamma * p.view(base + 2).transpose() + dfilm * p.view(base + 4).transpose();
            ConvGrads cg = conv3_backward(st.in, p.view(base), dpre);
            gview(base) = cg.dw;
            gview(base + 1) = cg.db;
            return cg.dx;
        };

        dcond0 = Mat::Zero(ws.cond0.rows(), ws.cond0.cols());
        Mat dcond1 = Mat::Zero(ws.cond1.rows(), ws.cond1.cols());
        Mat dcond2 = Mat::Zero(ws.cond2.rows(), ws.cond2.cols());

        const auto hw = p.view(34);
        gview(35).row(0) = grad_eps.colwise().sum();
        gview(34) = ws.head_in.transpose() * grad_eps;
        Mat dd1 = grad_eps * hw.transpose();

        Mat du1 = block_backward(4, ws.stage[4], ws.cond0, dd1, dcond0);
        Mat de1 = du1;
        Mat dd2 = upsample2_backward(du1);

        Mat du2 = block_backward(3, ws.stage[3], ws.cond1, dd2, dcond1);
        Mat de2 = du2;
        Mat dmid = upsample2_backward(du2);

        Mat dp2 = block_backward(2, ws.stage[2], ws.cond2, dmid, dcond2);
        de2 += avgpool2_backward(dp2, ws.e2.rows());

        Mat dp1 = block_backward(1, ws.stage[1], ws.cond1, de2, dcond1);
        de1 += avgpool2_backward(dp1, ws.e1.rows());

        block_backward(0, ws.stage[0], ws.cond0, de1, dcond0);

        dcond1 += avgpool2_backward(dcond2, ws.cond1.rows());
        dcond0 += avgpool2_backward(dcond1, ws.cond0.rows());
    }

    Mat dobs_ctx = dcond0.colwise().sum();
    Mat dlvl_pre = (dcond0.array() * silu_grad(ws.lvl_pre).array()).matrix();
    gview(2) = ws.emb.transpose() * dlvl_pre;      // lvl_w
    gview(3).row(0) = dlvl_pre.colwise().sum();    // lvl_b
    Mat dobs_pre = (dobs_ctx.array() * silu_grad(ws.obs_pre).array()).matrix();
    gview(0) = ws.obs_flat.transpose() * dobs_pre;  // obs_w
    gview(1).row(0) = dobs_pre.row(0);              // obs_b
    return grad;
}

}  // namespace sdp
