#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uamil/errors.hpp"
#include "uamil/matrix.hpp"
#include "uamil/rng.hpp"

namespace uamil {

// Instance feature encoder. An M x W window passes through two 1-D
// convolutions over time ("same" zero padding, ReLU), then two branches
// summarize the 32 x W activation map: global average pooling over time and
// the final hidden state of a gated recurrent (update/reset) pass. The
// concatenated 64 values project to the d-dimensional feature.
//
// Everything is double precision with fixed summation order, so results are
// reproducible bit for bit and gradients can be checked against central
// finite differences at tight tolerances.

inline constexpr std::size_t kConv1Filters = 32;
inline constexpr std::size_t kConv1Width = 8;
inline constexpr std::size_t kConv2Filters = 32;
inline constexpr std::size_t kConv2Width = 5;
inline constexpr std::size_t kGruHidden = 32;
inline constexpr std::size_t kConcatDim = kConv2Filters + kGruHidden;

class EncoderParams {
public:
    EncoderParams(std::size_t in_channels, std::size_t feature_dim)
        : m_(in_channels), d_(feature_dim), data_(param_count(in_channels, feature_dim), 0.0) {
        if (m_ == 0 || d_ == 0) throw ConfigError("encoder: zero-sized dimensions");
    }

    static std::size_t param_count(std::size_t m, std::size_t d) {
        const std::size_t conv1 = kConv1Filters * m * kConv1Width + kConv1Filters;
        const std::size_t conv2 = kConv2Filters * kConv1Filters * kConv2Width + kConv2Filters;
        const std::size_t gru = 3 * (kGruHidden * kConv2Filters + kGruHidden * kGruHidden + kGruHidden);
        const std::size_t proj = d * kConcatDim + d;
        return conv1 + conv2 + gru + proj;
    }

    std::size_t in_channels() const { return m_; }
    std::size_t feature_dim() const { return d_; }
    std::size_t size() const { return data_.size(); }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    // Named views into the flat parameter vector, in layout order.
    std::span<double> conv1_w() { return view(0, kConv1Filters * m_ * kConv1Width); }
    std::span<double> conv1_b() { return view(off_conv1_b(), kConv1Filters); }
    std::span<double> conv2_w() { return view(off_conv2_w(), kConv2Filters * kConv1Filters * kConv2Width); }
    std::span<double> conv2_b() { return view(off_conv2_b(), kConv2Filters); }
    std::span<double> gru_wz() { return view(off_gru(0), kGruHidden * kConv2Filters); }
    std::span<double> gru_wr() { return view(off_gru(1), kGruHidden * kConv2Filters); }
    std::span<double> gru_wn() { return view(off_gru(2), kGruHidden * kConv2Filters); }
    std::span<double> gru_uz() { return view(off_gru_u(0), kGruHidden * kGruHidden); }
    std::span<double> gru_ur() { return view(off_gru_u(1), kGruHidden * kGruHidden); }
    std::span<double> gru_un() { return view(off_gru_u(2), kGruHidden * kGruHidden); }
    std::span<double> gru_bz() { return view(off_gru_b(0), kGruHidden); }
    std::span<double> gru_br() { return view(off_gru_b(1), kGruHidden); }
    std::span<double> gru_bn() { return view(off_gru_b(2), kGruHidden); }
    std::span<double> proj_w() { return view(off_proj_w(), d_ * kConcatDim); }
    std::span<double> proj_b() { return view(off_proj_w() + d_ * kConcatDim, d_); }

    std::span<const double> conv1_w() const { return cview(0, kConv1Filters * m_ * kConv1Width); }
    std::span<const double> conv1_b() const { return cview(off_conv1_b(), kConv1Filters); }
    std::span<const double> conv2_w() const { return cview(off_conv2_w(), kConv2Filters * kConv1Filters * kConv2Width); }
    std::span<const double> conv2_b() const { return cview(off_conv2_b(), kConv2Filters); }
    std::span<const double> gru_wz() const { return cview(off_gru(0), kGruHidden * kConv2Filters); }
    std::span<const double> gru_wr() const { return cview(off_gru(1), kGruHidden * kConv2Filters); }
    std::span<const double> gru_wn() const { return cview(off_gru(2), kGruHidden * kConv2Filters); }
    std::span<const double> gru_uz() const { return cview(off_gru_u(0), kGruHidden * kGruHidden); }
    std::span<const double> gru_ur() const { return cview(off_gru_u(1), kGruHidden * kGruHidden); }
    std::span<const double> gru_un() const { return cview(off_gru_u(2), kGruHidden * kGruHidden); }
    std::span<const double> gru_bz() const { return cview(off_gru_b(0), kGruHidden); }
    std::span<const double> gru_br() const { return cview(off_gru_b(1), kGruHidden); }
    std::span<const double> gru_bn() const { return cview(off_gru_b(2), kGruHidden); }
    std::span<const double> proj_w() const { return cview(off_proj_w(), d_ * kConcatDim); }
    std::span<const double> proj_b() const { return cview(off_proj_w() + d_ * kConcatDim, d_); }

    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor, drawn
    /// in layout order from the supplied RNG.
    void init_uniform(DetRng& rng) {
        const double b_conv1 = 1.0 / std::sqrt(static_cast<double>(m_ * kConv1Width));
        const double b_conv2 = 1.0 / std::sqrt(static_cast<double>(kConv1Filters * kConv2Width));
        const double b_gru = 1.0 / std::sqrt(static_cast<double>(kGruHidden));
        const double b_proj = 1.0 / std::sqrt(static_cast<double>(kConcatDim));
        fill_uniform(conv1_w(), rng, b_conv1);
        fill_uniform(conv1_b(), rng, b_conv1);
        fill_uniform(conv2_w(), rng, b_conv2);
        fill_uniform(conv2_b(), rng, b_conv2);
        for (auto s : {gru_wz(), gru_wr(), gru_wn(), gru_uz(), gru_ur(), gru_un(),
                       gru_bz(), gru_br(), gru_bn()})
            fill_uniform(s, rng, b_gru);
        fill_uniform(proj_w(), rng, b_proj);
        fill_uniform(proj_b(), rng, b_proj);
    }

    std::string describe() const {
        auto line = [](const std::string& name, std::size_t n) {
            return name + ": " + std::to_string(n) + "\n";
        };
        std::string out;
        out += line("conv1 (w+b)", kConv1Filters * m_ * kConv1Width + kConv1Filters);
        out += line("conv2 (w+b)", kConv2Filters * kConv1Filters * kConv2Width + kConv2Filters);
        out += line("recurrent cell", 3 * (kGruHidden * kConv2Filters + kGruHidden * kGruHidden + kGruHidden));
        out += line("projection (w+b)", d_ * kConcatDim + d_);
        out += line("total", size());
        return out;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;

private:
    std::size_t off_conv1_b() const { return kConv1Filters * m_ * kConv1Width; }
    std::size_t off_conv2_w() const { return off_conv1_b() + kConv1Filters; }
    std::size_t off_conv2_b() const { return off_conv2_w() + kConv2Filters * kConv1Filters * kConv2Width; }
    std::size_t off_gru(int which) const {
        return off_conv2_b() + kConv2Filters + static_cast<std::size_t>(which) * kGruHidden * kConv2Filters;
    }
    std::size_t off_gru_u(int which) const {
        return off_gru(3) + static_cast<std::size_t>(which) * kGruHidden * kGruHidden;
    }
    std::size_t off_gru_b(int which) const {
        return off_gru_u(3) + static_cast<std::size_t>(which) * kGruHidden;
    }
    std::size_t off_proj_w() const { return off_gru_b(3); }

    std::span<double> view(std::size_t off, std::size_t len) {
        return {data_.data() + off, len};
    }
    std::span<const double> cview(std::size_t off, std::size_t len) const {
        return {data_.data() + off, len};
    }
    static void fill_uniform(std::span<double> s, DetRng& rng, double bound) {
        for (double& v : s) v = (2.0 * rng.uniform() - 1.0) * bound;
    }

    std::size_t m_;
    std::size_t d_;
    std::vector<double> data_;
};

using FeatureVector = std::vector<double>;

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// 1-D convolution over time with "same" zero padding
/// (pad_left = (k - 1) / 2, remainder on the right). The kernel offset is
/// the outer loop so the inner accumulation runs over a contiguous valid
/// range with no per-sample bounds check.
inline void conv1d_same(const double* in, std::size_t cin, std::size_t w,
                        std::span<const double> kernel, std::span<const double> bias,
                        std::size_t cout, std::size_t kw, double* out) {
    const auto pad = static_cast<std::ptrdiff_t>((kw - 1) / 2);
    const auto wi = static_cast<std::ptrdiff_t>(w);
    for (std::size_t f = 0; f < cout; ++f) {
        double* orow = out + f * w;
        for (std::size_t t = 0; t < w; ++t) orow[t] = bias[f];
        for (std::size_t c = 0; c < cin; ++c) {
            const double* krow = kernel.data() + (f * cin + c) * kw;
            const double* irow = in + c * w;
            for (std::size_t i = 0; i < kw; ++i) {
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(i) - pad;
                const std::ptrdiff_t t_begin = std::max<std::ptrdiff_t>(0, -shift);
                const std::ptrdiff_t t_end = std::min<std::ptrdiff_t>(wi, wi - shift);
                const double kv = krow[i];
                for (std::ptrdiff_t t = t_begin; t < t_end; ++t) orow[t] += kv * irow[t + shift];
            }
        }
    }
}

/// Reverse pass of conv1d_same: accumulates kernel/bias gradients and, when
/// g_in is non-null, the gradient into the input.
inline void conv1d_same_backward(const double* in, std::size_t cin, std::size_t w,
                                 std::span<const double> kernel, std::size_t cout, std::size_t kw,
                                 const double* g_out, std::span<double> g_kernel,
                                 std::span<double> g_bias, double* g_in) {
    const auto pad = static_cast<std::ptrdiff_t>((kw - 1) / 2);
    const auto wi = static_cast<std::ptrdiff_t>(w);
    for (std::size_t f = 0; f < cout; ++f) {
        const double* grow = g_out + f * w;
        double bias_acc = 0.0;
        for (std::size_t t = 0; t < w; ++t) bias_acc += grow[t];
        g_bias[f] += bias_acc;
        for (std::size_t c = 0; c < cin; ++c) {
            const double* irow = in + c * w;
            double* girow = g_in ? g_in + c * w : nullptr;
            for (std::size_t i = 0; i < kw; ++i) {
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(i) - pad;
                const std::ptrdiff_t t_begin = std::max<std::ptrdiff_t>(0, -shift);
                const std::ptrdiff_t t_end = std::min<std::ptrdiff_t>(wi, wi - shift);
                double k_acc = 0.0;
                for (std::ptrdiff_t t = t_begin; t < t_end; ++t) k_acc += grow[t] * irow[t + shift];
                g_kernel[(f * cin + c) * kw + i] += k_acc;
                if (girow) {
                    const double kv = kernel[(f * cin + c) * kw + i];
                    for (std::ptrdiff_t t = t_begin; t < t_end; ++t)
                        girow[t + shift] += kv * grow[t];
                }
            }
        }
    }
}

struct EncoderTrace {
    Matrix a1, z1, a2, z2;        // activations, filters x W
    Matrix gz, gr, gn, gh;        // recurrent gates/states, W x hidden
    std::array<double, kConcatDim> concat{};
};

/// Forward pass; fills the trace when one is supplied.
inline FeatureVector encode_impl(const Matrix& window, const EncoderParams& params,
                                 EncoderTrace* trace) {
    const std::size_t m = params.in_channels();
    const std::size_t w = window.cols();
    if (window.rows() != m)
        throw ShapeError("encode: window has " + std::to_string(window.rows()) +
                         " channels, params expect " + std::to_string(m));
    if (w < kConv1Width)
        throw ShapeError("encode: window length " + std::to_string(w) +
                         " shorter than the first kernel width " + std::to_string(kConv1Width));

    Matrix a1(kConv1Filters, w), a2(kConv2Filters, w);
    conv1d_same(window.data().data(), m, w, params.conv1_w(), params.conv1_b(),
                kConv1Filters, kConv1Width, a1.data().data());
    Matrix z1 = a1;
    for (double& v : z1.data()) v = v > 0.0 ? v : 0.0;
    conv1d_same(z1.data().data(), kConv1Filters, w, params.conv2_w(), params.conv2_b(),
                kConv2Filters, kConv2Width, a2.data().data());
    Matrix z2 = a2;
    for (double& v : z2.data()) v = v > 0.0 ? v : 0.0;

    std::array<double, kConcatDim> concat{};
    for (std::size_t g = 0; g < kConv2Filters; ++g) {
        double acc = 0.0;
        for (std::size_t t = 0; t < w; ++t) acc += z2.at(g, t);
        concat[g] = acc / static_cast<double>(w);
    }

    // Gated recurrent pass over the conv output sequence, h_{-1} = 0.
    const auto wz = params.gru_wz(), wr = params.gru_wr(), wn = params.gru_wn();
    const auto uz = params.gru_uz(), ur = params.gru_ur(), un = params.gru_un();
    const auto bz = params.gru_bz(), br = params.gru_br(), bn = params.gru_bn();
    Matrix gza(trace ? w : 0, kGruHidden), gra(trace ? w : 0, kGruHidden),
        gna(trace ? w : 0, kGruHidden), gha(trace ? w : 0, kGruHidden);
    std::array<double, kGruHidden> h{}, hprev{};
    std::array<double, kConv2Filters> x{};
    for (std::size_t t = 0; t < w; ++t) {
        for (std::size_t g = 0; g < kConv2Filters; ++g) x[g] = z2.at(g, t);
        std::array<double, kGruHidden> z{}, r{}, n{};
        for (std::size_t j = 0; j < kGruHidden; ++j) {
            double az = bz[j], ar = br[j];
            for (std::size_t i = 0; i < kConv2Filters; ++i) {
                az += wz[j * kConv2Filters + i] * x[i];
                ar += wr[j * kConv2Filters + i] * x[i];
            }
            for (std::size_t i = 0; i < kGruHidden; ++i) {
                az += uz[j * kGruHidden + i] * hprev[i];
                ar += ur[j * kGruHidden + i] * hprev[i];
            }
            z[j] = sigmoid(az);
            r[j] = sigmoid(ar);
        }
        for (std::size_t j = 0; j < kGruHidden; ++j) {
            double an = bn[j];
            for (std::size_t i = 0; i < kConv2Filters; ++i)
                an += wn[j * kConv2Filters + i] * x[i];
            for (std::size_t i = 0; i < kGruHidden; ++i)
                an += un[j * kGruHidden + i] * (r[i] * hprev[i]);
            n[j] = std::tanh(an);
        }
        for (std::size_t j = 0; j < kGruHidden; ++j)
            h[j] = (1.0 - z[j]) * n[j] + z[j] * hprev[j];
        if (trace) {
            for (std::size_t j = 0; j < kGruHidden; ++j) {
                gza.at(t, j) = z[j];
                gra.at(t, j) = r[j];
                gna.at(t, j) = n[j];
                gha.at(t, j) = h[j];
            }
        }
        hprev = h;
    }
    for (std::size_t j = 0; j < kGruHidden; ++j) concat[kConv2Filters + j] = h[j];

    const std::size_t d = params.feature_dim();
    const auto pw = params.proj_w();
    const auto pb = params.proj_b();
    FeatureVector out(d);
    for (std::size_t j = 0; j < d; ++j) {
        double acc = pb[j];
        for (std::size_t c = 0; c < kConcatDim; ++c) acc += pw[j * kConcatDim + c] * concat[c];
        out[j] = acc;
    }

    if (trace) {
        trace->a1 = std::move(a1);
        trace->z1 = std::move(z1);
        trace->a2 = std::move(a2);
        trace->z2 = std::move(z2);
        trace->gz = std::move(gza);
        trace->gr = std::move(gra);
        trace->gn = std::move(gna);
        trace->gh = std::move(gha);
        trace->concat = concat;
    }
    return out;
}

} // namespace detail

inline FeatureVector encode(const Matrix& window, const EncoderParams& params) {
    return detail::encode_impl(window, params, nullptr);
}

struct EncoderGradients {
    EncoderParams params;
    Matrix input;
};

/// Accumulates the exact gradients of upstream_grad . encode(window, params)
/// into gp (parameter gradients) and g_input, both of which must already be
/// correctly shaped. Used by the trainer to sum gradients over a batch
/// without per-instance gradient buffers.
inline void encode_backward_accumulate(const Matrix& window, const EncoderParams& params,
                                       std::span<const double> upstream_grad, EncoderParams& gp,
                                       Matrix& g_input) {
    const std::size_t d = params.feature_dim();
    if (upstream_grad.size() != d)
        throw ShapeError("encode_backward: upstream gradient length " +
                         std::to_string(upstream_grad.size()) + " != feature dim " +
                         std::to_string(d));
    detail::EncoderTrace trace;
    detail::encode_impl(window, params, &trace);

    const std::size_t m = params.in_channels();
    const std::size_t w = window.cols();

    // Projection.
    const auto pw = params.proj_w();
    auto gpw = gp.proj_w();
    auto gpb = gp.proj_b();
    std::array<double, kConcatDim> g_concat{};
    for (std::size_t j = 0; j < d; ++j) {
        const double gy = upstream_grad[j];
        gpb[j] += gy;
        for (std::size_t c = 0; c < kConcatDim; ++c) {
            gpw[j * kConcatDim + c] += gy * trace.concat[c];
            g_concat[c] += pw[j * kConcatDim + c] * gy;
        }
    }

    // Pooling branch: each timestep shares the averaged gradient.
    Matrix g_z2(kConv2Filters, w);
    for (std::size_t g = 0; g < kConv2Filters; ++g) {
        const double per_t = g_concat[g] / static_cast<double>(w);
        for (std::size_t t = 0; t < w; ++t) g_z2.at(g, t) = per_t;
    }

    // Recurrent branch, back through time.
    const auto wz = params.gru_wz(), wr = params.gru_wr(), wn = params.gru_wn();
    const auto uz = params.gru_uz(), ur = params.gru_ur(), un = params.gru_un();
    auto gwz = gp.gru_wz(), gwr = gp.gru_wr(), gwn = gp.gru_wn();
    auto guz = gp.gru_uz(), gur = gp.gru_ur(), gun = gp.gru_un();
    auto gbz = gp.gru_bz(), gbr = gp.gru_br(), gbn = gp.gru_bn();

    std::array<double, kGruHidden> g_h{};
    for (std::size_t j = 0; j < kGruHidden; ++j) g_h[j] = g_concat[kConv2Filters + j];

    std::array<double, kConv2Filters> x{};
    std::array<double, kGruHidden> hprev{}, g_hprev{}, g_az{}, g_ar{}, g_an{}, g_rh{};
    for (std::size_t tt = w; tt-- > 0;) {
        for (std::size_t g = 0; g < kConv2Filters; ++g) x[g] = trace.z2.at(g, tt);
        if (tt > 0)
            for (std::size_t j = 0; j < kGruHidden; ++j) hprev[j] = trace.gh.at(tt - 1, j);
        else
            hprev.fill(0.0);

        for (std::size_t j = 0; j < kGruHidden; ++j) {
            const double z = trace.gz.at(tt, j);
            const double n = trace.gn.at(tt, j);
            const double g_zj = g_h[j] * (hprev[j] - n);
            const double g_nj = g_h[j] * (1.0 - z);
            g_hprev[j] = g_h[j] * z;
            g_az[j] = g_zj * z * (1.0 - z);
            g_an[j] = g_nj * (1.0 - n * n);
        }
        // Candidate-gate parameter grads and the reset-product gradient.
        for (std::size_t j = 0; j < kGruHidden; ++j) {
            gbn[j] += g_an[j];
            for (std::size_t i = 0; i < kConv2Filters; ++i)
                gwn[j * kConv2Filters + i] += g_an[j] * x[i];
            for (std::size_t i = 0; i < kGruHidden; ++i)
                gun[j * kGruHidden + i] += g_an[j] * (trace.gr.at(tt, i) * hprev[i]);
        }
        g_rh.fill(0.0);
        for (std::size_t j = 0; j < kGruHidden; ++j) {
            const double ga = g_an[j];
            const double* urow = un.data() + j * kGruHidden;
            for (std::size_t i = 0; i < kGruHidden; ++i) g_rh[i] += urow[i] * ga;
        }
        for (std::size_t i = 0; i < kGruHidden; ++i) {
            const double r = trace.gr.at(tt, i);
            g_ar[i] = (g_rh[i] * hprev[i]) * r * (1.0 - r);
            g_hprev[i] += g_rh[i] * r;
        }
        for (std::size_t j = 0; j < kGruHidden; ++j) {
            gbz[j] += g_az[j];
            gbr[j] += g_ar[j];
            for (std::size_t i = 0; i < kConv2Filters; ++i) {
                gwz[j * kConv2Filters + i] += g_az[j] * x[i];
                gwr[j * kConv2Filters + i] += g_ar[j] * x[i];
            }
            for (std::size_t i = 0; i < kGruHidden; ++i) {
                guz[j * kGruHidden + i] += g_az[j] * hprev[i];
                gur[j * kGruHidden + i] += g_ar[j] * hprev[i];
            }
        }
        for (std::size_t j = 0; j < kGruHidden; ++j) {
            const double gaz = g_az[j];
            const double gar = g_ar[j];
            const double* uzrow = uz.data() + j * kGruHidden;
            const double* urrow = ur.data() + j * kGruHidden;
            for (std::size_t i = 0; i < kGruHidden; ++i)
                g_hprev[i] += uzrow[i] * gaz + urrow[i] * gar;
        }
        std::array<double, kConv2Filters> g_x{};
        for (std::size_t j = 0; j < kGruHidden; ++j) {
            const double gaz = g_az[j];
            const double gar = g_ar[j];
            const double gan = g_an[j];
            const double* wzrow = wz.data() + j * kConv2Filters;
            const double* wrrow = wr.data() + j * kConv2Filters;
            const double* wnrow = wn.data() + j * kConv2Filters;
            for (std::size_t i = 0; i < kConv2Filters; ++i)
                g_x[i] += wzrow[i] * gaz + wrrow[i] * gar + wnrow[i] * gan;
        }
        for (std::size_t i = 0; i < kConv2Filters; ++i) g_z2.at(i, tt) += g_x[i];
        g_h = g_hprev;
    }

    // ReLU before the recurrent/pooling stage.
    Matrix g_a2 = g_z2;
    for (std::size_t i = 0; i < g_a2.data().size(); ++i)
        if (!(trace.a2.data()[i] > 0.0)) g_a2.data()[i] = 0.0;

    // conv2 backward: kernel/bias grads plus gradient into z1.
    Matrix g_z1(kConv1Filters, w);
    detail::conv1d_same_backward(trace.z1.data().data(), kConv1Filters, w, params.conv2_w(),
                                 kConv2Filters, kConv2Width, g_a2.data().data(), gp.conv2_w(),
                                 gp.conv2_b(), g_z1.data().data());

    Matrix g_a1 = g_z1;
    for (std::size_t i = 0; i < g_a1.data().size(); ++i)
        if (!(trace.a1.data()[i] > 0.0)) g_a1.data()[i] = 0.0;

    // conv1 backward: kernel/bias grads plus gradient into the window.
    detail::conv1d_same_backward(window.data().data(), m, w, params.conv1_w(), kConv1Filters,
                                 kConv1Width, g_a1.data().data(), gp.conv1_w(), gp.conv1_b(),
                                 g_input.data().data());
}

/// Exact gradients of upstream_grad . encode(window, params) with respect to
/// every parameter and the input window.
inline EncoderGradients encode_backward(const Matrix& window, const EncoderParams& params,
                                        std::span<const double> upstream_grad) {
    EncoderGradients grads{EncoderParams(params.in_channels(), params.feature_dim()),
                           Matrix(params.in_channels(), window.cols())};
    encode_backward_accumulate(window, params, upstream_grad, grads.params, grads.input);
    return grads;
}

} // namespace uamil
