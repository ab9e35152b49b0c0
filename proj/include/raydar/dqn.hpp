#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "raydar/rlenv.hpp"

namespace raydar::dqn {

using rlenv::Cell;
using rlenv::StateVector;

class DqnError : public std::runtime_error {
public:
    explicit DqnError(const std::string& msg) : std::runtime_error(msg) {}
};

// One stream drives all training randomness; the 53-bit mapping keeps draws
// identical across standard libraries.
struct Rng {
    std::mt19937_64 gen;

    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    int uniform_int(int n) {
        int v = static_cast<int>(uniform() * n);
        return v >= n ? n - 1 : v;
    }
};

namespace detail {

struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    void resize(int r, int c) {
        rows = r;
        cols = c;
        a.assign(static_cast<std::size_t>(r) * c, 0.0);
    }
    double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

}  // namespace detail

// Dense rectifier network; weights are [fan_in x fan_out] row-major per layer.
struct Mlp {
    std::vector<int> dims;
    std::vector<detail::Mat> weights;
    std::vector<std::vector<double>> biases;

    int layer_count() const { return static_cast<int>(weights.size()); }
};

inline std::size_t count_parameters(const Mlp& net) {
    std::size_t n = 0;
    for (int l = 0; l < net.layer_count(); ++l)
        n += net.weights[l].a.size() + net.biases[l].size();
    return n;
}

inline Mlp init_mlp(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw DqnError("network needs at least input and output widths");
    Mlp net;
    net.dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        detail::Mat w(dims[l], dims[l + 1]);
        double bound = std::sqrt(6.0 / dims[l]);
        for (auto& v : w.a) v = (2.0 * rng.uniform() - 1.0) * bound;
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(dims[l + 1], 0.0);
    }
    return net;
}

struct DQNConfig {
    double gamma = 0.9;
    double epsilon = 0.1;
    int episodes = 500;
    int hidden = 128;
    double lr = 1e-3;
    std::size_t replay_capacity = 50000;
    int batch_size = 64;
    int sync_interval = 500;
    std::uint64_t seed = 7;
    int max_steps = 0;  // 0 keeps the environment default of 20*(nx+ny)
};

// Fixed architecture [10, H, H, H, H, H, 4]: five rectifier hidden layers,
// linear 4-wide output in Action index order.
struct QNetwork {
    Mlp mlp;
};

inline QNetwork init_network(const DQNConfig& config, std::uint64_t seed) {
    if (config.hidden < 1) throw DqnError("hidden width must be positive");
    Rng rng(seed);
    int h = config.hidden;
    QNetwork q;
    q.mlp = init_mlp({10, h, h, h, h, h, 4}, rng);
    return q;
}

inline std::vector<double> forward_mlp(const Mlp& net, std::span<const double> input) {
    if (static_cast<int>(input.size()) != net.dims.front())
        throw DqnError("input width mismatch: got " + std::to_string(input.size()) + ", want " +
                       std::to_string(net.dims.front()));
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> nxt;
    for (int l = 0; l < net.layer_count(); ++l) {
        const auto& w = net.weights[l];
        nxt.assign(net.biases[l].begin(), net.biases[l].end());
        for (int i = 0; i < w.rows; ++i) {
            double xi = cur[i];
            const double* wr = w.row(i);
            for (int o = 0; o < w.cols; ++o) nxt[o] += xi * wr[o];
        }
        if (l + 1 < net.layer_count())
            for (auto& v : nxt) v = v > 0.0 ? v : 0.0;
        cur.swap(nxt);
    }
    return cur;
}

inline std::array<double, 4> forward(const QNetwork& net, const StateVector& s) {
    auto out = forward_mlp(net.mlp, s);
    if (out.size() != 4) throw DqnError("Q network must have 4 outputs");
    return {out[0], out[1], out[2], out[3]};
}

inline double huber(double q_behavior, double q_target) {
    double e = q_target - q_behavior;
    double ae = std::abs(e);
    return ae <= 1.0 ? 0.5 * e * e : ae - 0.5;
}

inline int argmax4(const std::array<double, 4>& q) {
    int best = 0;
    for (int k = 1; k < 4; ++k)
        if (q[k] > q[best]) best = k;
    return best;
}

// Explore draw first, then the action draw only on the explore branch.
inline int select_action(const std::array<double, 4>& q, double epsilon, Rng& rng) {
    if (rng.uniform() < epsilon) return rng.uniform_int(4);
    return argmax4(q);
}

struct Transition {
    StateVector s{};
    int a = 0;
    double r = 0.0;
    StateVector s2{};
    bool done = false;
};

inline double bellman_target(const Transition& tr, const QNetwork& target_net, double gamma) {
    if (tr.done) return tr.r;
    auto q = forward(target_net, tr.s2);
    return tr.r + gamma * q[static_cast<std::size_t>(argmax4(q))];
}

struct ReplayBuffer {
    std::size_t capacity = 50000;
    std::vector<Transition> data;
    std::size_t head = 0;

    explicit ReplayBuffer(std::size_t cap) : capacity(cap) { data.reserve(std::min(cap, std::size_t{4096})); }

    void push(const Transition& t) {
        if (data.size() < capacity) {
            data.push_back(t);
        } else {
            data[head] = t;  // oldest-first eviction
            head = (head + 1) % capacity;
        }
    }
    std::size_t size() const { return data.size(); }
};

namespace detail {

struct Workspace {
    std::vector<Mat> acts;   // acts[0] = input batch, acts[l+1] = post-activation
    std::vector<Mat> tacts;  // same layout for the target network pass
    std::vector<Mat> grad_w;
    std::vector<std::vector<double>> grad_b;
    Mat dz, dx, wt;
    std::vector<int> nonterminal;
};

// Batch products microtiled with GNU vector types: sixteen 4-wide register
// accumulators per tile, so streamed rows are reused across four samples and
// nothing round-trips through the stack. Plain rolling loops cover tile
// remainders and compilers without the extension. Every output sums its terms
// in the same ascending order in every path, so results match the
// single-sample forward bit for bit.
#if defined(__GNUC__) || defined(__clang__)
#define RAYDAR_VEC4 1
typedef double v4d __attribute__((vector_size(32), aligned(8), may_alias));

inline v4d load4(const double* p) { return *reinterpret_cast<const v4d*>(p); }
inline void store4(double* p, v4d v) { *reinterpret_cast<v4d*>(p) = v; }
inline v4d splat4(double x) { return v4d{x, x, x, x}; }
#endif

// out[p][c] = act(bias[c] + sum_i in[p][i] w[i][c]), terms in ascending i.
inline void tile_forward(int batch, int rows, int cols, const double* in, const double* w,
                         const double* bias, double* out, bool relu) {
    int p0 = 0;
#ifdef RAYDAR_VEC4
    for (; p0 + 4 <= batch; p0 += 4) {
        const double* x0 = in + static_cast<std::size_t>(p0 + 0) * rows;
        const double* x1 = in + static_cast<std::size_t>(p0 + 1) * rows;
        const double* x2 = in + static_cast<std::size_t>(p0 + 2) * rows;
        const double* x3 = in + static_cast<std::size_t>(p0 + 3) * rows;
        int c0 = 0;
        for (; c0 + 16 <= cols; c0 += 16) {
            v4d b0 = load4(bias + c0), b1 = load4(bias + c0 + 4);
            v4d b2 = load4(bias + c0 + 8), b3 = load4(bias + c0 + 12);
            v4d a00 = b0, a01 = b1, a02 = b2, a03 = b3;
            v4d a10 = b0, a11 = b1, a12 = b2, a13 = b3;
            v4d a20 = b0, a21 = b1, a22 = b2, a23 = b3;
            v4d a30 = b0, a31 = b1, a32 = b2, a33 = b3;
            for (int i = 0; i < rows; ++i) {
                const double* wr = w + static_cast<std::size_t>(i) * cols + c0;
                v4d w0 = load4(wr), w1 = load4(wr + 4), w2 = load4(wr + 8), w3 = load4(wr + 12);
                v4d v0 = splat4(x0[i]), v1 = splat4(x1[i]), v2 = splat4(x2[i]), v3 = splat4(x3[i]);
                a00 += v0 * w0; a01 += v0 * w1; a02 += v0 * w2; a03 += v0 * w3;
                a10 += v1 * w0; a11 += v1 * w1; a12 += v1 * w2; a13 += v1 * w3;
                a20 += v2 * w0; a21 += v2 * w1; a22 += v2 * w2; a23 += v2 * w3;
                a30 += v3 * w0; a31 += v3 * w1; a32 += v3 * w2; a33 += v3 * w3;
            }
            if (relu) {
                v4d z = {};
                a00 = a00 > z ? a00 : z; a01 = a01 > z ? a01 : z; a02 = a02 > z ? a02 : z; a03 = a03 > z ? a03 : z;
                a10 = a10 > z ? a10 : z; a11 = a11 > z ? a11 : z; a12 = a12 > z ? a12 : z; a13 = a13 > z ? a13 : z;
                a20 = a20 > z ? a20 : z; a21 = a21 > z ? a21 : z; a22 = a22 > z ? a22 : z; a23 = a23 > z ? a23 : z;
                a30 = a30 > z ? a30 : z; a31 = a31 > z ? a31 : z; a32 = a32 > z ? a32 : z; a33 = a33 > z ? a33 : z;
            }
            double* o0 = out + static_cast<std::size_t>(p0 + 0) * cols + c0;
            double* o1 = out + static_cast<std::size_t>(p0 + 1) * cols + c0;
            double* o2 = out + static_cast<std::size_t>(p0 + 2) * cols + c0;
            double* o3 = out + static_cast<std::size_t>(p0 + 3) * cols + c0;
            store4(o0, a00); store4(o0 + 4, a01); store4(o0 + 8, a02); store4(o0 + 12, a03);
            store4(o1, a10); store4(o1 + 4, a11); store4(o1 + 8, a12); store4(o1 + 12, a13);
            store4(o2, a20); store4(o2 + 4, a21); store4(o2 + 8, a22); store4(o2 + 12, a23);
            store4(o3, a30); store4(o3 + 4, a31); store4(o3 + 8, a32); store4(o3 + 12, a33);
        }
        for (; c0 < cols; ++c0) {
            const double* xs[4] = {x0, x1, x2, x3};
            for (int t = 0; t < 4; ++t) {
                double acc = bias[c0];
                for (int i = 0; i < rows; ++i)
                    acc += xs[t][i] * w[static_cast<std::size_t>(i) * cols + c0];
                if (relu) acc = acc > 0.0 ? acc : 0.0;
                out[static_cast<std::size_t>(p0 + t) * cols + c0] = acc;
            }
        }
    }
#endif
    for (; p0 < batch; ++p0) {
        double* o = out + static_cast<std::size_t>(p0) * cols;
        for (int c = 0; c < cols; ++c) o[c] = bias[c];
        const double* x = in + static_cast<std::size_t>(p0) * rows;
        for (int i = 0; i < rows; ++i) {
            double xi = x[i];
            const double* wr = w + static_cast<std::size_t>(i) * cols;
            for (int c = 0; c < cols; ++c) o[c] += xi * wr[c];
        }
        if (relu)
            for (int c = 0; c < cols; ++c) o[c] = o[c] > 0.0 ? o[c] : 0.0;
    }
}

// gw[i][c] = sum_p x[p][i] dz[p][c], terms in ascending p.
inline void tile_grad_w(int batch, int rows, int cols, const double* x, const double* dz,
                        double* gw) {
    int i0 = 0;
#ifdef RAYDAR_VEC4
    for (; i0 + 4 <= rows; i0 += 4) {
        int c0 = 0;
        for (; c0 + 16 <= cols; c0 += 16) {
            v4d a00 = {}, a01 = {}, a02 = {}, a03 = {};
            v4d a10 = {}, a11 = {}, a12 = {}, a13 = {};
            v4d a20 = {}, a21 = {}, a22 = {}, a23 = {};
            v4d a30 = {}, a31 = {}, a32 = {}, a33 = {};
            for (int p = 0; p < batch; ++p) {
                const double* dzr = dz + static_cast<std::size_t>(p) * cols + c0;
                v4d w0 = load4(dzr), w1 = load4(dzr + 4), w2 = load4(dzr + 8), w3 = load4(dzr + 12);
                const double* xr = x + static_cast<std::size_t>(p) * rows + i0;
                v4d v0 = splat4(xr[0]), v1 = splat4(xr[1]), v2 = splat4(xr[2]), v3 = splat4(xr[3]);
                a00 += v0 * w0; a01 += v0 * w1; a02 += v0 * w2; a03 += v0 * w3;
                a10 += v1 * w0; a11 += v1 * w1; a12 += v1 * w2; a13 += v1 * w3;
                a20 += v2 * w0; a21 += v2 * w1; a22 += v2 * w2; a23 += v2 * w3;
                a30 += v3 * w0; a31 += v3 * w1; a32 += v3 * w2; a33 += v3 * w3;
            }
            double* g0 = gw + static_cast<std::size_t>(i0 + 0) * cols + c0;
            double* g1 = gw + static_cast<std::size_t>(i0 + 1) * cols + c0;
            double* g2 = gw + static_cast<std::size_t>(i0 + 2) * cols + c0;
            double* g3 = gw + static_cast<std::size_t>(i0 + 3) * cols + c0;
            store4(g0, a00); store4(g0 + 4, a01); store4(g0 + 8, a02); store4(g0 + 12, a03);
            store4(g1, a10); store4(g1 + 4, a11); store4(g1 + 8, a12); store4(g1 + 12, a13);
            store4(g2, a20); store4(g2 + 4, a21); store4(g2 + 8, a22); store4(g2 + 12, a23);
            store4(g3, a30); store4(g3 + 4, a31); store4(g3 + 8, a32); store4(g3 + 12, a33);
        }
        for (; c0 < cols; ++c0)
            for (int t = 0; t < 4; ++t) {
                double acc = 0.0;
                for (int p = 0; p < batch; ++p)
                    acc += x[static_cast<std::size_t>(p) * rows + i0 + t] *
                           dz[static_cast<std::size_t>(p) * cols + c0];
                gw[static_cast<std::size_t>(i0 + t) * cols + c0] = acc;
            }
    }
#endif
    for (; i0 < rows; ++i0)
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int p = 0; p < batch; ++p)
                acc += x[static_cast<std::size_t>(p) * rows + i0] *
                       dz[static_cast<std::size_t>(p) * cols + c];
            gw[static_cast<std::size_t>(i0) * cols + c] = acc;
        }
}

// dx[p][i] = sum_c dz[p][c] wt[c][i], terms in ascending c, masked afterwards
// by this layer's rectifier state.
inline void tile_back_x(int batch, int rows, int cols, const double* dz, const double* wt,
                        const double* act, double* dx) {
    int p0 = 0;
#ifdef RAYDAR_VEC4
    for (; p0 + 4 <= batch; p0 += 4) {
        const double* z0 = dz + static_cast<std::size_t>(p0 + 0) * cols;
        const double* z1 = dz + static_cast<std::size_t>(p0 + 1) * cols;
        const double* z2 = dz + static_cast<std::size_t>(p0 + 2) * cols;
        const double* z3 = dz + static_cast<std::size_t>(p0 + 3) * cols;
        int i0 = 0;
        for (; i0 + 16 <= rows; i0 += 16) {
            v4d a00 = {}, a01 = {}, a02 = {}, a03 = {};
            v4d a10 = {}, a11 = {}, a12 = {}, a13 = {};
            v4d a20 = {}, a21 = {}, a22 = {}, a23 = {};
            v4d a30 = {}, a31 = {}, a32 = {}, a33 = {};
            for (int c = 0; c < cols; ++c) {
                const double* wtr = wt + static_cast<std::size_t>(c) * rows + i0;
                v4d w0 = load4(wtr), w1 = load4(wtr + 4), w2 = load4(wtr + 8), w3 = load4(wtr + 12);
                v4d v0 = splat4(z0[c]), v1 = splat4(z1[c]), v2 = splat4(z2[c]), v3 = splat4(z3[c]);
                a00 += v0 * w0; a01 += v0 * w1; a02 += v0 * w2; a03 += v0 * w3;
                a10 += v1 * w0; a11 += v1 * w1; a12 += v1 * w2; a13 += v1 * w3;
                a20 += v2 * w0; a21 += v2 * w1; a22 += v2 * w2; a23 += v2 * w3;
                a30 += v3 * w0; a31 += v3 * w1; a32 += v3 * w2; a33 += v3 * w3;
            }
            v4d z = {};
            for (int t = 0; t < 4; ++t) {
                const double* ar = act + static_cast<std::size_t>(p0 + t) * rows + i0;
                double* dxr = dx + static_cast<std::size_t>(p0 + t) * rows + i0;
                v4d m0 = load4(ar), m1 = load4(ar + 4), m2 = load4(ar + 8), m3 = load4(ar + 12);
                v4d r0 = t == 0 ? a00 : t == 1 ? a10 : t == 2 ? a20 : a30;
                v4d r1 = t == 0 ? a01 : t == 1 ? a11 : t == 2 ? a21 : a31;
                v4d r2 = t == 0 ? a02 : t == 1 ? a12 : t == 2 ? a22 : a32;
                v4d r3 = t == 0 ? a03 : t == 1 ? a13 : t == 2 ? a23 : a33;
                store4(dxr, m0 > z ? r0 : z);
                store4(dxr + 4, m1 > z ? r1 : z);
                store4(dxr + 8, m2 > z ? r2 : z);
                store4(dxr + 12, m3 > z ? r3 : z);
            }
        }
        for (; i0 < rows; ++i0) {
            const double* zs[4] = {z0, z1, z2, z3};
            for (int t = 0; t < 4; ++t) {
                double acc = 0.0;
                for (int c = 0; c < cols; ++c)
                    acc += zs[t][c] * wt[static_cast<std::size_t>(c) * rows + i0];
                std::size_t k = static_cast<std::size_t>(p0 + t) * rows + i0;
                dx[k] = act[k] <= 0.0 ? 0.0 : acc;
            }
        }
    }
#endif
    for (; p0 < batch; ++p0) {
        double* dxr = dx + static_cast<std::size_t>(p0) * rows;
        for (int i = 0; i < rows; ++i) dxr[i] = 0.0;
        const double* zr = dz + static_cast<std::size_t>(p0) * cols;
        for (int c = 0; c < cols; ++c) {
            double d = zr[c];
            const double* wtr = wt + static_cast<std::size_t>(c) * rows;
            for (int i = 0; i < rows; ++i) dxr[i] += d * wtr[i];
        }
        const double* ar = act + static_cast<std::size_t>(p0) * rows;
        for (int i = 0; i < rows; ++i)
            if (ar[i] <= 0.0) dxr[i] = 0.0;
    }
}

inline void forward_batch(const Mlp& net, std::vector<Mat>& acts) {
    int layers = net.layer_count();
    if (static_cast<int>(acts.size()) != layers + 1) acts.resize(layers + 1);
    int batch = acts[0].rows;
    for (int l = 0; l < layers; ++l) {
        const Mat& w = net.weights[l];
        Mat& out = acts[l + 1];
        if (out.rows != batch || out.cols != w.cols) out.resize(batch, w.cols);
        tile_forward(batch, w.rows, w.cols, acts[l].a.data(), w.a.data(),
                     net.biases[l].data(), out.row(0), l + 1 != layers);
    }
}

// Backpropagates ws.dz (gradient at the output) into grad_w / grad_b; the
// weight matrices stay untouched so the optimizer applies one coherent step.
inline void backward_batch(const Mlp& net, Workspace& ws) {
    int layers = net.layer_count();
    int batch = ws.acts[0].rows;
    if (static_cast<int>(ws.grad_w.size()) != layers) {
        ws.grad_w.resize(layers);
        ws.grad_b.resize(layers);
    }
    for (int l = layers - 1; l >= 0; --l) {
        const Mat& w = net.weights[l];
        Mat& gw = ws.grad_w[l];
        if (gw.rows != w.rows || gw.cols != w.cols) gw.resize(w.rows, w.cols);
        auto& gb = ws.grad_b[l];
        gb.assign(w.cols, 0.0);

        const Mat& x = ws.acts[l];
        for (int p = 0; p < batch; ++p) {
            const double* dzr = ws.dz.row(p);
            for (int c = 0; c < w.cols; ++c) gb[c] += dzr[c];
        }
        tile_grad_w(batch, w.rows, w.cols, x.a.data(), ws.dz.a.data(), gw.row(0));

        if (l == 0) break;
        if (ws.wt.rows != w.cols || ws.wt.cols != w.rows) ws.wt.resize(w.cols, w.rows);
        for (int i = 0; i < w.rows; ++i)
            for (int c = 0; c < w.cols; ++c) ws.wt.at(c, i) = w.at(i, c);
        if (ws.dx.rows != batch || ws.dx.cols != w.rows) ws.dx.resize(batch, w.rows);
        tile_back_x(batch, w.rows, w.cols, ws.dz.a.data(), ws.wt.a.data(), x.a.data(),
                    ws.dx.row(0));
        std::swap(ws.dz, ws.dx);
    }
}

}  // namespace detail

struct AdamState {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::int64_t t = 0;
    std::vector<detail::Mat> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;

    void ensure(const Mlp& net) {
        if (!m_w.empty()) return;
        for (int l = 0; l < net.layer_count(); ++l) {
            m_w.emplace_back(net.weights[l].rows, net.weights[l].cols);
            v_w.emplace_back(net.weights[l].rows, net.weights[l].cols);
            m_b.emplace_back(net.biases[l].size(), 0.0);
            v_b.emplace_back(net.biases[l].size(), 0.0);
        }
    }

    void apply(Mlp& net, const std::vector<detail::Mat>& gw,
               const std::vector<std::vector<double>>& gb, double lr) {
        ensure(net);
        ++t;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (int l = 0; l < net.layer_count(); ++l) {
            auto& w = net.weights[l].a;
            const auto& g = gw[l].a;
            auto& m = m_w[l].a;
            auto& v = v_w[l].a;
            for (std::size_t k = 0; k < w.size(); ++k) {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
            }
            auto& b = net.biases[l];
            const auto& gbl = gb[l];
            auto& mb = m_b[l];
            auto& vb = v_b[l];
            for (std::size_t k = 0; k < b.size(); ++k) {
                mb[k] = beta1 * mb[k] + (1.0 - beta1) * gbl[k];
                vb[k] = beta2 * vb[k] + (1.0 - beta2) * gbl[k] * gbl[k];
                b[k] -= lr * (mb[k] / c1) / (std::sqrt(vb[k] / c2) + eps);
            }
        }
    }
};

inline void sync_target(const QNetwork& behavior, QNetwork& target) {
    if (behavior.mlp.dims != target.mlp.dims) throw DqnError("architecture mismatch");
    target = behavior;
}

// One batched gradient step on the mean Huber loss of the chosen actions.
// Terminal transitions never touch the target network.
inline double train_step(QNetwork& behavior, const QNetwork& target,
                         std::span<const Transition> batch, double gamma, double lr,
                         AdamState& adam, detail::Workspace& ws) {
    if (batch.empty()) throw DqnError("empty batch");
    int n = static_cast<int>(batch.size());

    ws.nonterminal.clear();
    for (int p = 0; p < n; ++p)
        if (!batch[p].done) ws.nonterminal.push_back(p);

    std::vector<double> y(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) y[static_cast<std::size_t>(p)] = batch[p].r;
    if (!ws.nonterminal.empty()) {
        int m = static_cast<int>(ws.nonterminal.size());
        if (ws.tacts.empty()) ws.tacts.resize(1);
        if (ws.tacts[0].rows != m || ws.tacts[0].cols != 10) ws.tacts[0].resize(m, 10);
        for (int k = 0; k < m; ++k) {
            const auto& s2 = batch[static_cast<std::size_t>(ws.nonterminal[k])].s2;
            std::copy(s2.begin(), s2.end(), ws.tacts[0].row(k));
        }
        detail::forward_batch(target.mlp, ws.tacts);
        const detail::Mat& tq = ws.tacts.back();
        for (int k = 0; k < m; ++k) {
            const double* q = tq.row(k);
            double best = q[0];
            for (int c = 1; c < tq.cols; ++c) best = std::max(best, q[c]);
            y[static_cast<std::size_t>(ws.nonterminal[k])] += gamma * best;
        }
    }

    if (ws.acts.empty()) ws.acts.resize(1);
    if (ws.acts[0].rows != n || ws.acts[0].cols != 10) ws.acts[0].resize(n, 10);
    for (int p = 0; p < n; ++p)
        std::copy(batch[p].s.begin(), batch[p].s.end(), ws.acts[0].row(p));
    detail::forward_batch(behavior.mlp, ws.acts);

    const detail::Mat& qb = ws.acts.back();
    if (ws.dz.rows != n || ws.dz.cols != qb.cols) ws.dz.resize(n, qb.cols);
    ws.dz.zero();
    double loss = 0.0;
    for (int p = 0; p < n; ++p) {
        double pred = qb.at(p, batch[p].a);
        double e = y[static_cast<std::size_t>(p)] - pred;
        loss += huber(pred, y[static_cast<std::size_t>(p)]);
        double d = std::abs(e) <= 1.0 ? -e : (e > 0.0 ? -1.0 : 1.0);
        ws.dz.at(p, batch[p].a) = d / n;
    }
    loss /= n;
    if (!std::isfinite(loss)) throw DqnError("non-finite loss (divergence)");

    detail::backward_batch(behavior.mlp, ws);
    adam.apply(behavior.mlp, ws.grad_w, ws.grad_b, lr);
    return loss;
}

struct Normalization {
    double coord_x = 1.0, coord_y = 1.0;
    double theta_re = 1.0, theta_im = 1.0, delay = 1.0;

    StateVector apply(const StateVector& s) const {
        constexpr double pi = std::numbers::pi;
        return {s[0] / coord_x, s[1] / coord_y,  s[2] / pi,       s[3] / pi,  s[4] / pi,
                s[5] / pi,     s[6] / theta_re, s[7] / theta_im, s[8] / pi,  s[9] / delay};
    }
};

inline Normalization make_normalization(const rlenv::NavEnv& env) {
    Normalization n;
    const auto& g = env.grid;
    n.coord_x = std::max(std::abs(g.ox), std::abs(g.ox + g.nx * g.cell_size));
    n.coord_y = std::max(std::abs(g.oy), std::abs(g.oy + g.ny * g.cell_size));
    double re = 0.0, im = 0.0, dl = 0.0;
    for (const auto& f : env.features) {
        re = std::max(re, std::abs(f[6]));
        im = std::max(im, std::abs(f[7]));
        dl = std::max(dl, std::abs(f[9]));
    }
    n.theta_re = re > 0.0 ? re : 1.0;
    n.theta_im = im > 0.0 ? im : 1.0;
    n.delay = dl > 0.0 ? dl : 1.0;
    if (n.coord_x <= 0.0) n.coord_x = 1.0;
    if (n.coord_y <= 0.0) n.coord_y = 1.0;
    return n;
}

struct TrainReport {
    std::vector<int> steps;
    std::vector<double> total_reward;
    std::vector<int> collisions;
    std::vector<std::uint8_t> reached;
    int best_steps = -1;
    int best_episode = -1;

    int episode_count() const { return static_cast<int>(steps.size()); }
};

struct TrainResult {
    QNetwork best;       // weights right after the best-by-steps episode
    QNetwork final_net;  // weights at the end of the last finished episode
    Normalization norm;
    TrainReport report;
};

struct TrainOptions {
    std::optional<Cell> start;   // both set: fixed endpoints; both empty: per-episode resample
    std::optional<Cell> target;
    std::function<bool(const TrainResult&)> stop_after_episode;
};

// Draw order per episode: optional start/target resample, then per step the
// explore draw, the explore-branch action draw, and batch-index draws.
inline TrainResult train(rlenv::NavEnv& env, const DQNConfig& cfg, const TrainOptions& opts = {}) {
    if (static_cast<bool>(opts.start) != static_cast<bool>(opts.target))
        throw DqnError("start and target must be given together");
    if (cfg.max_steps > 0) env.max_steps = cfg.max_steps;

    Rng rng(cfg.seed);
    QNetwork behavior;
    behavior.mlp = init_mlp({10, cfg.hidden, cfg.hidden, cfg.hidden, cfg.hidden, cfg.hidden, 4}, rng);
    QNetwork target = behavior;

    Normalization norm = make_normalization(env);
    ReplayBuffer buffer(cfg.replay_capacity);
    AdamState adam;
    detail::Workspace ws;
    std::vector<Transition> batch(static_cast<std::size_t>(cfg.batch_size));

    std::vector<Cell> free_cells;
    for (int j = 0; j < env.grid.ny; ++j)
        for (int i = 0; i < env.grid.nx; ++i)
            if (!env.occupancy.at(i, j)) free_cells.push_back({i, j});
    if (free_cells.size() < 2) throw DqnError("fewer than two free cells");

    if (opts.start) {
        if (!rlenv::bfs_shortest(env.occupancy, *opts.start, *opts.target))
            throw DqnError("unreachable target");
    }

    TrainResult result;
    result.norm = norm;
    long grad_steps = 0;

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        Cell start, tgt;
        if (opts.start) {
            start = *opts.start;
            tgt = *opts.target;
        } else {
            start = free_cells[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(free_cells.size())))];
            int guard = 0;
            do {
                tgt = free_cells[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(free_cells.size())))];
                if (++guard > 10000) throw DqnError("no reachable start/target pair found");
            } while (tgt == start || !rlenv::bfs_shortest(env.occupancy, start, tgt));
        }

        StateVector raw = env.reset(start, tgt, cfg.seed);
        StateVector state = norm.apply(raw);
        int steps = 0, collisions = 0;
        double total_reward = 0.0;
        bool reached = false;

        while (true) {
            auto q = forward(behavior, state);
            int a = select_action(q, cfg.epsilon, rng);
            auto out = env.step(static_cast<rlenv::Action>(a));
            StateVector next = norm.apply(out.state);
            buffer.push({state, a, out.reward, next, out.done});
            ++steps;
            total_reward += out.reward;
            if (out.collided) ++collisions;

            if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
                for (auto& t : batch)
                    t = buffer.data[static_cast<std::size_t>(
                        rng.uniform_int(static_cast<int>(buffer.size())))];
                train_step(behavior, target, batch, cfg.gamma, cfg.lr, adam, ws);
                ++grad_steps;
                if (grad_steps % cfg.sync_interval == 0) sync_target(behavior, target);
            }

            state = next;
            if (out.done) {
                reached = out.reached;
                break;
            }
        }

        result.report.steps.push_back(steps);
        result.report.total_reward.push_back(total_reward);
        result.report.collisions.push_back(collisions);
        result.report.reached.push_back(reached ? 1 : 0);
        if (result.report.best_steps < 0 || steps < result.report.best_steps) {
            result.report.best_steps = steps;
            result.report.best_episode = ep;
            result.best = behavior;
        }
        result.final_net = behavior;
        if (opts.stop_after_episode && opts.stop_after_episode(result)) break;
    }

    return result;
}

struct TrajectoryPoint {
    int t = 0;
    Cell cell;
    int action = -1;  // -1 on the t=0 row
    double reward = 0.0;
    bool collided = false;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    bool reached = false;
    int collisions = 0;
    int steps = 0;
};

// Greedy rollout; the checkpoint's normalization travels with the network so
// the same policy runs unchanged against overlay-derived feature maps.
inline Trajectory infer_path(const QNetwork& net, const Normalization& norm, rlenv::NavEnv& env,
                             Cell start, Cell target, int max_steps) {
    Trajectory traj;
    traj.points.push_back({0, start, -1, 0.0, false});
    if (start == target) {
        if (!env.grid.contains_cell(start.i, start.j) || env.occupancy.at(start.i, start.j))
            throw rlenv::EnvError("start cell is blocked or outside the grid");
        traj.reached = true;
        return traj;
    }
    env.max_steps = max_steps;
    StateVector raw = env.reset(start, target, 0);
    StateVector state = norm.apply(raw);
    for (int t = 1; t <= max_steps; ++t) {
        int a = argmax4(forward(net, state));
        auto out = env.step(static_cast<rlenv::Action>(a));
        traj.points.push_back({t, env.position, a, out.reward, out.collided});
        ++traj.steps;
        if (out.collided) ++traj.collisions;
        state = norm.apply(out.state);
        if (out.done) {
            traj.reached = out.reached;
            break;
        }
    }
    return traj;
}

namespace detail {

inline std::string fmt17(double v) { return raytrace::detail::fmt17(v); }

}  // namespace detail

struct Checkpoint {
    Mlp mlp;
    Normalization norm;
    DQNConfig config;
    std::optional<Cell> start, target;
    std::string scene_name;
};

inline std::string checkpoint_json(const QNetwork& net, const Normalization& norm,
                                   const DQNConfig& cfg, std::optional<Cell> start,
                                   std::optional<Cell> target, const std::string& scene_name) {
    std::string s = "{\n  \"version\": 1,\n  \"dims\": [";
    for (std::size_t k = 0; k < net.mlp.dims.size(); ++k) {
        if (k) s += ", ";
        s += std::to_string(net.mlp.dims[k]);
    }
    s += "],\n  \"weights\": [\n";
    for (int l = 0; l < net.mlp.layer_count(); ++l) {
        s += "    [";
        const auto& w = net.mlp.weights[l].a;
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (k) s += ",";
            s += detail::fmt17(w[k]);
        }
        s += l + 1 < net.mlp.layer_count() ? "],\n" : "]\n";
    }
    s += "  ],\n  \"biases\": [\n";
    for (int l = 0; l < net.mlp.layer_count(); ++l) {
        s += "    [";
        const auto& b = net.mlp.biases[l];
        for (std::size_t k = 0; k < b.size(); ++k) {
            if (k) s += ",";
            s += detail::fmt17(b[k]);
        }
        s += l + 1 < net.mlp.layer_count() ? "],\n" : "]\n";
    }
    s += "  ],\n  \"normalization\": {\"coord_x\": " + detail::fmt17(norm.coord_x) +
         ", \"coord_y\": " + detail::fmt17(norm.coord_y) +
         ", \"theta_re\": " + detail::fmt17(norm.theta_re) +
         ", \"theta_im\": " + detail::fmt17(norm.theta_im) +
         ", \"delay\": " + detail::fmt17(norm.delay) + "},\n";
    s += "  \"config\": {\"gamma\": " + detail::fmt17(cfg.gamma) +
         ", \"epsilon\": " + detail::fmt17(cfg.epsilon) +
         ", \"episodes\": " + std::to_string(cfg.episodes) +
         ", \"hidden\": " + std::to_string(cfg.hidden) + ", \"lr\": " + detail::fmt17(cfg.lr) +
         ", \"replay_capacity\": " + std::to_string(cfg.replay_capacity) +
         ", \"batch_size\": " + std::to_string(cfg.batch_size) +
         ", \"sync_interval\": " + std::to_string(cfg.sync_interval) +
         ", \"seed\": " + std::to_string(cfg.seed) +
         ", \"max_steps\": " + std::to_string(cfg.max_steps);
    if (start) s += ", \"start\": [" + std::to_string(start->i) + ", " + std::to_string(start->j) + "]";
    if (target)
        s += ", \"target\": [" + std::to_string(target->i) + ", " + std::to_string(target->j) + "]";
    s += ", \"scene\": \"" + scene_name + "\"}\n}\n";
    return s;
}

inline Checkpoint checkpoint_parse(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DqnError(std::string("checkpoint: ") + e.what());
    }
    Checkpoint cp;
    try {
        if (j.at("version").get<int>() != 1) throw DqnError("unsupported checkpoint version");
        cp.mlp.dims = j.at("dims").get<std::vector<int>>();
        if (cp.mlp.dims.size() < 2) throw DqnError("checkpoint dims too short");
        const auto& jw = j.at("weights");
        const auto& jb = j.at("biases");
        if (jw.size() + 1 != cp.mlp.dims.size() || jb.size() + 1 != cp.mlp.dims.size())
            throw DqnError("checkpoint layer count mismatch");
        for (std::size_t l = 0; l + 1 < cp.mlp.dims.size(); ++l) {
            detail::Mat w(cp.mlp.dims[l], cp.mlp.dims[l + 1]);
            auto flat = jw[l].get<std::vector<double>>();
            if (flat.size() != w.a.size()) throw DqnError("checkpoint weight size mismatch");
            w.a = std::move(flat);
            cp.mlp.weights.push_back(std::move(w));
            auto b = jb[l].get<std::vector<double>>();
            if (b.size() != static_cast<std::size_t>(cp.mlp.dims[l + 1]))
                throw DqnError("checkpoint bias size mismatch");
            cp.mlp.biases.push_back(std::move(b));
        }
        const auto& jn = j.at("normalization");
        cp.norm.coord_x = jn.at("coord_x").get<double>();
        cp.norm.coord_y = jn.at("coord_y").get<double>();
        cp.norm.theta_re = jn.at("theta_re").get<double>();
        cp.norm.theta_im = jn.at("theta_im").get<double>();
        cp.norm.delay = jn.at("delay").get<double>();
        const auto& jc = j.at("config");
        cp.config.gamma = jc.at("gamma").get<double>();
        cp.config.epsilon = jc.at("epsilon").get<double>();
        cp.config.episodes = jc.at("episodes").get<int>();
        cp.config.hidden = jc.at("hidden").get<int>();
        cp.config.lr = jc.at("lr").get<double>();
        cp.config.replay_capacity = jc.at("replay_capacity").get<std::size_t>();
        cp.config.batch_size = jc.at("batch_size").get<int>();
        cp.config.sync_interval = jc.at("sync_interval").get<int>();
        cp.config.seed = jc.at("seed").get<std::uint64_t>();
        cp.config.max_steps = jc.at("max_steps").get<int>();
        if (jc.contains("start")) cp.start = Cell{jc["start"][0].get<int>(), jc["start"][1].get<int>()};
        if (jc.contains("target"))
            cp.target = Cell{jc["target"][0].get<int>(), jc["target"][1].get<int>()};
        if (jc.contains("scene")) cp.scene_name = jc["scene"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DqnError(std::string("checkpoint: ") + e.what());
    }
    return cp;
}

}  // namespace raydar::dqn
