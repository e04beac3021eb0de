// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ssep/nn.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace ssep {

void ParamSet::add(const std::string& path, Tensor2* value, Tensor2* grad) {
    for (const auto& e : entries_) {
        if (e.path == path) throw std::invalid_argument("ParamSet: duplicate path " + path);
    }
    if (grad->rows() != value->rows() || grad->cols() != value->cols()) {
        throw std::invalid_argument("ParamSet: gradient shape mismatch at " + path);
    }
    entries_.push_back({path, value, grad, true});
}

void ParamSet::add_buffer(const std::string& path, Tensor2* value) {
    for (const auto& e : entries_) {
        if (e.path == path) throw std::invalid_argument("ParamSet: duplicate path " + path);
    }
    entries_.push_back({path, value, nullptr, false});
}

ParamRef& ParamSet::at(const std::string& path) {
    for (auto& e : entries_) {
        if (e.path == path) return e;
    }
    throw std::out_of_range("ParamSet: no parameter " + path);
}

void ParamSet::zero_grad() {
    for (auto& e : entries_) {
        if (e.grad) e.grad->setZero();
    }
}

long ParamSet::trainable_count() const {
    long n = 0;
    for (const auto& e : entries_) {
        if (e.trainable) n += e.value->size();
    }
    return n;
}

void Linear::init(long in, long out, Rng& rng) {
    const double k = 1.0 / std::sqrt(static_cast<double>(in));
    w.resize(in, out);
    for (long i = 0; i < in; ++i) {
        for (long j = 0; j < out; ++j) w(i, j) = rng.uniform(-k, k);
    }
    b = Tensor2::Zero(1, out);
    gw = Tensor2::Zero(in, out);
    gb = Tensor2::Zero(1, out);
}

Tensor2 Linear::forward(const Tensor2& x) {
    if (x.cols() != w.rows()) throw std::invalid_argument("linear: input width mismatch");
    x_ = x;
    return (x * w).rowwise() + b.row(0);
}

Tensor2 Linear::backward(const Tensor2& grad_out) {
    gw += x_.transpose() * grad_out;
    gb.row(0) += grad_out.colwise().sum();
    return grad_out * w.transpose();
}

void Linear::collect(const std::string& prefix, ParamSet& ps) {
    ps.add(prefix + ".w", &w, &gw);
    ps.add(prefix + ".b", &b, &gb);
}

void BatchNorm::init(long features) {
    gamma = Tensor2::Ones(1, features);
    beta = Tensor2::Zero(1, features);
    running_mean = Tensor2::Zero(1, features);
    running_var = Tensor2::Ones(1, features);
    ggamma = Tensor2::Zero(1, features);
    gbeta = Tensor2::Zero(1, features);
}

Tensor2 BatchNorm::forward(const Tensor2& x) {
    if (x.cols() != gamma.cols()) throw std::invalid_argument("batch_norm: width mismatch");
    fwd_was_training_ = training;
    if (training) {
        if (x.rows() < 2) {
            throw std::invalid_argument("batch_norm: training mode needs at least 2 rows");
        }
        const double n = static_cast<double>(x.rows());
        Eigen::RowVectorXd mean = x.colwise().mean();
        Eigen::RowVectorXd var =
            ((x.rowwise() - mean).array().square().colwise().sum() / n).matrix();
        inv_std_ = (var.array() + eps).rsqrt().matrix();
        xhat_ = (x.rowwise() - mean).array().rowwise() * inv_std_.array();
        running_mean.row(0) = (1.0 - momentum) * running_mean.row(0) + momentum * mean;
        running_var.row(0) = (1.0 - momentum) * running_var.row(0) + momentum * var;
    } else {
        inv_std_ = (running_var.row(0).array() + eps).rsqrt().matrix();
        xhat_ = (x.rowwise() - running_mean.row(0)).array().rowwise() * inv_std_.array();
    }
    return (xhat_.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
}

Tensor2 BatchNorm::backward(const Tensor2& grad_out) {
    ggamma.row(0) += (grad_out.array() * xhat_.array()).colwise().sum().matrix();
    gbeta.row(0) += grad_out.colwise().sum();
    Tensor2 gxhat = grad_out.array().rowwise() * gamma.row(0).array();
    if (!fwd_was_training_) {
        return gxhat.array().rowwise() * inv_std_.array();
    }
    const double n = static_cast<double>(grad_out.rows());
    Eigen::RowVectorXd sum_g = gxhat.colwise().sum();
    Eigen::RowVectorXd sum_gx = (gxhat.array() * xhat_.array()).colwise().sum().matrix();
    Tensor2 gx = (gxhat * n).array().rowwise() - sum_g.array();
    gx.array() -= xhat_.array().rowwise() * sum_gx.array();
    gx.array().rowwise() *= (inv_std_ / n).array();
    return gx;
}

void BatchNorm::collect(const std::string& prefix, ParamSet& ps) {
    ps.add(prefix + ".gamma", &gamma, &ggamma);
    ps.add(prefix + ".beta", &beta, &gbeta);
    ps.add_buffer(prefix + ".running_mean", &running_mean);
    ps.add_buffer(prefix + ".running_var", &running_var);
}

Tensor2 Activation::forward(const Tensor2& x) {
    if (kind == Act::tanh_fn) {
        cache_ = x.array().tanh().matrix();
        return cache_;
    }
    cache_ = (x.array() > 0.0).cast<double>().matrix();
    return x.cwiseProduct(cache_);
}

Tensor2 Activation::backward(const Tensor2& grad_out) {
    if (kind == Act::tanh_fn) {
        return grad_out.array() * (1.0 - cache_.array().square());
    }
    return grad_out.cwiseProduct(cache_);
}

namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void init_lstm_matrix(Tensor2& m, long rows, long cols, double k, Rng& rng) {
    m.resize(rows, cols);
    for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) m(i, j) = rng.uniform(-k, k);
    }
}

}  // namespace

void BiLstm::init(int layers, long input, long hidden_size, Rng& rng) {
    if (layers < 1) throw std::invalid_argument("bilstm: need at least one layer");
    n_layers = layers;
    input_size = input;
    hidden = hidden_size;
    fwd.assign(layers, {});
    bwd.assign(layers, {});
    for (int l = 0; l < layers; ++l) {
        const long in = l == 0 ? input : 2 * hidden;
        const double k_ih = 1.0 / std::sqrt(static_cast<double>(in));
        const double k_hh = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (Cell* cell : {&fwd[l], &bwd[l]}) {
            init_lstm_matrix(cell->w_ih, in, 4 * hidden, k_ih, rng);
            init_lstm_matrix(cell->w_hh, hidden, 4 * hidden, k_hh, rng);
            cell->b = Tensor2::Zero(1, 4 * hidden);
            cell->gw_ih = Tensor2::Zero(in, 4 * hidden);
            cell->gw_hh = Tensor2::Zero(hidden, 4 * hidden);
            cell->gb = Tensor2::Zero(1, 4 * hidden);
        }
    }
}

long BiLstm::param_count(int layers, long input, long hidden_size) {
    long total = 0;
    for (int l = 0; l < layers; ++l) {
        const long in = l == 0 ? input : 2 * hidden_size;
        total += 2 * (in * 4 * hidden_size + hidden_size * 4 * hidden_size + 4 * hidden_size);
    }
    return total;
}

// One direction over one already-span-restricted input block. Rows of
// the caches are in processing order (reversed spans store time-reversed
// rows); backward undoes the ordering the same way.
Tensor2 BiLstm::run_dir(Cell& cell, DirCache& cache, const Tensor2& x, bool reverse) {
    const long T = x.rows();
    const long h = hidden;
    cache.x = x;
    cache.gates.resize(T, 4 * h);
    cache.c.resize(T, h);
    cache.tanh_c.resize(T, h);
    cache.h_prev.resize(T, h);
    cache.c_prev.resize(T, h);

    Tensor2 out(T, h);
    Eigen::RowVectorXd h_state = Eigen::RowVectorXd::Zero(h);
    Eigen::RowVectorXd c_state = Eigen::RowVectorXd::Zero(h);
    for (long step = 0; step < T; ++step) {
        const long t = reverse ? T - 1 - step : step;
        cache.h_prev.row(step) = h_state;
        cache.c_prev.row(step) = c_state;
        Eigen::RowVectorXd pre =
            x.row(t) * cell.w_ih + h_state * cell.w_hh + cell.b.row(0);
        for (long j = 0; j < h; ++j) {
            const double i = sigmoid(pre[j]);
            const double f = sigmoid(pre[h + j]);
            const double g = std::tanh(pre[2 * h + j]);
            const double o = sigmoid(pre[3 * h + j]);
            const double c = f * c_state[j] + i * g;
            cache.gates(step, j) = i;
            cache.gates(step, h + j) = f;
            cache.gates(step, 2 * h + j) = g;
            cache.gates(step, 3 * h + j) = o;
            cache.c(step, j) = c;
            const double tc = std::tanh(c);
            cache.tanh_c(step, j) = tc;
            c_state[j] = c;
            h_state[j] = o * tc;
        }
        out.row(t) = h_state;
    }
    return out;
}

Tensor2 BiLstm::back_dir(Cell& cell, const DirCache& cache, const Tensor2& grad_h, bool reverse) {
    const long T = cache.x.rows();
    const long h = hidden;
    Tensor2 grad_x = Tensor2::Zero(T, cache.x.cols());
    Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(h);
    Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(h);
    Eigen::RowVectorXd dpre(4 * h);
    for (long step = T - 1; step >= 0; --step) {
        const long t = reverse ? T - 1 - step : step;
        for (long j = 0; j < h; ++j) {
            const double i = cache.gates(step, j);
            const double f = cache.gates(step, h + j);
            const double g = cache.gates(step, 2 * h + j);
            const double o = cache.gates(step, 3 * h + j);
            const double tc = cache.tanh_c(step, j);
            const double dh = grad_h(t, j) + dh_next[j];
            const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            dpre[j] = dc * g * i * (1.0 - i);
            dpre[h + j] = dc * cache.c_prev(step, j) * f * (1.0 - f);
            dpre[2 * h + j] = dc * i * (1.0 - g * g);
            dpre[3 * h + j] = dh * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        cell.gw_ih += cache.x.row(t).transpose() * dpre;
        cell.gw_hh += cache.h_prev.row(step).transpose() * dpre;
        cell.gb.row(0) += dpre;
        grad_x.row(t) += dpre * cell.w_ih.transpose();
        dh_next = dpre * cell.w_hh.transpose();
    }
    return grad_x;
}

Tensor2 BiLstm::forward(const Tensor2& x, const Spans& spans) {
    if (x.cols() != input_size) throw std::invalid_argument("bilstm: input width mismatch");
    spans_ = spans.empty() ? Spans{{0, x.rows()}} : spans;
    long covered = 0;
    for (const auto& [start, len] : spans_) {
        if (start != covered || len <= 0) {
            throw std::invalid_argument("bilstm: spans must tile the rows in order");
        }
        covered += len;
    }
    if (covered != x.rows()) throw std::invalid_argument("bilstm: spans do not cover input");

    const std::size_t n_spans = spans_.size();
    cache_fwd_.assign(static_cast<std::size_t>(n_layers) * n_spans, {});
    cache_bwd_.assign(static_cast<std::size_t>(n_layers) * n_spans, {});

    Tensor2 cur = x;
    for (int l = 0; l < n_layers; ++l) {
        Tensor2 next(cur.rows(), 2 * hidden);
        for (std::size_t s = 0; s < n_spans; ++s) {
            const auto [start, len] = spans_[s];
            const Tensor2 block = cur.middleRows(start, len);
            const std::size_t ci = static_cast<std::size_t>(l) * n_spans + s;
            next.middleRows(start, len).leftCols(hidden) =
                run_dir(fwd[l], cache_fwd_[ci], block, false);
            next.middleRows(start, len).rightCols(hidden) =
                run_dir(bwd[l], cache_bwd_[ci], block, true);
        }
        cur = std::move(next);
    }
    return cur;
}

Tensor2 BiLstm::backward(const Tensor2& grad_out) {
    const std::size_t n_spans = spans_.size();
    Tensor2 cur = grad_out;
    for (int l = n_layers - 1; l >= 0; --l) {
        const long in_width = l == 0 ? input_size : 2 * hidden;
        Tensor2 prev = Tensor2::Zero(cur.rows(), in_width);
        for (std::size_t s = 0; s < n_spans; ++s) {
            const auto [start, len] = spans_[s];
            const std::size_t ci = static_cast<std::size_t>(l) * n_spans + s;
            prev.middleRows(start, len) += back_dir(
                fwd[l], cache_fwd_[ci], cur.middleRows(start, len).leftCols(hidden), false);
            prev.middleRows(start, len) += back_dir(
                bwd[l], cache_bwd_[ci], cur.middleRows(start, len).rightCols(hidden), true);
        }
        cur = std::move(prev);
    }
    return cur;
}

void BiLstm::collect(const std::string& prefix, ParamSet& ps) {
    for (int l = 0; l < n_layers; ++l) {
        for (auto [cell, dir] : {std::pair{&fwd[l], "fwd"}, std::pair{&bwd[l], "bwd"}}) {
            const std::string base = prefix + ".l" + std::to_string(l) + "." + dir;
            ps.add(base + ".w_ih", &cell->w_ih, &cell->gw_ih);
            ps.add(base + ".w_hh", &cell->w_hh, &cell->gw_hh);
            ps.add(base + ".b", &cell->b, &cell->gb);
        }
    }
}

double grad_check(GradBlock& block, const Tensor2& input, double eps, uint64_t seed) {
    Rng rng(seed);
    Tensor2 x = input;
    Tensor2 y0 = block.forward(x);
    Tensor2 proj(y0.rows(), y0.cols());
    for (long i = 0; i < proj.rows(); ++i) {
        for (long j = 0; j < proj.cols(); ++j) proj(i, j) = rng.uniform(-1.0, 1.0);
    }

    ParamSet ps;
    block.collect(ps);
    ps.zero_grad();
    block.forward(x);
    Tensor2 grad_x = block.backward(proj);

    const auto loss = [&](const Tensor2& y) { return (y.array() * proj.array()).sum(); };
    double max_rel = 0.0;
    const auto update = [&](double analytic, double numeric) {
        const double rel = std::abs(analytic - numeric) /
                           std::max({1.0, std::abs(analytic), std::abs(numeric)});
        max_rel = std::max(max_rel, rel);
    };

    for (const auto& e : ps.entries()) {
        if (!e.grad) continue;
        for (long i = 0; i < e.value->rows(); ++i) {
            for (long j = 0; j < e.value->cols(); ++j) {
                const double saved = (*e.value)(i, j);
                (*e.value)(i, j) = saved + eps;
                const double lp = loss(block.forward(x));
                (*e.value)(i, j) = saved - eps;
                const double lm = loss(block.forward(x));
                (*e.value)(i, j) = saved;
                update((*e.grad)(i, j), (lp - lm) / (2.0 * eps));
            }
        }
    }
    for (long i = 0; i < x.rows(); ++i) {
        for (long j = 0; j < x.cols(); ++j) {
            const double saved = x(i, j);
            x(i, j) = saved + eps;
            const double lp = loss(block.forward(x));
            x(i, j) = saved - eps;
            const double lm = loss(block.forward(x));
            x(i, j) = saved;
            update(grad_x(i, j), (lp - lm) / (2.0 * eps));
        }
    }
    return max_rel;
}

}  // namespace ssep
