// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef SSEP_NN_HPP
#define SSEP_NN_HPP

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ssep/rng.hpp"

// Differentiable building blocks over row-major-in-time matrices
// (row = time frame, column = feature). Every block caches what its
// backward pass needs during forward, accumulates parameter gradients
// in place, and returns the input gradient. Forward/backward on one
// instance is single-threaded; distinct instances are independent.

namespace ssep {

using Tensor2 = Eigen::MatrixXd;

// (start, length) row ranges treated as independent sequences by
// recurrent blocks. Empty list means one span covering all rows.
using Spans = std::vector<std::pair<long, long>>;

// Named view over block-owned parameter and gradient storage. Buffers
// (running statistics) carry no gradient and are skipped by optimizers
// but included in checkpoints.
struct ParamRef {
    std::string path;
    Tensor2* value = nullptr;
    Tensor2* grad = nullptr;  // null for buffers
    bool trainable = true;
};

class ParamSet {
public:
    void add(const std::string& path, Tensor2* value, Tensor2* grad);
    void add_buffer(const std::string& path, Tensor2* value);
    const std::vector<ParamRef>& entries() const { return entries_; }
    ParamRef& at(const std::string& path);
    void zero_grad();
    long trainable_count() const;

private:
    std::vector<ParamRef> entries_;
};

struct Linear {
    Tensor2 w, b;    // w: in x out, b: 1 x out
    Tensor2 gw, gb;

    void init(long in, long out, Rng& rng);
    Tensor2 forward(const Tensor2& x);
    Tensor2 backward(const Tensor2& grad_out);
    void collect(const std::string& prefix, ParamSet& ps);

private:
    Tensor2 x_;
};

// Per-feature normalization over all rows of the batch. Training mode
// uses biased batch variance and folds it into the running statistics
// with the given momentum; inference mode reads the running statistics.
struct BatchNorm {
    Tensor2 gamma, beta;              // 1 x features
    Tensor2 running_mean, running_var;
    Tensor2 ggamma, gbeta;
    double momentum = 0.1;
    double eps = 1e-5;
    bool training = true;

    void init(long features);
    Tensor2 forward(const Tensor2& x);
    Tensor2 backward(const Tensor2& grad_out);
    void collect(const std::string& prefix, ParamSet& ps);

private:
    Tensor2 xhat_;
    Eigen::RowVectorXd inv_std_;
    bool fwd_was_training_ = true;
};

enum class Act { tanh_fn, relu };

struct Activation {
    Act kind = Act::relu;

    explicit Activation(Act k = Act::relu) : kind(k) {}
    Tensor2 forward(const Tensor2& x);
    Tensor2 backward(const Tensor2& grad_out);

private:
    Tensor2 cache_;  // tanh output, or relu pass-through mask
};

// Stacked bidirectional LSTM. Gate layout in the fused matrices is
// [input, forget, candidate, output]; one bias vector per direction.
// Initial hidden and cell states are zero for every span. Output is the
// framewise concatenation [forward state, backward state] (width
// 2*hidden); layers beyond the first consume the previous layer output.
struct BiLstm {
    struct Cell {
        Tensor2 w_ih, w_hh, b;  // in x 4h, h x 4h, 1 x 4h
        Tensor2 gw_ih, gw_hh, gb;
    };

    int n_layers = 0;
    long input_size = 0;
    long hidden = 0;
    std::vector<Cell> fwd, bwd;  // one per layer

    void init(int layers, long input, long hidden_size, Rng& rng);
    Tensor2 forward(const Tensor2& x, const Spans& spans = {});
    Tensor2 backward(const Tensor2& grad_out);
    void collect(const std::string& prefix, ParamSet& ps);
    static long param_count(int layers, long input, long hidden_size);

private:
    struct DirCache {
        Tensor2 x;                    // layer input
        Tensor2 gates;                // T x 4h post-nonlinearity (i,f,g,o)
        Tensor2 c, tanh_c, h_prev, c_prev;
    };
    std::vector<DirCache> cache_fwd_, cache_bwd_;
    Spans spans_;

    Tensor2 run_dir(Cell& cell, DirCache& cache, const Tensor2& x, bool reverse);
    Tensor2 back_dir(Cell& cell, const DirCache& cache, const Tensor2& grad_h, bool reverse);
};

// Minimal forward/backward interface for the finite-difference harness.
struct GradBlock {
    virtual ~GradBlock() = default;
    virtual Tensor2 forward(const Tensor2& x) = 0;
    virtual Tensor2 backward(const Tensor2& grad_out) = 0;
    virtual void collect(ParamSet& ps) = 0;
};

// Central-difference check of every parameter and input entry against
// the analytic gradients, under a fixed random linear readout of the
// output. Returns the maximum relative error
// |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(GradBlock& block, const Tensor2& input, double eps = 1e-5,
                  uint64_t seed = 0x5eed);

}  // namespace ssep

#endif
