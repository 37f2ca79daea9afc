#include "gar/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace gar {

GradBuffers zeros_like(const ParamRefs& params) {
    GradBuffers g;
    g.reserve(params.size());
    for (const auto& p : params) g.emplace_back(p.size(), 0.0);
    return g;
}

void zero_buffers(GradBuffers& g) {
    for (auto& t : g) std::fill(t.begin(), t.end(), 0.0);
}

Velocity::Velocity(const ParamRefs& params) {
    bufs_.reserve(params.size());
    for (const auto& p : params) bufs_.emplace_back(p.size(), 0.0);
}

void sgd_momentum_step(ParamRefs& params, const GradBuffers& grads, Velocity& vel, double lr,
                       double mu) {
    if (params.size() != grads.size() || params.size() != vel.bufs_.size()) {
        throw ShapeError("sgd_momentum_step: tensor count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        const auto& g = grads[i];
        auto& v = vel.bufs_[i];
        if (p.size() != g.size() || p.size() != v.size()) {
            throw ShapeError("sgd_momentum_step: tensor " + std::to_string(i) + " shape " +
                             std::to_string(p.size()) + " vs grad " + std::to_string(g.size()));
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = mu * v[j] - lr * g[j];
            p[j] += v[j];
        }
    }
}

double clip_global_norm(GradBuffers& grads, double clip) {
    double sq = 0.0;
    for (const auto& t : grads) {
        for (double x : t) sq += x * x;
    }
    double norm = std::sqrt(sq);
    if (norm > clip && norm > 0.0) {
        double scale = clip / norm;
        for (auto& t : grads) {
            for (double& x : t) x *= scale;
        }
    }
    return norm;
}

std::vector<EpochLog> run_epochs(std::size_t num_scenes, const TrainHyper& hyper,
                                 ParamRefs params, const BatchGradFn& batch_fn,
                                 const std::string& stage_name) {
    if (num_scenes == 0) throw DomainError(stage_name + ": empty training set");
    if (hyper.batch_size == 0) throw ConfigError(stage_name + ": batch_size must be >= 1");

    std::vector<EpochLog> log;
    Velocity vel(params);
    GradBuffers grads = zeros_like(params);
    Rng shuffle_rng(hyper.shuffle_seed);

    std::vector<std::size_t> order(num_scenes);
    std::iota(order.begin(), order.end(), 0);

    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;

    for (std::size_t epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        // Fisher-Yates from the shared stream; epoch order depends only on
        // shuffle_seed.
        for (std::size_t i = num_scenes; i > 1; --i) {
            std::size_t j = shuffle_rng.below(i);
            std::swap(order[i - 1], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t correct = 0, total = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < num_scenes; start += hyper.batch_size, ++batch_index) {
            std::size_t end = std::min(start + hyper.batch_size, num_scenes);
            std::span<const std::size_t> batch(order.data() + start, end - start);
            zero_buffers(grads);
            BatchStats stats = batch_fn(batch, grads);
            if (!std::isfinite(stats.loss_sum)) {
                throw Error(stage_name + ": non-finite loss at epoch " + std::to_string(epoch) +
                            " batch " + std::to_string(batch_index));
            }
            loss_sum += stats.loss_sum;
            correct += stats.correct;
            total += stats.total;

            const double inv = 1.0 / static_cast<double>(batch.size());
            for (auto& t : grads) {
                for (double& x : t) x *= inv;
            }
            if (hyper.clip_norm) clip_global_norm(grads, *hyper.clip_norm);
            sgd_momentum_step(params, grads, vel, hyper.learning_rate, hyper.momentum);
        }

        EpochLog row;
        row.epoch = epoch;
        row.loss = loss_sum / static_cast<double>(num_scenes);
        row.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.push_back(row);

        if (hyper.early_stop) {
            if (row.loss < best_loss - hyper.early_stop->min_delta) {
                best_loss = row.loss;
                stale_epochs = 0;
            } else if (++stale_epochs >= hyper.early_stop->patience) {
                break;
            }
        }
    }
    return log;
}

void append_log_rows(std::string& out, const std::string& stage, std::span<const EpochLog> log) {
    for (const EpochLog& row : log) {
        out += stage;
        out += '\t';
        out += std::to_string(row.epoch);
        out += '\t';
        out += format_real(row.loss);
        out += '\t';
        out += format_real(row.accuracy);
        out += '\n';
    }
}

} // namespace gar
