#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dguard/dataset.hpp"
#include "dguard/geometry.hpp"
#include "dguard/local_model.hpp"
#include "dguard/rng.hpp"

namespace dguard {

struct TrainConfig {
    double learning_rate = 0.5;
    int epochs = 150;
    std::uint64_t seed = 7;
};

struct TrainStats {
    int skipped_boxes = 0;             // ground-truth boxes whose mapped feature box was empty
    std::vector<double> epoch_loss;    // loss after each epoch (non-increasing)
};

namespace detail {

struct TrainSample {
    std::size_t image_idx = 0;
    std::vector<std::size_t> cells;  // descriptor indices within the image
    int label = 0;
};

// Cross-entropy of the softmax over ReLU-aggregated logits. The aggregation
// mirrors rch (clip to [0, inf), sum over the cell set) with the sum scaled
// by the cell count inside the softmax: a temperature that keeps the
// optimum's per-cell logits O(1) regardless of box size, so the binarizing
// threshold acts on a stable per-cell scale. Fills grad_w / grad_b when
// requested; returns the mean loss.
inline double loss_and_grad(const LocalModel& model,
                            const std::vector<std::vector<double>>& descriptors,
                            const std::vector<TrainSample>& samples, double* grad_w, double* grad_b) {
    const int F = model.feature_dim();
    const int K = model.head_classes();
    if (grad_w) {
        std::fill(grad_w, grad_w + static_cast<std::size_t>(K) * F, 0.0);
        std::fill(grad_b, grad_b + K, 0.0);
    }

    double total = 0.0;
    std::vector<double> v(K), p(K);
    std::vector<double> z;
    for (const auto& sample : samples) {
        const std::vector<double>& desc = descriptors[sample.image_idx];
        const std::size_t n_cells = sample.cells.size();
        const double inv_cells = 1.0 / static_cast<double>(n_cells);
        z.assign(n_cells * K, 0.0);
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t k = 0; k < n_cells; ++k) {
            const double* f = desc.data() + sample.cells[k] * F;
            for (int c = 0; c < K; ++c) {
                double zc = model.bias[c];
                const double* w = model.class_weights(c);
                for (int d = 0; d < F; ++d) zc += w[d] * f[d];
                z[k * K + c] = zc;
                if (zc > 0) v[c] += zc;
            }
        }
        for (int c = 0; c < K; ++c) v[c] *= inv_cells;

        double vmax = v[0];
        for (int c = 1; c < K; ++c) vmax = std::max(vmax, v[c]);
        double denom = 0.0;
        for (int c = 0; c < K; ++c) denom += std::exp(v[c] - vmax);
        for (int c = 0; c < K; ++c) p[c] = std::exp(v[c] - vmax) / denom;
        total += -(v[sample.label] - vmax - std::log(denom));

        if (grad_w) {
            for (std::size_t k = 0; k < n_cells; ++k) {
                const double* f = desc.data() + sample.cells[k] * F;
                for (int c = 0; c < K; ++c) {
                    if (z[k * K + c] <= 0) continue;
                    const double coef = (p[c] - (c == sample.label ? 1.0 : 0.0)) * inv_cells;
                    double* gw = grad_w + static_cast<std::size_t>(c) * F;
                    for (int d = 0; d < F; ++d) gw[d] += coef * f[d];
                    grad_b[c] += coef;
                }
            }
        }
    }
    const double inv_n = samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size());
    if (grad_w) {
        for (std::size_t k = 0; k < static_cast<std::size_t>(K) * F; ++k) grad_w[k] *= inv_n;
        for (int c = 0; c < K; ++c) grad_b[c] *= inv_n;
    }
    return total * inv_n;
}

} // namespace detail

// Trains the linear head by full-batch gradient descent with a backtracking
// step: per ground-truth box, cross-entropy of the clip-aggregated logits
// over its mapped feature box against the label; per image, the aggregate of
// all cells outside every feature box against the background class.
// Deterministic given the seed; the recorded loss never increases.
inline LocalModel train_local_model(const Dataset& ds, int r, int s, int num_classes,
                                    const TrainConfig& cfg, TrainStats* stats = nullptr) {
    if (ds.images.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& ai : ds.images)
        for (const auto& obj : ai.objects)
            if (obj.label < 0 || obj.label >= num_classes)
                throw std::invalid_argument("train: label out of range in image " + ai.id);

    LocalModel model = make_local_model(r, s, num_classes, ds.images.front().image.channels);
    Rng rng(cfg.seed);
    for (auto& w : model.weights) w = rng.uniform(-0.01, 0.01);
    // Positive initial biases keep every class above the clip floor at the
    // start; a class whose logits begin all-negative would never receive
    // gradient through the clipped aggregation.
    for (auto& b : model.bias) b = 0.1;
    if (cfg.epochs == 0) {
        if (stats) stats->skipped_boxes = 0;
        return model;  // no training: the seeded initialization as-is
    }

    // Precompute descriptor maps and cell sets.
    const int F = model.feature_dim();
    std::vector<std::vector<double>> descriptors(ds.images.size());
    std::vector<detail::TrainSample> samples;
    int skipped = 0;
    for (std::size_t m = 0; m < ds.images.size(); ++m) {
        const AnnotatedImage& ai = ds.images[m];
        const ReceptiveFieldConfig rf = model.rf_for(ai.image);
        const int X = rf.cells_x(), Y = rf.cells_y();
        auto& desc = descriptors[m];
        desc.resize(static_cast<std::size_t>(X) * Y * F);
        for (int i = 0; i < X; ++i)
            for (int j = 0; j < Y; ++j)
                model.window_descriptor(ai.image, i * rf.s, j * rf.s,
                                        desc.data() + (static_cast<std::size_t>(i) * Y + j) * F);

        std::vector<std::uint8_t> inside(static_cast<std::size_t>(X) * Y, 0);
        for (const auto& obj : ai.objects) {
            const FeatureBox fb = map_box_to_feature_space(obj.box, rf);
            if (fb.empty()) { ++skipped; continue; }
            detail::TrainSample sample;
            sample.image_idx = m;
            sample.label = obj.label;
            for (int i = fb.i_min; i < fb.i_max; ++i)
                for (int j = fb.j_min; j < fb.j_max; ++j) {
                    const std::size_t cell = static_cast<std::size_t>(i) * Y + j;
                    sample.cells.push_back(cell);
                    inside[cell] = 1;
                }
            samples.push_back(std::move(sample));
        }
        detail::TrainSample bg;
        bg.image_idx = m;
        bg.label = num_classes;  // background class
        for (std::size_t cell = 0; cell < inside.size(); ++cell)
            if (!inside[cell]) bg.cells.push_back(cell);
        if (!bg.cells.empty()) samples.push_back(std::move(bg));
    }
    if (stats) stats->skipped_boxes = skipped;
    if (samples.empty()) throw std::invalid_argument("train: no usable samples");

    const int K = model.head_classes();

    // Standardize descriptor dimensions for the descent (channel means sit
    // near 0.4 while variances sit near 1e-4; the raw problem is too badly
    // conditioned for plain gradient steps). The affine map folds back into
    // the linear head afterwards, so the returned model sees raw features.
    std::vector<double> mu(F, 0.0), sigma(F, 0.0);
    {
        long long cells = 0;
        for (const auto& desc : descriptors) {
            const std::size_t n = desc.size() / F;
            for (std::size_t k = 0; k < n; ++k)
                for (int d = 0; d < F; ++d) mu[d] += desc[k * F + d];
            cells += static_cast<long long>(n);
        }
        for (int d = 0; d < F; ++d) mu[d] /= static_cast<double>(cells);
        for (const auto& desc : descriptors) {
            const std::size_t n = desc.size() / F;
            for (std::size_t k = 0; k < n; ++k)
                for (int d = 0; d < F; ++d) {
                    const double delta = desc[k * F + d] - mu[d];
                    sigma[d] += delta * delta;
                }
        }
        for (int d = 0; d < F; ++d) sigma[d] = std::max(std::sqrt(sigma[d] / cells), 1e-8);
    }
    for (auto& desc : descriptors) {
        const std::size_t n = desc.size() / F;
        for (std::size_t k = 0; k < n; ++k)
            for (int d = 0; d < F; ++d) desc[k * F + d] = (desc[k * F + d] - mu[d]) / sigma[d];
    }
    // Lift the initialization into standardized coordinates.
    for (int c = 0; c < K; ++c) {
        double* w = model.class_weights(c);
        double shift = 0.0;
        for (int d = 0; d < F; ++d) {
            shift += w[d] * mu[d];
            w[d] *= sigma[d];
        }
        model.bias[c] += shift;
    }
    std::vector<double> grad_w(static_cast<std::size_t>(K) * F), grad_b(K);
    std::vector<double> saved_w, saved_b;
    // Backtracking step with growth: halve until the step does not increase
    // the loss, then let it expand again. The recorded loss is monotone.
    double step = cfg.learning_rate;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double loss =
            detail::loss_and_grad(model, descriptors, samples, grad_w.data(), grad_b.data());
        if (!std::isfinite(loss)) throw std::runtime_error("train: non-finite loss");

        saved_w = model.weights;
        saved_b = model.bias;
        double accepted = loss;
        for (int attempt = 0; attempt < 60; ++attempt) {
            for (std::size_t k = 0; k < grad_w.size(); ++k)
                model.weights[k] = saved_w[k] - step * grad_w[k];
            for (int c = 0; c < K; ++c) model.bias[c] = saved_b[c] - step * grad_b[c];
            const double trial = detail::loss_and_grad(model, descriptors, samples, nullptr, nullptr);
            if (std::isfinite(trial) && trial <= loss) {
                accepted = trial;
                step *= 2.0;
                break;
            }
            step *= 0.5;
            if (attempt == 59) {  // no improving step; stay put
                model.weights = saved_w;
                model.bias = saved_b;
            }
        }
        if (stats) stats->epoch_loss.push_back(accepted);
    }

    // Fold the standardization back into the head.
    for (int c = 0; c < K; ++c) {
        double* w = model.class_weights(c);
        double shift = 0.0;
        for (int d = 0; d < F; ++d) {
            w[d] /= sigma[d];
            shift += w[d] * mu[d];
        }
        model.bias[c] -= shift;
    }

    // Pin the logit scale: a uniform positive rescaling of the head keeps
    // every argmax and every clipped-sum comparison, and makes the mean
    // true-class logit over training box cells equal 1 so the binarizing
    // threshold means the same thing across retrains.
    {
        double sum = 0.0;
        long long n = 0;
        for (const auto& sample : samples) {
            if (sample.label >= num_classes) continue;  // background aggregate
            const auto& desc = descriptors[sample.image_idx];
            for (std::size_t cell : sample.cells) {
                // Descriptors are standardized in place; undo per cell.
                double z = model.bias[sample.label];
                const double* w = model.class_weights(sample.label);
                for (int d = 0; d < F; ++d) z += w[d] * (desc[cell * F + d] * sigma[d] + mu[d]);
                if (z > 0) sum += z;
                ++n;
            }
        }
        const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
        if (mean > 1e-12) {
            const double scale = 1.0 / mean;
            for (auto& w : model.weights) w *= scale;
            for (auto& b : model.bias) b *= scale;
        }
    }
    return model;
}

// Fraction of ground-truth boxes whose clip-aggregated window classification
// recovers the label; the trainer's working accuracy measure.
inline double box_classification_accuracy(const LocalModel& model, const Dataset& ds) {
    long correct = 0, total = 0;
    for (const auto& ai : ds.images) {
        if (ai.objects.empty()) continue;
        const LocalLogitsMap logits = extract_local_logits(ai.image, model);
        for (const auto& obj : ai.objects) {
            const FeatureBox fb = map_box_to_feature_space(obj.box, logits.cfg);
            if (fb.empty()) continue;
            ++total;
            if (rch(logits, fb).label == obj.label) ++correct;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

} // namespace dguard
