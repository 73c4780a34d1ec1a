#include "puo/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "puo/errors.hpp"
#include "puo/kernels.hpp"
#include "puo/rng.hpp"

namespace puo {

const char* to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::logreg: return "logreg";
        case ClassifierKind::svm: return "svm";
        case ClassifierKind::mlp: return "mlp";
        case ClassifierKind::gbt: return "gbt";
    }
    return "?";
}

ClassifierKind classifier_from_string(const std::string& name) {
    if (name == "logreg") return ClassifierKind::logreg;
    if (name == "svm") return ClassifierKind::svm;
    if (name == "mlp") return ClassifierKind::mlp;
    if (name == "gbt") return ClassifierKind::gbt;
    throw InvalidArgument("unknown classifier: " + name);
}

void TrainOptions::validate() const {
    if (l2 < 0.0) throw InvalidArgument("l2 must be >= 0");
    if (!(lr > 0.0)) throw InvalidArgument("lr must be positive");
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (hidden_units < 1) throw InvalidArgument("hidden_units must be >= 1");
    if (trees < 1) throw InvalidArgument("trees must be >= 1");
    if (depth < 1) throw InvalidArgument("depth must be >= 1");
    if (!(shrinkage > 0.0) || shrinkage > 1.0) throw InvalidArgument("shrinkage must be in (0,1]");
}

TrainOptions default_options(ClassifierKind kind) {
    TrainOptions o;
    switch (kind) {
        case ClassifierKind::logreg:
            o.lr = 0.5;
            o.epochs = 100;
            o.l2 = 1e-4;
            break;
        case ClassifierKind::svm:
            o.lr = 0.1;
            o.epochs = 50;
            o.l2 = 1e-4;
            break;
        case ClassifierKind::mlp:
            o.lr = 1e-3;
            o.epochs = 200;
            o.batch_size = 32;
            o.hidden_units = 100;
            o.l2 = 0.0;
            break;
        case ClassifierKind::gbt:
            o.trees = 50;
            o.depth = 3;
            o.shrinkage = 0.1;
            break;
    }
    return o;
}

namespace {

struct EncodedLabels {
    std::vector<std::string> classes;  // sorted distinct
    std::vector<std::size_t> y;
};

EncodedLabels encode_labels(std::span<const std::string> labels) {
    std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) throw DegenerateLabels("need at least 2 classes, got " +
                                                    std::to_string(distinct.size()));
    EncodedLabels enc;
    enc.classes.assign(distinct.begin(), distinct.end());
    enc.y.reserve(labels.size());
    for (const auto& l : labels) {
        const auto it = std::lower_bound(enc.classes.begin(), enc.classes.end(), l);
        enc.y.push_back(static_cast<std::size_t>(it - enc.classes.begin()));
    }
    return enc;
}

void check_training_inputs(const FeatureMatrix& x, std::span<const std::string> labels) {
    if (x.rows != labels.size())
        throw InvalidArgument("feature rows and label count differ");
    if (x.rows == 0) throw InvalidArgument("empty training set");
    if (!x.all_finite()) throw NumericalFailure("non-finite feature value");
}

void shuffle_indices(std::vector<std::size_t>& order, Rng& rng) {
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
}

void softmax_inplace(std::span<double> scores) {
    const double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double& s : scores) {
        s = std::exp(s - m);
        sum += s;
    }
    for (double& s : scores) s /= sum;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::size_t argmax_lowest(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = c;
    return best;
}

// ---------------------------------------------------------------- logreg --

void linear_scores(const Matrix& w, std::span<const double> b, double wscale,
                   const FeatureMatrix& x, std::size_t row, std::span<double> out) {
    std::copy(b.begin(), b.end(), out.begin());
    const std::size_t c_count = w.rows;
    x.for_each_in_row(row, [&](std::size_t j, double v) {
        for (std::size_t c = 0; c < c_count; ++c) out[c] += wscale * w.at(c, j) * v;
    });
}

double logreg_epoch_loss(const Matrix& w, std::span<const double> b, double wscale,
                         const FeatureMatrix& x, const EncodedLabels& enc, double l2) {
    const std::size_t c_count = w.rows;
    std::vector<double> scores(c_count);
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        linear_scores(w, b, wscale, x, i, scores);
        softmax_inplace(scores);
        loss += -std::log(std::max(scores[enc.y[i]], 1e-300));
    }
    loss /= static_cast<double>(x.rows);
    if (l2 > 0.0) {
        double norm_sq = 0.0;
        for (double v : w.data) norm_sq += v * v;
        loss += 0.5 * l2 * wscale * wscale * norm_sq;
    }
    return loss;
}

void fit_logreg(Matrix& w, std::vector<double>& b, TrainMeta& meta, const FeatureMatrix& x,
                const EncodedLabels& enc, const TrainOptions& o) {
    const std::size_t c_count = enc.classes.size();
    const std::size_t n = x.rows;
    w = Matrix(c_count, x.cols);
    b.assign(c_count, 0.0);
    double wscale = 1.0;

    Rng rng(Rng::mix({o.seed, 0x1096}));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::min<std::size_t>(o.batch_size, n);
    std::vector<double> probs(batch * c_count);

    for (int epoch = 0; epoch < o.epochs; ++epoch) {
        shuffle_indices(order, rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t bs = std::min(batch, n - start);
            // probabilities at batch-start parameters
            for (std::size_t k = 0; k < bs; ++k) {
                std::span<double> p(probs.data() + k * c_count, c_count);
                linear_scores(w, b, wscale, x, order[start + k], p);
                softmax_inplace(p);
            }
            if (o.l2 > 0.0) {
                wscale *= 1.0 - o.lr * o.l2;
                if (wscale < 1e-100) {  // fold the scale back in
                    for (double& v : w.data) v *= wscale;
                    wscale = 1.0;
                }
            }
            const double step = o.lr / static_cast<double>(bs);
            for (std::size_t k = 0; k < bs; ++k) {
                const std::size_t i = order[start + k];
                const double* p = probs.data() + k * c_count;
                for (std::size_t c = 0; c < c_count; ++c) {
                    const double g = step * (p[c] - (enc.y[i] == c ? 1.0 : 0.0));
                    b[c] -= g;
                    if (g != 0.0) {
                        const double gs = g / wscale;
                        x.for_each_in_row(i, [&](std::size_t j, double v) {
                            w.at(c, j) -= gs * v;
                        });
                    }
                }
            }
        }
        meta.epochs_run = epoch + 1;
    }
    for (double& v : w.data) v *= wscale;
    meta.final_loss = logreg_epoch_loss(w, b, 1.0, x, enc, o.l2);
}

// ------------------------------------------------------------------- svm --

double svm_epoch_loss(const Matrix& w, std::span<const double> b, double wscale,
                      const FeatureMatrix& x, const EncodedLabels& enc, double l2) {
    const std::size_t c_count = w.rows;
    std::vector<double> scores(c_count);
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        linear_scores(w, b, wscale, x, i, scores);
        for (std::size_t c = 0; c < c_count; ++c) {
            const double y = enc.y[i] == c ? 1.0 : -1.0;
            loss += std::max(0.0, 1.0 - y * scores[c]);
        }
    }
    loss /= static_cast<double>(x.rows);
    double norm_sq = 0.0;
    for (double v : w.data) norm_sq += v * v;
    return loss + 0.5 * l2 * wscale * wscale * norm_sq;
}

void fit_svm(Matrix& w, std::vector<double>& b, TrainMeta& meta, const FeatureMatrix& x,
             const EncodedLabels& enc, const TrainOptions& o) {
    const std::size_t c_count = enc.classes.size();
    const std::size_t n = x.rows;
    w = Matrix(c_count, x.cols);
    b.assign(c_count, 0.0);
    double wscale = 1.0;

    Rng rng(Rng::mix({o.seed, 0x53f4}));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> scores(c_count);

    for (int epoch = 0; epoch < o.epochs; ++epoch) {
        shuffle_indices(order, rng);
        for (std::size_t i : order) {
            linear_scores(w, b, wscale, x, i, scores);
            if (o.l2 > 0.0) {
                wscale *= 1.0 - o.lr * o.l2;
                if (wscale < 1e-100) {
                    for (double& v : w.data) v *= wscale;
                    wscale = 1.0;
                }
            }
            for (std::size_t c = 0; c < c_count; ++c) {
                const double y = enc.y[i] == c ? 1.0 : -1.0;
                if (y * scores[c] < 1.0) {
                    const double g = o.lr * y;
                    b[c] += g;
                    const double gs = g / wscale;
                    x.for_each_in_row(i, [&](std::size_t j, double v) {
                        w.at(c, j) += gs * v;
                    });
                }
            }
        }
        meta.epochs_run = epoch + 1;
    }
    for (double& v : w.data) v *= wscale;
    meta.final_loss = svm_epoch_loss(w, b, 1.0, x, enc, o.l2);
}

// ------------------------------------------------------------------- mlp --

struct MlpParams {
    Matrix w1;               // D x H
    std::vector<double> b1;  // H
    Matrix w2;               // H x C
    std::vector<double> b2;  // C
};

void mlp_init(MlpParams& p, std::size_t d, std::size_t h, std::size_t c, std::uint64_t seed) {
    p.w1 = Matrix(d, h);
    p.b1.assign(h, 0.0);
    p.w2 = Matrix(h, c);
    p.b2.assign(c, 0.0);
    Rng rng(Rng::mix({seed, 0x3199}));
    const double r1 = std::sqrt(6.0 / static_cast<double>(d + h));
    for (double& v : p.w1.data) v = rng.uniform(-r1, r1);
    const double r2 = std::sqrt(6.0 / static_cast<double>(h + c));
    for (double& v : p.w2.data) v = rng.uniform(-r2, r2);
}

// Forward pass; fills hpre (H) and probability scores (C).
void mlp_forward(const MlpParams& p, const FeatureMatrix& x, std::size_t row,
                 std::span<double> hpre, std::span<double> probs) {
    std::copy(p.b1.begin(), p.b1.end(), hpre.begin());
    x.for_each_in_row(row, [&](std::size_t j, double v) {
        kernels::axpy(v, p.w1.row(j), hpre);
    });
    std::copy(p.b2.begin(), p.b2.end(), probs.begin());
    for (std::size_t hh = 0; hh < hpre.size(); ++hh) {
        const double a = hpre[hh] > 0.0 ? hpre[hh] : 0.0;
        if (a != 0.0) kernels::axpy(a, p.w2.row(hh), probs);
    }
    softmax_inplace(probs);
}

double mlp_epoch_loss(const MlpParams& p, const FeatureMatrix& x, const EncodedLabels& enc,
                      double l2) {
    const std::size_t h = p.b1.size(), c = p.b2.size();
    std::vector<double> hpre(h), probs(c);
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        mlp_forward(p, x, i, hpre, probs);
        loss += -std::log(std::max(probs[enc.y[i]], 1e-300));
    }
    loss /= static_cast<double>(x.rows);
    if (l2 > 0.0) {
        double norm_sq = 0.0;
        for (double v : p.w1.data) norm_sq += v * v;
        for (double v : p.w2.data) norm_sq += v * v;
        loss += 0.5 * l2 * norm_sq;
    }
    return loss;
}

void fit_mlp(MlpParams& p, TrainMeta& meta, const FeatureMatrix& x, const EncodedLabels& enc,
             const TrainOptions& o) {
    const std::size_t c_count = enc.classes.size();
    const std::size_t h_count = static_cast<std::size_t>(o.hidden_units);
    const std::size_t n = x.rows;
    mlp_init(p, x.cols, h_count, c_count, o.seed);

    Rng rng(Rng::mix({o.seed, 0x3150}));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::min<std::size_t>(o.batch_size, n);

    std::vector<double> hpre(h_count), probs(c_count), dh(h_count);
    Matrix g_w2(h_count, c_count);
    std::vector<double> g_b2(c_count), g_b1(h_count);
    std::vector<double> dhpre_batch(batch * h_count);

    for (int epoch = 0; epoch < o.epochs; ++epoch) {
        shuffle_indices(order, rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t bs = std::min(batch, n - start);
            std::fill(g_w2.data.begin(), g_w2.data.end(), 0.0);
            std::fill(g_b2.begin(), g_b2.end(), 0.0);
            std::fill(g_b1.begin(), g_b1.end(), 0.0);

            for (std::size_t k = 0; k < bs; ++k) {
                const std::size_t i = order[start + k];
                mlp_forward(p, x, i, hpre, probs);
                // dscore = p - onehot(y)
                probs[enc.y[i]] -= 1.0;
                for (std::size_t hh = 0; hh < h_count; ++hh) {
                    const double a = hpre[hh] > 0.0 ? hpre[hh] : 0.0;
                    if (a != 0.0) kernels::axpy(a, probs, g_w2.row(hh));
                    dh[hh] = kernels::dot(p.w2.row(hh), probs);
                }
                kernels::add(probs, g_b2);
                std::span<double> dhpre(dhpre_batch.data() + k * h_count, h_count);
                for (std::size_t hh = 0; hh < h_count; ++hh)
                    dhpre[hh] = hpre[hh] > 0.0 ? dh[hh] : 0.0;
                kernels::add(dhpre, g_b1);
            }

            const double step = o.lr / static_cast<double>(bs);
            if (o.l2 > 0.0) {
                const double shrink = 1.0 - o.lr * o.l2;
                for (double& v : p.w1.data) v *= shrink;
                for (double& v : p.w2.data) v *= shrink;
            }
            kernels::axpy(-step, g_w2.data, p.w2.data);
            kernels::axpy(-step, g_b2, p.b2);
            kernels::axpy(-step, g_b1, p.b1);
            for (std::size_t k = 0; k < bs; ++k) {
                const std::size_t i = order[start + k];
                std::span<const double> dhpre(dhpre_batch.data() + k * h_count, h_count);
                x.for_each_in_row(i, [&](std::size_t j, double v) {
                    kernels::axpy(-step * v, dhpre, p.w1.row(j));
                });
            }
        }
        meta.epochs_run = epoch + 1;
    }
    meta.final_loss = mlp_epoch_loss(p, x, enc, o.l2);
}

// ------------------------------------------------------------------- gbt --

// Dense column store of the training matrix with per-column value order.
struct ColumnStore {
    std::size_t rows = 0;
    std::vector<std::vector<double>> values;        // [col][row]
    std::vector<std::vector<std::size_t>> order;    // rows sorted by (value, row)
};

ColumnStore build_column_store(const FeatureMatrix& x) {
    ColumnStore cs;
    cs.rows = x.rows;
    cs.values.assign(x.cols, std::vector<double>(x.rows, 0.0));
    for (std::size_t r = 0; r < x.rows; ++r)
        x.for_each_in_row(r, [&](std::size_t j, double v) { cs.values[j][r] = v; });
    cs.order.resize(x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) {
        auto& ord = cs.order[j];
        ord.resize(x.rows);
        std::iota(ord.begin(), ord.end(), 0);
        const auto& vals = cs.values[j];
        std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
            if (vals[a] != vals[b]) return vals[a] < vals[b];
            return a < b;
        });
    }
    return cs;
}

struct TreeBuilder {
    const ColumnStore& cs;
    std::span<const double> grad;
    std::span<const double> hess;
    int max_depth;
    GbtTree tree;
    std::vector<char> in_node;

    explicit TreeBuilder(const ColumnStore& cs_, std::span<const double> g,
                         std::span<const double> h, int depth)
        : cs(cs_), grad(g), hess(h), max_depth(depth), in_node(cs_.rows, 0) {}

    double leaf_value(const std::vector<std::size_t>& samples) const {
        double g_sum = 0.0, h_sum = 0.0;
        for (std::size_t i : samples) {
            g_sum += grad[i];
            h_sum += hess[i];
        }
        return g_sum / std::max(h_sum, 1e-12);
    }

    int build(const std::vector<std::size_t>& samples, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (depth >= max_depth || samples.size() < 2) {
            tree.nodes[id].value = leaf_value(samples);
            return id;
        }

        double total_g = 0.0;
        for (std::size_t i : samples) total_g += grad[i];
        const double n_total = static_cast<double>(samples.size());
        const double base = total_g * total_g / n_total;

        for (std::size_t i : samples) in_node[i] = 1;
        double best_gain = 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t j = 0; j < cs.values.size(); ++j) {
            const auto& vals = cs.values[j];
            double left_g = 0.0, left_n = 0.0;
            double prev_value = 0.0;
            bool have_prev = false;
            for (std::size_t i : cs.order[j]) {
                if (!in_node[i]) continue;
                if (have_prev && vals[i] != prev_value && left_n > 0.0 && left_n < n_total) {
                    const double right_g = total_g - left_g;
                    const double right_n = n_total - left_n;
                    const double gain =
                        left_g * left_g / left_n + right_g * right_g / right_n - base;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<int>(j);
                        best_threshold = 0.5 * (prev_value + vals[i]);
                    }
                }
                left_g += grad[i];
                left_n += 1.0;
                prev_value = vals[i];
                have_prev = true;
            }
        }
        for (std::size_t i : samples) in_node[i] = 0;

        if (best_feature < 0) {
            tree.nodes[id].value = leaf_value(samples);
            return id;
        }

        std::vector<std::size_t> left, right;
        for (std::size_t i : samples) {
            if (cs.values[best_feature][i] <= best_threshold)
                left.push_back(i);
            else
                right.push_back(i);
        }
        tree.nodes[id].feature = best_feature;
        tree.nodes[id].threshold = best_threshold;
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        tree.nodes[id].left = l;
        tree.nodes[id].right = r;
        return id;
    }
};

double gbt_tree_value_from_store(const GbtTree& tree, const ColumnStore& cs, std::size_t row) {
    int node = 0;
    while (!tree.nodes[node].is_leaf()) {
        const GbtNode& nd = tree.nodes[node];
        node = cs.values[nd.feature][row] <= nd.threshold ? nd.left : nd.right;
    }
    return tree.nodes[node].value;
}

void fit_gbt(std::vector<std::vector<GbtTree>>& forests, TrainMeta& meta, const FeatureMatrix& x,
             const EncodedLabels& enc, const TrainOptions& o) {
    const std::size_t c_count = enc.classes.size();
    const std::size_t n = x.rows;
    const ColumnStore cs = build_column_store(x);

    Matrix score(n, c_count);
    std::vector<double> grad(n), hess(n);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);

    forests.assign(c_count, {});
    for (int round = 0; round < o.trees; ++round) {
        for (std::size_t c = 0; c < c_count; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = sigmoid(score.at(i, c));
                const double y = enc.y[i] == c ? 1.0 : 0.0;
                grad[i] = y - p;  // negative gradient of logistic loss
                hess[i] = std::max(p * (1.0 - p), 1e-12);
            }
            TreeBuilder builder(cs, grad, hess, o.depth);
            builder.build(all, 0);
            forests[c].push_back(std::move(builder.tree));
            const GbtTree& tree = forests[c].back();
            for (std::size_t i = 0; i < n; ++i)
                score.at(i, c) += o.shrinkage * gbt_tree_value_from_store(tree, cs, i);
        }
        meta.epochs_run = round + 1;
    }

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < c_count; ++c) {
            const double p = sigmoid(score.at(i, c));
            const double y = enc.y[i] == c ? 1.0 : 0.0;
            loss += -(y * std::log(std::max(p, 1e-300)) +
                      (1.0 - y) * std::log(std::max(1.0 - p, 1e-300)));
        }
    meta.final_loss = loss / static_cast<double>(n);
}

}  // namespace

double GbtTree::predict(const FeatureMatrix& x, std::size_t row) const {
    int node = 0;
    while (!nodes[node].is_leaf()) {
        const GbtNode& nd = nodes[node];
        node = x.at(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[node].value;
}

Classifier Classifier::fit(ClassifierKind kind, const FeatureMatrix& x,
                           std::span<const std::string> labels, const TrainOptions& opts) {
    opts.validate();
    check_training_inputs(x, labels);
    const EncodedLabels enc = encode_labels(labels);

    Classifier model;
    model.kind_ = kind;
    model.labels_ = enc.classes;
    model.width_ = x.cols;
    model.meta_.seed = opts.seed;
    model.shrinkage_ = opts.shrinkage;

    switch (kind) {
        case ClassifierKind::logreg:
            fit_logreg(model.w_, model.b_, model.meta_, x, enc, opts);
            break;
        case ClassifierKind::svm:
            fit_svm(model.w_, model.b_, model.meta_, x, enc, opts);
            break;
        case ClassifierKind::mlp: {
            MlpParams p;
            fit_mlp(p, model.meta_, x, enc, opts);
            model.w1_ = std::move(p.w1);
            model.b1_ = std::move(p.b1);
            model.w2_ = std::move(p.w2);
            model.b2_ = std::move(p.b2);
            break;
        }
        case ClassifierKind::gbt:
            fit_gbt(model.forests_, model.meta_, x, enc, opts);
            break;
    }

    const bool finite = model.w_.all_finite() && model.w1_.all_finite() &&
                        model.w2_.all_finite() &&
                        std::all_of(model.b_.begin(), model.b_.end(),
                                    [](double v) { return std::isfinite(v); });
    if (!finite || !std::isfinite(model.meta_.final_loss))
        throw NumericalFailure("non-finite parameter after training");
    return model;
}

Matrix Classifier::decision_values(const FeatureMatrix& x) const {
    if (x.cols != width_) throw DimensionMismatch("feature width differs from fit time");
    const std::size_t c_count = labels_.size();
    Matrix out(x.rows, c_count);

    switch (kind_) {
        case ClassifierKind::logreg:
        case ClassifierKind::svm:
            for (std::size_t i = 0; i < x.rows; ++i)
                linear_scores(w_, b_, 1.0, x, i, out.row(i));
            break;
        case ClassifierKind::mlp: {
            std::vector<double> hpre(b1_.size());
            for (std::size_t i = 0; i < x.rows; ++i) {
                std::span<double> scores = out.row(i);
                std::copy(b1_.begin(), b1_.end(), hpre.begin());
                x.for_each_in_row(i, [&](std::size_t j, double v) {
                    kernels::axpy(v, w1_.row(j), hpre);
                });
                std::copy(b2_.begin(), b2_.end(), scores.begin());
                for (std::size_t hh = 0; hh < hpre.size(); ++hh) {
                    const double a = hpre[hh] > 0.0 ? hpre[hh] : 0.0;
                    if (a != 0.0) kernels::axpy(a, w2_.row(hh), scores);
                }
            }
            break;
        }
        case ClassifierKind::gbt:
            for (std::size_t i = 0; i < x.rows; ++i)
                for (std::size_t c = 0; c < c_count; ++c) {
                    double f = 0.0;
                    for (const GbtTree& tree : forests_[c]) f += tree.predict(x, i);
                    out.at(i, c) = shrinkage_ * f;
                }
            break;
    }
    return out;
}

Matrix Classifier::predict_proba(const FeatureMatrix& x) const {
    if (kind_ == ClassifierKind::svm)
        throw InvalidArgument("svm does not produce probabilities");
    Matrix scores = decision_values(x);
    if (kind_ == ClassifierKind::gbt) {
        // one-vs-rest sigmoids, normalized to a stochastic row
        for (std::size_t i = 0; i < scores.rows; ++i) {
            auto row = scores.row(i);
            double sum = 0.0;
            for (double& v : row) {
                v = sigmoid(v);
                sum += v;
            }
            for (double& v : row) v /= sum;
        }
    } else {
        for (std::size_t i = 0; i < scores.rows; ++i) softmax_inplace(scores.row(i));
    }
    return scores;
}

std::vector<std::string> Classifier::predict(const FeatureMatrix& x) const {
    const Matrix scores = decision_values(x);
    std::vector<std::string> out;
    out.reserve(x.rows);
    for (std::size_t i = 0; i < scores.rows; ++i)
        out.push_back(labels_[argmax_lowest(scores.row(i))]);
    return out;
}

// -------------------------------------------------------------------- io --

namespace {

void write_double(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (c > 0) out << ' ';
            write_double(out, m.at(r, c));
        }
        out << '\n';
    }
}

Matrix read_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    std::string line;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw FormatFailure("truncated matrix block");
        std::istringstream row(line);
        for (std::size_t c = 0; c < cols; ++c)
            if (!(row >> m.at(r, c))) throw FormatFailure("short matrix row");
    }
    return m;
}

void write_vector(std::ostream& out, std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out << ' ';
        write_double(out, v[i]);
    }
    out << '\n';
}

std::vector<double> read_vector(std::istream& in, std::size_t n) {
    std::string line;
    if (!std::getline(in, line)) throw FormatFailure("truncated vector block");
    std::istringstream row(line);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!(row >> v[i])) throw FormatFailure("short vector row");
    return v;
}

}  // namespace

void Classifier::write(std::ostream& out) const {
    out << "model " << to_string(kind_) << '\n';
    out << "labels " << labels_.size() << '\n';
    for (const auto& l : labels_) out << l << '\n';
    out << "width " << width_ << '\n';
    out << "meta " << meta_.epochs_run << ' ';
    write_double(out, meta_.final_loss);
    out << ' ' << meta_.seed << '\n';

    switch (kind_) {
        case ClassifierKind::logreg:
        case ClassifierKind::svm:
            out << "linear " << w_.rows << ' ' << w_.cols << '\n';
            write_matrix(out, w_);
            write_vector(out, b_);
            break;
        case ClassifierKind::mlp:
            out << "mlp " << w1_.rows << ' ' << w1_.cols << ' ' << w2_.cols << '\n';
            write_matrix(out, w1_);
            write_vector(out, b1_);
            write_matrix(out, w2_);
            write_vector(out, b2_);
            break;
        case ClassifierKind::gbt: {
            out << "gbt " << forests_.size() << ' '
                << (forests_.empty() ? 0 : forests_[0].size()) << ' ';
            write_double(out, shrinkage_);
            out << '\n';
            for (const auto& forest : forests_)
                for (const GbtTree& tree : forest) {
                    out << "tree " << tree.nodes.size() << '\n';
                    for (const GbtNode& nd : tree.nodes) {
                        out << nd.feature << ' ';
                        write_double(out, nd.threshold);
                        out << ' ' << nd.left << ' ' << nd.right << ' ';
                        write_double(out, nd.value);
                        out << '\n';
                    }
                }
            break;
        }
    }
}

Classifier Classifier::read(std::istream& in) {
    std::string line, tag;
    auto next_line = [&]() -> std::istringstream {
        if (!std::getline(in, line)) throw FormatFailure("truncated model container");
        return std::istringstream(line);
    };

    Classifier model;
    {
        auto row = next_line();
        std::string kind_name;
        if (!(row >> tag >> kind_name) || tag != "model")
            throw FormatFailure("expected `model <kind>`");
        model.kind_ = classifier_from_string(kind_name);
    }
    std::size_t n_labels = 0;
    {
        auto row = next_line();
        if (!(row >> tag >> n_labels) || tag != "labels" || n_labels < 2)
            throw FormatFailure("expected `labels <n>`");
    }
    for (std::size_t i = 0; i < n_labels; ++i) {
        if (!std::getline(in, line) || line.empty()) throw FormatFailure("bad label row");
        model.labels_.push_back(line);
    }
    {
        auto row = next_line();
        if (!(row >> tag >> model.width_) || tag != "width")
            throw FormatFailure("expected `width <n>`");
    }
    {
        auto row = next_line();
        if (!(row >> tag >> model.meta_.epochs_run >> model.meta_.final_loss >>
              model.meta_.seed) ||
            tag != "meta")
            throw FormatFailure("expected `meta ...`");
    }

    auto header = next_line();
    if (!(header >> tag)) throw FormatFailure("missing parameter block");
    if (tag == "linear") {
        std::size_t rows = 0, cols = 0;
        if (!(header >> rows >> cols)) throw FormatFailure("bad linear header");
        model.w_ = read_matrix(in, rows, cols);
        model.b_ = read_vector(in, rows);
    } else if (tag == "mlp") {
        std::size_t d = 0, h = 0, c = 0;
        if (!(header >> d >> h >> c)) throw FormatFailure("bad mlp header");
        model.w1_ = read_matrix(in, d, h);
        model.b1_ = read_vector(in, h);
        model.w2_ = read_matrix(in, h, c);
        model.b2_ = read_vector(in, c);
    } else if (tag == "gbt") {
        std::size_t classes = 0, rounds = 0;
        if (!(header >> classes >> rounds >> model.shrinkage_))
            throw FormatFailure("bad gbt header");
        model.forests_.assign(classes, {});
        for (std::size_t c = 0; c < classes; ++c)
            for (std::size_t t = 0; t < rounds; ++t) {
                auto row = next_line();
                std::size_t n_nodes = 0;
                if (!(row >> tag >> n_nodes) || tag != "tree")
                    throw FormatFailure("expected `tree <n>`");
                GbtTree tree;
                tree.nodes.resize(n_nodes);
                for (auto& nd : tree.nodes) {
                    auto node_row = next_line();
                    if (!(node_row >> nd.feature >> nd.threshold >> nd.left >> nd.right >>
                          nd.value))
                        throw FormatFailure("bad tree node row");
                }
                model.forests_[c].push_back(std::move(tree));
            }
    } else {
        throw FormatFailure("unknown parameter block: " + tag);
    }
    return model;
}

void Classifier::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOFailure("cannot open " + path + " for writing");
    out << "PUO-MODEL 1\n";
    write(out);
    if (!out) throw IOFailure("write error on " + path);
}

Classifier Classifier::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOFailure("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "PUO-MODEL 1")
        throw FormatFailure(path + ": expected `PUO-MODEL 1`");
    return read(in);
}

// --------------------------------------------------------- gradient check --

namespace {

double relative_error(double a, double f) {
    return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-6});
}

// Max relative error between an analytic gradient and central differences
// of `loss` over the parameter vector.
template <typename LossFn>
double fd_max_error(std::vector<double*> params, std::span<const double> analytic, LossFn&& loss,
                    double h) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + h;
        const double up = loss();
        *params[i] = saved - h;
        const double down = loss();
        *params[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, relative_error(analytic[i], fd));
    }
    return worst;
}

}  // namespace

double loss_gradient_check(ClassifierKind kind, const FeatureMatrix& x,
                           std::span<const std::string> labels, const TrainOptions& opts,
                           double h) {
    check_training_inputs(x, labels);
    const EncodedLabels enc = encode_labels(labels);
    const std::size_t c_count = enc.classes.size();
    const std::size_t n = x.rows;
    Rng rng(Rng::mix({opts.seed, 0x6C4D}));

    if (kind == ClassifierKind::logreg) {
        Matrix w(c_count, x.cols);
        std::vector<double> b(c_count);
        for (double& v : w.data) v = rng.uniform(-0.5, 0.5);
        for (double& v : b) v = rng.uniform(-0.5, 0.5);

        auto loss = [&] { return logreg_epoch_loss(w, b, 1.0, x, enc, opts.l2); };

        Matrix g_w(c_count, x.cols);
        std::vector<double> g_b(c_count, 0.0);
        std::vector<double> probs(c_count);
        for (std::size_t i = 0; i < n; ++i) {
            linear_scores(w, b, 1.0, x, i, probs);
            softmax_inplace(probs);
            probs[enc.y[i]] -= 1.0;
            for (std::size_t c = 0; c < c_count; ++c) {
                g_b[c] += probs[c];
                x.for_each_in_row(i, [&](std::size_t j, double v) {
                    g_w.at(c, j) += probs[c] * v;
                });
            }
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        std::vector<double> analytic;
        std::vector<double*> params;
        for (std::size_t idx = 0; idx < w.data.size(); ++idx) {
            analytic.push_back(g_w.data[idx] * inv_n + opts.l2 * w.data[idx]);
            params.push_back(&w.data[idx]);
        }
        for (std::size_t c = 0; c < c_count; ++c) {
            analytic.push_back(g_b[c] * inv_n);
            params.push_back(&b[c]);
        }
        return fd_max_error(params, analytic, loss, h);
    }

    if (kind == ClassifierKind::mlp) {
        const std::size_t h_count = static_cast<std::size_t>(opts.hidden_units);
        MlpParams p;
        mlp_init(p, x.cols, h_count, c_count, opts.seed);
        for (double& v : p.b1) v = rng.uniform(-0.1, 0.1);
        for (double& v : p.b2) v = rng.uniform(-0.1, 0.1);

        auto loss = [&] { return mlp_epoch_loss(p, x, enc, opts.l2); };

        Matrix g_w1(x.cols, h_count), g_w2(h_count, c_count);
        std::vector<double> g_b1(h_count, 0.0), g_b2(c_count, 0.0);
        std::vector<double> hpre(h_count), probs(c_count), dh(h_count), dhpre(h_count);
        for (std::size_t i = 0; i < n; ++i) {
            mlp_forward(p, x, i, hpre, probs);
            probs[enc.y[i]] -= 1.0;
            for (std::size_t hh = 0; hh < h_count; ++hh) {
                const double a = hpre[hh] > 0.0 ? hpre[hh] : 0.0;
                if (a != 0.0) kernels::axpy(a, probs, g_w2.row(hh));
                dh[hh] = kernels::dot(p.w2.row(hh), probs);
                dhpre[hh] = hpre[hh] > 0.0 ? dh[hh] : 0.0;
            }
            kernels::add(probs, g_b2);
            kernels::add(dhpre, g_b1);
            x.for_each_in_row(i, [&](std::size_t j, double v) {
                kernels::axpy(v, dhpre, g_w1.row(j));
            });
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        std::vector<double> analytic;
        std::vector<double*> params;
        for (std::size_t idx = 0; idx < p.w1.data.size(); ++idx) {
            analytic.push_back(g_w1.data[idx] * inv_n + opts.l2 * p.w1.data[idx]);
            params.push_back(&p.w1.data[idx]);
        }
        for (std::size_t idx = 0; idx < g_b1.size(); ++idx) {
            analytic.push_back(g_b1[idx] * inv_n);
            params.push_back(&p.b1[idx]);
        }
        for (std::size_t idx = 0; idx < p.w2.data.size(); ++idx) {
            analytic.push_back(g_w2.data[idx] * inv_n + opts.l2 * p.w2.data[idx]);
            params.push_back(&p.w2.data[idx]);
        }
        for (std::size_t idx = 0; idx < g_b2.size(); ++idx) {
            analytic.push_back(g_b2[idx] * inv_n);
            params.push_back(&p.b2[idx]);
        }
        return fd_max_error(params, analytic, loss, h);
    }

    throw InvalidArgument("gradient check supports logreg and mlp only");
}

}  // namespace puo
