#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "puo/features.hpp"
#include "puo/matrix.hpp"

namespace puo {

enum class ClassifierKind { logreg, svm, mlp, gbt };

const char* to_string(ClassifierKind k);
ClassifierKind classifier_from_string(const std::string& name);  // InvalidArgument

struct TrainOptions {
    double l2 = 1e-4;
    double lr = 0.1;
    int epochs = 100;
    int batch_size = 32;
    int hidden_units = 100;  // mlp
    int trees = 50;          // gbt boosting rounds
    int depth = 3;           // gbt max depth
    double shrinkage = 0.1;  // gbt learning rate
    std::uint64_t seed = 1;

    void validate() const;  // throws InvalidArgument
};

/// Per-kind defaults tuned for desk-scale data.
TrainOptions default_options(ClassifierKind kind);

struct TrainMeta {
    int epochs_run = 0;
    double final_loss = 0.0;
    std::uint64_t seed = 0;
};

struct GbtNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    bool is_leaf() const { return feature < 0; }
};

struct GbtTree {
    std::vector<GbtNode> nodes;  // nodes[0] is the root
    double predict(const FeatureMatrix& x, std::size_t row) const;
};

/// The classifier suite: multinomial logistic regression, one-vs-rest
/// linear SVM, one-hidden-layer MLP, and gradient-boosted trees. All kinds
/// train deterministically under a fixed seed and tie-break argmax to the
/// lowest class index.
class Classifier {
public:
    static Classifier fit(ClassifierKind kind, const FeatureMatrix& x,
                          std::span<const std::string> labels, const TrainOptions& opts);

    std::vector<std::string> predict(const FeatureMatrix& x) const;

    /// Row-stochastic class probabilities (logreg, mlp, gbt).
    Matrix predict_proba(const FeatureMatrix& x) const;

    /// Raw per-class scores (all kinds).
    Matrix decision_values(const FeatureMatrix& x) const;

    ClassifierKind kind() const { return kind_; }
    const std::vector<std::string>& label_set() const { return labels_; }
    std::size_t feature_width() const { return width_; }
    const TrainMeta& train_meta() const { return meta_; }

    /// Versioned text container; round-trips exactly.
    void save(const std::string& path) const;
    static Classifier load(const std::string& path);
    void write(std::ostream& out) const;
    static Classifier read(std::istream& in);

    // parameter access for tests
    const Matrix& linear_weights() const { return w_; }
    std::span<const double> linear_bias() const { return b_; }
    const std::vector<std::vector<GbtTree>>& forests() const { return forests_; }

private:
    ClassifierKind kind_ = ClassifierKind::logreg;
    std::vector<std::string> labels_;
    std::size_t width_ = 0;
    TrainMeta meta_;

    Matrix w_;               // logreg/svm: C x D
    std::vector<double> b_;  // logreg/svm: C

    Matrix w1_;               // mlp: D x H
    std::vector<double> b1_;  // H
    Matrix w2_;               // mlp: H x C
    std::vector<double> b2_;  // C

    std::vector<std::vector<GbtTree>> forests_;  // gbt: [class][round]
    double shrinkage_ = 0.1;
};

/// Compares the analytic gradient of the full-batch training loss against
/// central finite differences (step h) at a seeded random parameter point.
/// Returns the max relative error over all parameters. logreg and mlp only.
double loss_gradient_check(ClassifierKind kind, const FeatureMatrix& x,
                           std::span<const std::string> labels, const TrainOptions& opts,
                           double h = 1e-5);

}  // namespace puo
