#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "puo/augment.hpp"
#include "puo/corpus.hpp"
#include "puo/doc2vec.hpp"
#include "puo/embeddings.hpp"
#include "puo/features.hpp"
#include "puo/models.hpp"

namespace puo {

/// Stratified fold assignment: per-class seeded shuffle, then a single
/// round-robin cursor across classes, so both global fold sizes and
/// per-class counts differ by at most one.
struct FoldPlan {
    int k = 5;
    std::uint64_t seed = 1;
    std::vector<int> assignments;  // record index -> fold id

    std::vector<std::size_t> validation_indices(int fold) const;
    std::vector<std::size_t> training_indices(int fold) const;
    std::vector<std::size_t> fold_sizes() const;
};

FoldPlan stratified_kfold(const LabeledDataset& data, int k, std::uint64_t seed);

/// Support-weighted mean of per-class F1 scores (F1 = 0 where
/// precision+recall = 0). Throws DimensionMismatch on length mismatch.
double weighted_f1(std::span<const std::string> truth, std::span<const std::string> predicted);

struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::int64_t> counts;  // labels.size() x labels.size(), row = true class

    std::int64_t at(std::size_t i, std::size_t j) const { return counts[i * labels.size() + j]; }
    std::int64_t& at(std::size_t i, std::size_t j) { return counts[i * labels.size() + j]; }
    std::int64_t total() const;
    std::int64_t diagonal() const;
    void add(const ConfusionMatrix& other);
};

ConfusionMatrix confusion_matrix(std::span<const std::string> truth,
                                 std::span<const std::string> predicted,
                                 std::span<const std::string> label_order);

struct ClassScore {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
};

/// Per-class precision/recall/F1 derived from a confusion matrix (zero
/// where the denominator vanishes).
std::vector<ClassScore> per_class_scores(const ConfusionMatrix& confusion);

enum class Arm { orig, aug, aug_qual };
const char* to_string(Arm arm);
Arm arm_from_string(const std::string& name);

struct ExperimentConfig {
    std::vector<Arm> arms{Arm::orig};
    std::vector<FeatureMethod> features{FeatureMethod::tfidf};
    std::vector<ClassifierKind> classifiers{ClassifierKind::logreg};
    int k = 5;
    std::uint64_t seed = 1;
    std::size_t max_features = 20000;
    AugmentConfig augment;  // quality_check is set per arm; seed per fold
    TrainOptions logreg = default_options(ClassifierKind::logreg);
    TrainOptions svm = default_options(ClassifierKind::svm);
    TrainOptions mlp = default_options(ClassifierKind::mlp);
    TrainOptions gbt = default_options(ClassifierKind::gbt);
    int threads = 1;

    const TrainOptions& options_for(ClassifierKind kind) const;
};

struct CellReport {
    Arm arm;
    FeatureMethod feature;
    ClassifierKind classifier;
    std::vector<double> per_fold_f1;
    std::vector<ConfusionMatrix> per_fold_confusion;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;  // population std over folds

    ConfusionMatrix summed_confusion() const;
};

struct ExperimentResult {
    ExperimentConfig config;
    FoldPlan plan;
    std::vector<std::string> label_order;
    std::vector<CellReport> cells;  // arm-major, then feature, then classifier
    std::map<Arm, AugmentDiagnostics> arm_diagnostics;  // aug arms only

    const CellReport& cell(Arm arm, FeatureMethod feature, ClassifierKind classifier) const;
};

/// Builds the training rows for one (arm, fold). The default builder copies
/// the training split (orig) or augments it (aug / aug-qual). Injectable so
/// the harness's contamination check can be exercised against a faulty
/// implementation.
using TrainingBuilder = std::function<std::vector<LabeledRecord>(
    LabeledDataset& data, std::span<const std::size_t> train_idx, Arm arm, int fold,
    std::uint64_t fold_seed, AugmentDiagnostics* diagnostics)>;

/// Runs the cross-validated experiment grid. Per fold: builds the training
/// rows (augmenting training data only), fits the feature spec on those rows
/// alone, trains each classifier, and scores the untouched validation split.
/// Validation rows are hash-checked before and after every fold; mutation
/// raises ValidationContaminated.
ExperimentResult run_experiment(LabeledDataset& data, const EmbeddingModel* words,
                                const DocEmbeddingModel* docs, const ExperimentConfig& config,
                                const TrainingBuilder& builder = {});

/// FNV-1a over the selected records; order-sensitive.
std::uint64_t hash_records(const LabeledDataset& data, std::span<const std::size_t> indices);

/// report.json: {config, arms:[{name, cells:[...], diagnostics?}]}.
void write_report_json(const ExperimentResult& result, const std::string& path);
/// Plot-ready CSV: arm,feature,classifier,fold,f1.
void write_folds_csv(const ExperimentResult& result, const std::string& path);
/// One label-headed integer CSV per cell: confusion_<arm>_<feature>_<classifier>.csv.
void write_confusion_csvs(const ExperimentResult& result, const std::string& directory);

}  // namespace puo
