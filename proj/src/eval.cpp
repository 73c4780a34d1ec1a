#include "puo/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "puo/errors.hpp"
#include "puo/rng.hpp"

namespace puo {

std::vector<std::size_t> FoldPlan::validation_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::training_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (int a : assignments) ++sizes[a];
    return sizes;
}

FoldPlan stratified_kfold(const LabeledDataset& data, int k, std::uint64_t seed) {
    if (k < 2) throw InvalidFoldCount("k must be >= 2");
    if (static_cast<std::size_t>(k) > data.records.size())
        throw InvalidFoldCount("k exceeds the record count");

    // indices per class, classes in sorted label order
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.records.size(); ++i)
        by_class[data.records[i].label].push_back(i);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(data.records.size(), 0);
    std::size_t cursor = 0;
    std::size_t class_id = 0;
    for (auto& [label, indices] : by_class) {
        Rng rng(Rng::mix({seed, 0xF01D, class_id++}));
        for (std::size_t i = indices.size(); i > 1; --i)
            std::swap(indices[i - 1], indices[rng.uniform_index(i)]);
        for (std::size_t idx : indices)
            plan.assignments[idx] = static_cast<int>(cursor++ % k);
    }
    return plan;
}

namespace {

struct ClassCounts {
    std::int64_t tp = 0, fp = 0, fn = 0, support = 0;
};

}  // namespace

double weighted_f1(std::span<const std::string> truth, std::span<const std::string> predicted) {
    if (truth.size() != predicted.size())
        throw DimensionMismatch("truth and prediction lengths differ");
    if (truth.empty()) throw InvalidArgument("weighted_f1 requires at least one record");

    std::map<std::string, ClassCounts> counts;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        counts[truth[i]].support++;
        if (truth[i] == predicted[i]) {
            counts[truth[i]].tp++;
        } else {
            counts[truth[i]].fn++;
            counts[predicted[i]].fp++;
        }
    }
    const double total = static_cast<double>(truth.size());
    double score = 0.0;
    for (const auto& [label, c] : counts) {
        if (c.support == 0) continue;  // label only predicted, never true
        const double p_den = static_cast<double>(c.tp + c.fp);
        const double r_den = static_cast<double>(c.tp + c.fn);
        const double precision = p_den > 0 ? c.tp / p_den : 0.0;
        const double recall = r_den > 0 ? c.tp / r_den : 0.0;
        const double f1 =
            precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        score += f1 * (static_cast<double>(c.support) / total);
    }
    return score;
}

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::diagonal() const {
    std::int64_t d = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) d += at(i, i);
    return d;
}

void ConfusionMatrix::add(const ConfusionMatrix& other) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

ConfusionMatrix confusion_matrix(std::span<const std::string> truth,
                                 std::span<const std::string> predicted,
                                 std::span<const std::string> label_order) {
    if (truth.size() != predicted.size())
        throw DimensionMismatch("truth and prediction lengths differ");
    ConfusionMatrix m;
    m.labels.assign(label_order.begin(), label_order.end());
    m.counts.assign(m.labels.size() * m.labels.size(), 0);
    auto index_of = [&](const std::string& label) {
        const auto it = std::find(m.labels.begin(), m.labels.end(), label);
        if (it == m.labels.end()) throw UnknownLabel("label not in label order: " + label);
        return static_cast<std::size_t>(it - m.labels.begin());
    };
    for (std::size_t i = 0; i < truth.size(); ++i)
        ++m.at(index_of(truth[i]), index_of(predicted[i]));
    return m;
}

std::vector<ClassScore> per_class_scores(const ConfusionMatrix& confusion) {
    const std::size_t n = confusion.labels.size();
    std::vector<ClassScore> scores;
    scores.reserve(n);
    for (std::size_t c = 0; c < n; ++c) {
        ClassScore s;
        s.label = confusion.labels[c];
        std::int64_t predicted = 0;
        for (std::size_t i = 0; i < n; ++i) {
            s.support += confusion.at(c, i);
            predicted += confusion.at(i, c);
        }
        const std::int64_t tp = confusion.at(c, c);
        s.precision = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
        s.recall = s.support > 0 ? static_cast<double>(tp) / s.support : 0.0;
        s.f1 = s.precision + s.recall > 0
                   ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                   : 0.0;
        scores.push_back(std::move(s));
    }
    return scores;
}

const char* to_string(Arm arm) {
    switch (arm) {
        case Arm::orig: return "orig";
        case Arm::aug: return "aug";
        case Arm::aug_qual: return "aug-qual";
    }
    return "?";
}

Arm arm_from_string(const std::string& name) {
    if (name == "orig") return Arm::orig;
    if (name == "aug") return Arm::aug;
    if (name == "aug-qual" || name == "aug_qual") return Arm::aug_qual;
    throw InvalidArgument("unknown arm: " + name);
}

const TrainOptions& ExperimentConfig::options_for(ClassifierKind kind) const {
    switch (kind) {
        case ClassifierKind::logreg: return logreg;
        case ClassifierKind::svm: return svm;
        case ClassifierKind::mlp: return mlp;
        case ClassifierKind::gbt: return gbt;
    }
    return logreg;
}

ConfusionMatrix CellReport::summed_confusion() const {
    ConfusionMatrix sum = per_fold_confusion.front();
    for (std::size_t f = 1; f < per_fold_confusion.size(); ++f)
        sum.add(per_fold_confusion[f]);
    return sum;
}

const CellReport& ExperimentResult::cell(Arm arm, FeatureMethod feature,
                                         ClassifierKind classifier) const {
    for (const CellReport& c : cells)
        if (c.arm == arm && c.feature == feature && c.classifier == classifier) return c;
    throw InvalidArgument("no such experiment cell");
}

std::uint64_t hash_records(const LabeledDataset& data, std::span<const std::size_t> indices) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const char* bytes, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(bytes[i]);
            h *= 0x100000001b3ULL;
        }
    };
    for (std::size_t idx : indices) {
        const LabeledRecord& rec = data.records[idx];
        feed(rec.label.data(), rec.label.size());
        const char rs = '\x1e';
        feed(&rs, 1);
        for (const Token& t : rec.sentence) {
            feed(t.data(), t.size());
            const char us = '\x1f';
            feed(&us, 1);
        }
    }
    return h;
}

namespace {

std::vector<LabeledRecord> default_training_builder(LabeledDataset& data,
                                                    std::span<const std::size_t> train_idx,
                                                    Arm arm, const EmbeddingModel* words,
                                                    const DocEmbeddingModel* docs,
                                                    const ExperimentConfig& config,
                                                    std::uint64_t fold_seed,
                                                    AugmentDiagnostics* diagnostics) {
    LabeledDataset split;
    split.records.reserve(train_idx.size());
    for (std::size_t idx : train_idx) split.records.push_back(data.records[idx]);
    split.labels = data.labels;
    if (arm == Arm::orig) return std::move(split.records);

    if (words == nullptr)
        throw ConfigurationError("augmentation arm requires a word embedding model");
    AugmentConfig acfg = config.augment;
    acfg.seed = fold_seed;
    acfg.quality_check = arm == Arm::aug_qual;
    AugmentedDataset augmented = augment_dataset(split, *words, docs, acfg);
    if (diagnostics != nullptr) diagnostics->merge(augmented.diagnostics);
    return std::move(augmented.data.records);
}

struct FoldOutput {
    std::vector<double> f1;                  // one per (feature, classifier) cell
    std::vector<ConfusionMatrix> confusion;  // same order
    AugmentDiagnostics diagnostics;
};

}  // namespace

ExperimentResult run_experiment(LabeledDataset& data, const EmbeddingModel* words,
                                const DocEmbeddingModel* docs, const ExperimentConfig& config,
                                const TrainingBuilder& builder) {
    if (config.arms.empty() || config.features.empty() || config.classifiers.empty())
        throw InvalidArgument("experiment needs at least one arm, feature, and classifier");
    for (FeatureMethod f : config.features)
        if (f != FeatureMethod::tf && f != FeatureMethod::tfidf && words == nullptr)
            throw ConfigurationError("embedding features require a word embedding model");
    for (Arm arm : config.arms)
        if (arm == Arm::aug_qual && docs == nullptr)
            throw ConfigurationError("aug-qual arm requires a document embedding model");

    ExperimentResult result;
    result.config = config;
    result.label_order = data.labels;
    result.plan = stratified_kfold(data, config.k, config.seed);
    const FoldPlan& plan = result.plan;

    std::shared_ptr<const EmbeddingModel> shared_words(words, [](const EmbeddingModel*) {});

    const std::size_t cells_per_fold = config.features.size() * config.classifiers.size();

    for (Arm arm : config.arms) {
        std::vector<FoldOutput> folds(config.k);

        auto run_fold = [&](int fold) {
            const auto val_idx = plan.validation_indices(fold);
            const auto train_idx = plan.training_indices(fold);
            const std::uint64_t fold_seed =
                Rng::mix({config.seed, 0xA46, static_cast<std::uint64_t>(fold)});
            const std::uint64_t before = hash_records(data, val_idx);

            FoldOutput& out = folds[fold];
            std::vector<LabeledRecord> training =
                builder ? builder(data, train_idx, arm, fold, fold_seed, &out.diagnostics)
                        : default_training_builder(data, train_idx, arm, words, docs, config,
                                                   fold_seed, &out.diagnostics);

            std::vector<Sentence> train_docs;
            std::vector<std::string> train_labels;
            train_docs.reserve(training.size());
            train_labels.reserve(training.size());
            for (LabeledRecord& rec : training) {
                train_docs.push_back(std::move(rec.sentence));
                train_labels.push_back(std::move(rec.label));
            }
            std::vector<Sentence> val_docs;
            std::vector<std::string> val_labels;
            val_docs.reserve(val_idx.size());
            for (std::size_t idx : val_idx) {
                val_docs.push_back(data.records[idx].sentence);
                val_labels.push_back(data.records[idx].label);
            }

            for (FeatureMethod feature : config.features) {
                FeatureSpec spec(feature, config.max_features);
                if (feature != FeatureMethod::tf && feature != FeatureMethod::tfidf)
                    spec.attach_embeddings(shared_words);
                spec.fit(train_docs);
                const FeatureMatrix x_train = spec.transform(train_docs);
                const FeatureMatrix x_val = spec.transform(val_docs);

                for (ClassifierKind kind : config.classifiers) {
                    TrainOptions opts = config.options_for(kind);
                    opts.seed = Rng::mix({config.seed, static_cast<std::uint64_t>(fold),
                                          static_cast<std::uint64_t>(arm),
                                          static_cast<std::uint64_t>(feature),
                                          static_cast<std::uint64_t>(kind)});
                    const Classifier model = Classifier::fit(kind, x_train, train_labels, opts);
                    const auto predicted = model.predict(x_val);
                    out.f1.push_back(weighted_f1(val_labels, predicted));
                    out.confusion.push_back(
                        confusion_matrix(val_labels, predicted, result.label_order));
                }
            }

            if (hash_records(data, val_idx) != before)
                throw ValidationContaminated("validation rows changed during fold " +
                                             std::to_string(fold) + " of arm " +
                                             to_string(arm));
        };

        auto guarded_fold = [&](int fold) {
            try {
                run_fold(fold);
            } catch (const ValidationContaminated&) {
                throw;
            } catch (const Error& e) {
                throw Error("fold " + std::to_string(fold) + " (arm " + to_string(arm) +
                            "): " + e.what());
            }
        };

        if (config.threads <= 1) {
            for (int fold = 0; fold < config.k; ++fold) guarded_fold(fold);
        } else {
            std::atomic<int> next{0};
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(config.k);
            const int workers = std::min(config.threads, config.k);
            for (int w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (int fold = next.fetch_add(1); fold < config.k;
                         fold = next.fetch_add(1)) {
                        try {
                            guarded_fold(fold);
                        } catch (...) {
                            errors[fold] = std::current_exception();
                        }
                    }
                });
            for (auto& t : pool) t.join();
            for (auto& err : errors)
                if (err) std::rethrow_exception(err);
        }

        // gather cells in (feature, classifier) order
        for (std::size_t cell = 0; cell < cells_per_fold; ++cell) {
            CellReport report;
            report.arm = arm;
            report.feature = config.features[cell / config.classifiers.size()];
            report.classifier = config.classifiers[cell % config.classifiers.size()];
            for (int fold = 0; fold < config.k; ++fold) {
                report.per_fold_f1.push_back(folds[fold].f1[cell]);
                report.per_fold_confusion.push_back(folds[fold].confusion[cell]);
            }
            const double mean =
                std::accumulate(report.per_fold_f1.begin(), report.per_fold_f1.end(), 0.0) /
                static_cast<double>(config.k);
            double var = 0.0;
            for (double f : report.per_fold_f1) var += (f - mean) * (f - mean);
            report.mean_f1 = mean;
            report.std_f1 = std::sqrt(var / static_cast<double>(config.k));
            result.cells.push_back(std::move(report));
        }
        if (arm != Arm::orig) {
            AugmentDiagnostics merged;
            for (const FoldOutput& fold : folds) merged.merge(fold.diagnostics);
            result.arm_diagnostics[arm] = merged;
        }
    }
    return result;
}

// ------------------------------------------------------------- reporting --

namespace {

nlohmann::ordered_json config_json(const ExperimentResult& result) {
    const ExperimentConfig& c = result.config;
    nlohmann::ordered_json arms = nlohmann::ordered_json::array();
    for (Arm a : c.arms) arms.push_back(to_string(a));
    nlohmann::ordered_json features = nlohmann::ordered_json::array();
    for (FeatureMethod f : c.features) features.push_back(to_string(f));
    nlohmann::ordered_json classifiers = nlohmann::ordered_json::array();
    for (ClassifierKind k : c.classifiers) classifiers.push_back(to_string(k));
    return nlohmann::ordered_json{
        {"k", c.k},
        {"seed", c.seed},
        {"stratified", true},
        {"max_features", c.max_features},
        {"arms", arms},
        {"features", features},
        {"classifiers", classifiers},
        {"augment",
         {{"copies", c.augment.copies},
          {"threshold", c.augment.threshold},
          {"k_neighbors", c.augment.k_neighbors},
          {"run", c.augment.run},
          {"infer_steps", c.augment.infer_steps}}},
        {"threads", c.threads},
    };
}

nlohmann::ordered_json diagnostics_json(const AugmentDiagnostics& d) {
    return nlohmann::ordered_json{
        {"attempted", d.attempted},
        {"accepted", d.accepted},
        {"exhausted", d.exhausted},
        {"mean_similarity", d.mean_similarity()},
    };
}

}  // namespace

void write_report_json(const ExperimentResult& result, const std::string& path) {
    nlohmann::ordered_json arms = nlohmann::ordered_json::array();
    for (Arm arm : result.config.arms) {
        nlohmann::ordered_json cells = nlohmann::ordered_json::array();
        for (const CellReport& cell : result.cells) {
            if (cell.arm != arm) continue;
            cells.push_back(nlohmann::ordered_json{
                {"feature", to_string(cell.feature)},
                {"classifier", to_string(cell.classifier)},
                {"per_fold", cell.per_fold_f1},
                {"mean_f1", cell.mean_f1},
                {"std_f1", cell.std_f1},
            });
        }
        nlohmann::ordered_json entry{{"name", to_string(arm)}, {"cells", cells}};
        const auto diag = result.arm_diagnostics.find(arm);
        if (diag != result.arm_diagnostics.end())
            entry["diagnostics"] = diagnostics_json(diag->second);
        arms.push_back(entry);
    }
    nlohmann::ordered_json doc{
        {"version", 1},
        {"config", config_json(result)},
        {"arms", arms},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOFailure("cannot open " + path + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IOFailure("write error on " + path);
}

void write_folds_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOFailure("cannot open " + path + " for writing");
    out << "arm,feature,classifier,fold,f1\n";
    char buf[40];
    for (const CellReport& cell : result.cells)
        for (std::size_t fold = 0; fold < cell.per_fold_f1.size(); ++fold) {
            std::snprintf(buf, sizeof(buf), "%.17g", cell.per_fold_f1[fold]);
            out << to_string(cell.arm) << ',' << to_string(cell.feature) << ','
                << to_string(cell.classifier) << ',' << fold << ',' << buf << '\n';
        }
    if (!out) throw IOFailure("write error on " + path);
}

void write_confusion_csvs(const ExperimentResult& result, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    for (const CellReport& cell : result.cells) {
        const ConfusionMatrix sum = cell.summed_confusion();
        const std::string name = std::string("confusion_") + to_string(cell.arm) + "_" +
                                 to_string(cell.feature) + "_" + to_string(cell.classifier) +
                                 ".csv";
        std::ofstream out(fs::path(directory) / name, std::ios::binary);
        if (!out) throw IOFailure("cannot open confusion file " + name);
        for (std::size_t i = 0; i < sum.labels.size(); ++i)
            out << (i > 0 ? "," : "") << sum.labels[i];
        out << '\n';
        for (std::size_t i = 0; i < sum.labels.size(); ++i) {
            for (std::size_t j = 0; j < sum.labels.size(); ++j)
                out << (j > 0 ? "," : "") << sum.at(i, j);
            out << '\n';
        }
        if (!out) throw IOFailure("write error on confusion file " + name);
    }
}

}  // namespace puo
