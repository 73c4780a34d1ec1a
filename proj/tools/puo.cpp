// puo - low-resource news classification toolkit.
// Subcommands cover the full pipeline: corpus fixtures, embedding training,
// contextual augmentation with a document-similarity quality gate, feature
// extraction, classifier training, and cross-validated evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "puo/augment.hpp"
#include "puo/corpus.hpp"
#include "puo/doc2vec.hpp"
#include "puo/embeddings.hpp"
#include "puo/errors.hpp"
#include "puo/eval.hpp"
#include "puo/features.hpp"
#include "puo/models.hpp"

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

bool g_quiet = false;

std::ostream& note() { return std::cerr; }

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// ------------------------------------------------------- train-embeddings --

struct TrainEmbeddingsArgs {
    std::string corpus_path;
    std::string out_path;
    std::string mode = "skipgram";
    std::string words_out;
    puo::TrainConfig config;
    std::size_t max_vocab = 0;
};

int cmd_train_embeddings(TrainEmbeddingsArgs& args) {
    puo::TrainConfig cfg = args.config;
    if (args.max_vocab > 0) cfg.max_vocab = args.max_vocab;
    const puo::TextCorpus corpus = puo::load_text_corpus(args.corpus_path);
    std::ostream* diag = g_quiet ? nullptr : &std::cerr;

    std::size_t vocab_size = 0;
    double final_loss = 0.0;
    if (args.mode == "skipgram") {
        const puo::EmbeddingModel model = puo::train_word2vec(corpus.sentences, cfg, diag);
        model.save(args.out_path);
        vocab_size = model.vocab().size();
        final_loss = model.stats().final_loss();
    } else {
        const puo::DocEmbeddingModel model = puo::train_pvdbow(corpus.sentences, cfg, diag);
        model.save(args.out_path);
        if (!args.words_out.empty()) model.words.save(args.words_out);
        vocab_size = model.words.vocab().size();
        final_loss = model.words.stats().final_loss();
    }
    std::cout << "mode=" << args.mode << " dim=" << cfg.dim << " vocab=" << vocab_size
              << " tokens=" << corpus.stats.token_count << " epochs=" << cfg.epochs
              << " seed=" << cfg.seed << " final_loss=" << fmt(final_loss) << '\n';
    return 0;
}

// ----------------------------------------------------------------- augment --

struct AugmentArgs {
    std::string data_path;
    std::string out_path;
    std::string word_model;
    std::string doc_model;
    std::string diag_path;
    bool quality = false;
    puo::AugmentConfig config;
};

nlohmann::ordered_json augment_config_json(const puo::AugmentConfig& cfg) {
    return nlohmann::ordered_json{
        {"copies", cfg.copies},       {"threshold", cfg.threshold},
        {"k_neighbors", cfg.k_neighbors}, {"run", cfg.run},
        {"infer_steps", cfg.infer_steps}, {"seed", cfg.seed},
        {"quality_check", cfg.quality_check},
    };
}

int cmd_augment(AugmentArgs& args) {
    puo::AugmentConfig cfg = args.config;
    cfg.quality_check = args.quality;

    const puo::LabeledDataset data = puo::load_labeled_dataset(args.data_path);
    const puo::EmbeddingModel words = puo::EmbeddingModel::load(args.word_model);
    std::optional<puo::DocEmbeddingModel> docs;
    if (!args.doc_model.empty()) docs = puo::DocEmbeddingModel::load(args.doc_model);

    const puo::AugmentedDataset out =
        puo::augment_dataset(data, words, docs ? &*docs : nullptr, cfg);
    puo::save_labeled_dataset(out.data, args.out_path);

    nlohmann::ordered_json diag{
        {"attempted", out.diagnostics.attempted},
        {"accepted", out.diagnostics.accepted},
        {"exhausted", out.diagnostics.exhausted},
        {"mean_similarity", out.diagnostics.mean_similarity()},
        {"input_records", data.records.size()},
        {"output_records", out.data.records.size()},
        {"config", augment_config_json(cfg)},
    };
    if (!args.diag_path.empty()) {
        std::ofstream dout(args.diag_path, std::ios::binary);
        if (!dout) throw puo::IOFailure("cannot open " + args.diag_path + " for writing");
        dout << diag.dump(2) << '\n';
    }
    if (!g_quiet) note() << diag.dump() << '\n';
    return 0;
}

// --------------------------------------------------------------- featurize --

struct FeaturizeArgs {
    std::string data_path;
    std::string out_path;
    std::string method = "tfidf";
    std::string embeddings;
    std::size_t max_features = 20000;
};

std::vector<puo::Sentence> dataset_sentences(const puo::LabeledDataset& data) {
    std::vector<puo::Sentence> docs;
    docs.reserve(data.records.size());
    for (const auto& rec : data.records) docs.push_back(rec.sentence);
    return docs;
}

puo::FeatureSpec make_spec(const std::string& method, std::size_t max_features,
                           const std::string& embeddings) {
    puo::FeatureSpec spec(puo::feature_method_from_string(method), max_features);
    const bool needs_model = method != "tf" && method != "tfidf";
    if (needs_model) {
        if (embeddings.empty())
            throw UsageError("--embeddings is required for method " + method);
        spec.attach_embeddings(embeddings);
    }
    return spec;
}

int cmd_featurize(FeaturizeArgs& args) {
    const puo::LabeledDataset data = puo::load_labeled_dataset(args.data_path);
    const auto docs = dataset_sentences(data);
    puo::FeatureSpec spec = make_spec(args.method, args.max_features, args.embeddings);
    spec.fit(docs);
    const puo::FeatureMatrix matrix = spec.transform(docs);
    matrix.save(args.out_path);
    if (!g_quiet)
        note() << "rows=" << matrix.rows << " cols=" << matrix.cols
               << " oov_rows=" << matrix.oov_rows << " sparse=" << (matrix.sparse ? 1 : 0)
               << '\n';
    return 0;
}

// ------------------------------------------------------------------- train --

struct TrainArgs {
    std::string data_path;
    std::string out_path;
    std::string method = "tfidf";
    std::string classifier = "logreg";
    std::string embeddings;
    std::size_t max_features = 20000;
    puo::TrainOptions options;
    // flags the user actually set; everything else keeps per-kind defaults
    CLI::App* sub = nullptr;
};

int cmd_train(TrainArgs& args) {
    const puo::ClassifierKind kind = puo::classifier_from_string(args.classifier);
    puo::TrainOptions opts = puo::default_options(kind);
    auto maybe = [&](const char* flag, auto member) {
        if (args.sub->count(flag) > 0) opts.*member = args.options.*member;
    };
    maybe("--l2", &puo::TrainOptions::l2);
    maybe("--lr", &puo::TrainOptions::lr);
    maybe("--epochs", &puo::TrainOptions::epochs);
    maybe("--batch-size", &puo::TrainOptions::batch_size);
    maybe("--hidden-units", &puo::TrainOptions::hidden_units);
    maybe("--trees", &puo::TrainOptions::trees);
    maybe("--depth", &puo::TrainOptions::depth);
    maybe("--shrinkage", &puo::TrainOptions::shrinkage);
    maybe("--seed", &puo::TrainOptions::seed);

    const puo::LabeledDataset data = puo::load_labeled_dataset(args.data_path);
    const auto docs = dataset_sentences(data);
    puo::FeatureSpec spec = make_spec(args.method, args.max_features, args.embeddings);
    spec.fit(docs);
    const puo::FeatureMatrix x = spec.transform(docs);

    std::vector<std::string> labels;
    labels.reserve(data.records.size());
    for (const auto& rec : data.records) labels.push_back(rec.label);
    const puo::Classifier model = puo::Classifier::fit(kind, x, labels, opts);

    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) throw puo::IOFailure("cannot open " + args.out_path + " for writing");
    out << "PUO-PIPELINE 1\n";
    spec.write(out);
    model.write(out);
    if (!out) throw puo::IOFailure("write error on " + args.out_path);

    const auto predicted = model.predict(x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (predicted[i] == labels[i]) ++hits;
    std::cout << "classifier=" << args.classifier << " feature=" << args.method
              << " train_accuracy=" << fmt(static_cast<double>(hits) / labels.size())
              << " final_loss=" << fmt(model.train_meta().final_loss)
              << " seed=" << opts.seed << '\n';
    return 0;
}

// ---------------------------------------------------------------- evaluate --

struct EvaluateArgs {
    std::string data_path;
    std::string outdir;
    std::vector<std::string> arms{"orig"};
    std::vector<std::string> features{"tfidf"};
    std::vector<std::string> classifiers{"logreg"};
    std::string word_model;
    std::string doc_model;
    int k = 5;
    std::uint64_t seed = 1;
    std::size_t max_features = 20000;
    int threads = 1;
    puo::AugmentConfig augment;
};

int cmd_evaluate(EvaluateArgs& args) {
    puo::ExperimentConfig cfg;
    cfg.arms.clear();
    for (const auto& a : args.arms) cfg.arms.push_back(puo::arm_from_string(a));
    cfg.features.clear();
    for (const auto& f : args.features)
        cfg.features.push_back(puo::feature_method_from_string(f));
    cfg.classifiers.clear();
    for (const auto& c : args.classifiers)
        cfg.classifiers.push_back(puo::classifier_from_string(c));
    cfg.k = args.k;
    cfg.seed = args.seed;
    cfg.max_features = args.max_features;
    cfg.augment = args.augment;
    cfg.threads = args.threads;

    const bool has_aug_arm = cfg.arms.end() != std::find_if(cfg.arms.begin(), cfg.arms.end(),
                                                            [](puo::Arm a) { return a != puo::Arm::orig; });
    const bool has_w2v_feature =
        cfg.features.end() != std::find_if(cfg.features.begin(), cfg.features.end(),
                                           [](puo::FeatureMethod f) {
                                               return f != puo::FeatureMethod::tf &&
                                                      f != puo::FeatureMethod::tfidf;
                                           });
    const bool needs_docs =
        cfg.arms.end() != std::find(cfg.arms.begin(), cfg.arms.end(), puo::Arm::aug_qual);
    if ((has_aug_arm || has_w2v_feature) && args.word_model.empty())
        throw UsageError("--word-model is required for augmentation arms and w2v features");
    if (needs_docs && args.doc_model.empty())
        throw UsageError("--doc-model is required for the aug-qual arm");

    puo::LabeledDataset data = puo::load_labeled_dataset(args.data_path);
    std::optional<puo::EmbeddingModel> words;
    if (!args.word_model.empty()) words = puo::EmbeddingModel::load(args.word_model);
    std::optional<puo::DocEmbeddingModel> docs;
    if (!args.doc_model.empty()) docs = puo::DocEmbeddingModel::load(args.doc_model);

    const puo::ExperimentResult result = puo::run_experiment(
        data, words ? &*words : nullptr, docs ? &*docs : nullptr, cfg);

    namespace fs = std::filesystem;
    fs::create_directories(args.outdir);
    puo::write_report_json(result, (fs::path(args.outdir) / "report.json").string());
    puo::write_folds_csv(result, (fs::path(args.outdir) / "folds.csv").string());
    puo::write_confusion_csvs(result, args.outdir);

    for (const puo::CellReport& cell : result.cells)
        std::cout << "arm=" << puo::to_string(cell.arm)
                  << " feature=" << puo::to_string(cell.feature)
                  << " classifier=" << puo::to_string(cell.classifier)
                  << " mean_f1=" << fmt(cell.mean_f1) << " std_f1=" << fmt(cell.std_f1) << '\n';
    return 0;
}

// --------------------------------------------------------------- neighbors --

struct NeighborsArgs {
    std::string model_path;
    std::string word;
    std::size_t k = 10;
};

int cmd_neighbors(NeighborsArgs& args) {
    const puo::EmbeddingModel model = puo::EmbeddingModel::load(args.model_path);
    const auto neighbors = puo::nearest_neighbors(model, args.word, args.k);
    char buf[40];
    for (const puo::Neighbor& n : neighbors) {
        std::snprintf(buf, sizeof(buf), "%.6f", n.similarity);
        std::cout << n.token << '\t' << buf << '\n';
    }
    return 0;
}

// ------------------------------------------------------------------- synth --

struct SynthArgs {
    std::string out_data;
    std::string out_corpus;
    puo::SyntheticSpec spec;
};

int cmd_synth(SynthArgs& args) {
    const puo::SyntheticData data = puo::generate_synthetic_dataset(args.spec);
    puo::save_labeled_dataset(data.dataset, args.out_data);
    std::ofstream out(args.out_corpus, std::ios::binary);
    if (!out) throw puo::IOFailure("cannot open " + args.out_corpus + " for writing");
    for (const puo::Sentence& s : data.corpus) out << puo::sentence_text(s) << '\n';
    if (!out) throw puo::IOFailure("write error on " + args.out_corpus);
    if (!g_quiet)
        note() << "records=" << data.dataset.records.size()
               << " labels=" << data.dataset.labels.size()
               << " corpus_lines=" << data.corpus.size() << '\n';
    return 0;
}

void add_augment_options(CLI::App* sub, puo::AugmentConfig& cfg) {
    sub->add_option("--copies", cfg.copies, "Augmented copies per record")
        ->capture_default_str();
    sub->add_option("--threshold", cfg.threshold, "Doc-similarity acceptance threshold")
        ->capture_default_str();
    sub->add_option("--k-neighbors", cfg.k_neighbors, "Neighbor list size")
        ->capture_default_str();
    sub->add_option("--run", cfg.run, "Max attempts per copy")->capture_default_str();
    sub->add_option("--infer-steps", cfg.infer_steps, "Doc-vector inference passes")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"puo - low-resource text classification toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value configuration file (flags take precedence)");
    app.allow_config_extras(false);
    app.add_flag("--quiet", g_quiet, "Suppress diagnostics on stderr");

    TrainEmbeddingsArgs te;
    auto* te_sub = app.add_subcommand("train-embeddings",
                                      "Train word (skip-gram) or document (PV-DBOW) embeddings");
    te_sub->fallthrough();
    te_sub->add_option("--corpus", te.corpus_path, "One document per line, UTF-8")
        ->required()
        ->check(CLI::ExistingFile);
    te_sub->add_option("--out", te.out_path, "Output model file")->required();
    te_sub->add_option("--mode", te.mode, "skipgram or pvdbow")
        ->check(CLI::IsMember({"skipgram", "pvdbow"}))
        ->capture_default_str();
    te_sub->add_option("--words-out", te.words_out,
                       "Also write word vectors (pvdbow mode only)");
    te_sub->add_option("--dim", te.config.dim, "Vector dimensionality")->capture_default_str();
    te_sub->add_option("--window", te.config.window, "Max context window")
        ->capture_default_str();
    te_sub->add_option("--negatives", te.config.negatives, "Negative samples per update")
        ->capture_default_str();
    te_sub->add_option("--epochs", te.config.epochs, "Training epochs")->capture_default_str();
    te_sub->add_option("--lr", te.config.initial_lr, "Initial learning rate")
        ->capture_default_str();
    te_sub->add_option("--min-count", te.config.min_count, "Minimum token frequency")
        ->capture_default_str();
    te_sub->add_option("--subsample", te.config.subsample_threshold,
                       "Frequent-token subsampling threshold (0 disables)")
        ->capture_default_str();
    te_sub->add_option("--max-vocab", te.max_vocab, "Vocabulary cap (0 = unlimited)")
        ->capture_default_str();
    te_sub->add_option("--seed", te.config.seed, "Random seed")->capture_default_str();
    te_sub->add_option("--threads", te.config.threads,
                       "Training threads (>1 is not bitwise reproducible)")
        ->capture_default_str();

    AugmentArgs au;
    auto* au_sub = app.add_subcommand(
        "augment", "Expand a labeled dataset by contextual word replacement");
    au_sub->fallthrough();
    au_sub->add_option("--data", au.data_path, "Labeled TSV")->required()->check(CLI::ExistingFile);
    au_sub->add_option("--out", au.out_path, "Augmented TSV")->required();
    au_sub->add_option("--word-model", au.word_model, "Word vectors (.vec)")
        ->required()
        ->check(CLI::ExistingFile);
    auto* doc_opt = au_sub->add_option("--doc-model", au.doc_model,
                                       "Document model (enables similarity reporting)")
                        ->check(CLI::ExistingFile);
    au_sub->add_flag("--quality", au.quality, "Enforce the doc-similarity quality gate")
        ->needs(doc_opt);
    add_augment_options(au_sub, au.config);
    au_sub->add_option("--seed", au.config.seed, "Random seed")->capture_default_str();
    au_sub->add_option("--threads", au.config.threads, "Worker threads")->capture_default_str();
    au_sub->add_option("--diag", au.diag_path, "Write diagnostics JSON here");

    FeaturizeArgs fe;
    auto* fe_sub = app.add_subcommand("featurize", "Turn a labeled dataset into a feature matrix");
    fe_sub->fallthrough();
    fe_sub->add_option("--data", fe.data_path)->required()->check(CLI::ExistingFile);
    fe_sub->add_option("--out", fe.out_path, "Matrix dump path")->required();
    fe_sub->add_option("--method", fe.method)
        ->check(CLI::IsMember({"tf", "tfidf", "w2v-mean", "w2v-median", "w2v-powermean"}))
        ->capture_default_str();
    fe_sub->add_option("--embeddings", fe.embeddings, "Word vectors for w2v-* methods")
        ->check(CLI::ExistingFile);
    fe_sub->add_option("--max-features", fe.max_features)->capture_default_str();

    TrainArgs tr;
    auto* tr_sub = app.add_subcommand("train", "Fit one classifier on the full dataset");
    tr.sub = tr_sub;
    tr_sub->fallthrough();
    tr_sub->add_option("--data", tr.data_path)->required()->check(CLI::ExistingFile);
    tr_sub->add_option("--out", tr.out_path, "Pipeline container path")->required();
    tr_sub->add_option("--method", tr.method)
        ->check(CLI::IsMember({"tf", "tfidf", "w2v-mean", "w2v-median", "w2v-powermean"}))
        ->capture_default_str();
    tr_sub->add_option("--classifier", tr.classifier)
        ->check(CLI::IsMember({"logreg", "svm", "mlp", "gbt"}))
        ->capture_default_str();
    tr_sub->add_option("--embeddings", tr.embeddings)->check(CLI::ExistingFile);
    tr_sub->add_option("--max-features", tr.max_features)->capture_default_str();
    tr_sub->add_option("--l2", tr.options.l2);
    tr_sub->add_option("--lr", tr.options.lr);
    tr_sub->add_option("--epochs", tr.options.epochs);
    tr_sub->add_option("--batch-size", tr.options.batch_size);
    tr_sub->add_option("--hidden-units", tr.options.hidden_units);
    tr_sub->add_option("--trees", tr.options.trees);
    tr_sub->add_option("--depth", tr.options.depth);
    tr_sub->add_option("--shrinkage", tr.options.shrinkage);
    tr_sub->add_option("--seed", tr.options.seed);

    EvaluateArgs ev;
    auto* ev_sub = app.add_subcommand(
        "evaluate", "Stratified cross-validation over arms x features x classifiers");
    ev_sub->fallthrough();
    ev_sub->add_option("--data", ev.data_path)->required()->check(CLI::ExistingFile);
    ev_sub->add_option("--outdir", ev.outdir, "Report directory")->required();
    ev_sub->add_option("--arms", ev.arms, "Comma-separated: orig,aug,aug-qual")
        ->delimiter(',')
        ->check(CLI::IsMember({"orig", "aug", "aug-qual"}))
        ->capture_default_str();
    ev_sub->add_option("--features", ev.features, "Comma-separated feature methods")
        ->delimiter(',')
        ->check(CLI::IsMember({"tf", "tfidf", "w2v-mean", "w2v-median", "w2v-powermean"}))
        ->capture_default_str();
    ev_sub->add_option("--classifiers", ev.classifiers, "Comma-separated classifier kinds")
        ->delimiter(',')
        ->check(CLI::IsMember({"logreg", "svm", "mlp", "gbt"}))
        ->capture_default_str();
    ev_sub->add_option("--word-model", ev.word_model)->check(CLI::ExistingFile);
    ev_sub->add_option("--doc-model", ev.doc_model)->check(CLI::ExistingFile);
    ev_sub->add_option("--k", ev.k, "Folds")->capture_default_str();
    ev_sub->add_option("--seed", ev.seed)->capture_default_str();
    ev_sub->add_option("--max-features", ev.max_features)->capture_default_str();
    ev_sub->add_option("--threads", ev.threads)->capture_default_str();
    add_augment_options(ev_sub, ev.augment);

    NeighborsArgs ne;
    auto* ne_sub = app.add_subcommand("neighbors", "Print nearest neighbors of a word");
    ne_sub->fallthrough();
    ne_sub->add_option("--model", ne.model_path)->required()->check(CLI::ExistingFile);
    ne_sub->add_option("--word", ne.word)->required();
    ne_sub->add_option("--k", ne.k)->capture_default_str();

    SynthArgs sy;
    auto* sy_sub = app.add_subcommand("synth", "Generate a synthetic dataset + companion corpus");
    sy_sub->fallthrough();
    sy_sub->add_option("--out-data", sy.out_data, "Labeled TSV path")->required();
    sy_sub->add_option("--out-corpus", sy.out_corpus, "Companion corpus path")->required();
    sy_sub->add_option("--categories", sy.spec.categories)->capture_default_str();
    sy_sub->add_option("--per-category", sy.spec.per_category)->capture_default_str();
    sy_sub->add_option("--vocab-per-category", sy.spec.vocab_per_category)
        ->capture_default_str();
    sy_sub->add_option("--overlap", sy.spec.overlap)->capture_default_str();
    sy_sub->add_option("--corpus-lines", sy.spec.corpus_lines)->capture_default_str();
    sy_sub->add_option("--seed", sy.spec.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exits 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (te_sub->parsed()) return cmd_train_embeddings(te);
        if (au_sub->parsed()) return cmd_augment(au);
        if (fe_sub->parsed()) return cmd_featurize(fe);
        if (tr_sub->parsed()) return cmd_train(tr);
        if (ev_sub->parsed()) return cmd_evaluate(ev);
        if (ne_sub->parsed()) return cmd_neighbors(ne);
        if (sy_sub->parsed()) return cmd_synth(sy);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const puo::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
