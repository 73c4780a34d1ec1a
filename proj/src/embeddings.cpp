#include "puo/embeddings.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "puo/errors.hpp"
#include "puo/kernels.hpp"
#include "train_internal.hpp"

namespace puo {

void TrainConfig::validate() const {
    if (dim < 1) throw InvalidArgument("dim must be >= 1");
    if (window < 1) throw InvalidArgument("window must be >= 1");
    if (negatives < 1) throw InvalidArgument("negatives must be >= 1");
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (!(initial_lr > 0.0)) throw InvalidArgument("initial_lr must be positive");
    if (min_count < 1) throw InvalidArgument("min_count must be >= 1");
    if (subsample_threshold < 0.0) throw InvalidArgument("subsample_threshold must be >= 0");
    if (threads < 1) throw InvalidArgument("threads must be >= 1");
}

NegativeTable::NegativeTable(const Vocabulary& vocab, double power) {
    cdf_.resize(vocab.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        acc += std::pow(static_cast<double>(vocab.count(i)), power);
        cdf_[i] = acc;
    }
}

std::size_t NegativeTable::sample(Rng& rng) const {
    const double r = rng.uniform() * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), r);
    return std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1);
}

EmbeddingModel::EmbeddingModel(Vocabulary vocab, int dim, std::uint64_t seed)
    : vocab_(std::move(vocab)),
      dim_(dim),
      input_(vocab_.size(), dim),
      output_(vocab_.size(), dim),
      table_(vocab_) {
    Rng rng(Rng::mix({seed, 0x1417}));
    const double half = 0.5 / dim;
    for (double& v : input_.data) v = rng.uniform(-half, half);
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

namespace {

// Shared SGNS core. Gradients are evaluated at the pre-update parameters:
// the center gradient accumulates against the old output rows, and output
// rows are updated against the old center.
template <bool UpdateOutput, typename OutputRow>
double sgns_core(std::span<double> center, OutputRow&& output_row, std::size_t target,
                 std::span<const std::size_t> negatives, double lr) {
    const std::size_t dim = center.size();
    double loss = 0.0;
    thread_local std::vector<double> grad_buffer;
    grad_buffer.assign(dim, 0.0);
    std::span<double> center_grad(grad_buffer.data(), dim);

    auto accumulate = [&](std::size_t idx, double label) {
        auto u = output_row(idx);
        const double f = kernels::dot(center, u);
        loss += label > 0.5 ? -log_sigmoid(f) : -log_sigmoid(-f);
        const double g = stable_sigmoid(f) - label;  // dL/df
        kernels::axpy(g, u, center_grad);
        if constexpr (UpdateOutput) kernels::axpy(-lr * g, center, u);
    };

    accumulate(target, 1.0);
    for (std::size_t neg : negatives) accumulate(neg, 0.0);
    kernels::axpy(-lr, center_grad, center);
    return loss;
}

}  // namespace

double sgns_apply(std::span<double> center_vec, EmbeddingModel& model, std::size_t target,
                  std::span<const std::size_t> negatives, double lr) {
    return sgns_core<true>(
        center_vec, [&](std::size_t i) { return model.output_row(i); }, target, negatives, lr);
}

double sgns_apply_frozen(std::span<double> center_vec, const EmbeddingModel& model,
                         std::size_t target, std::span<const std::size_t> negatives, double lr) {
    return sgns_core<false>(
        center_vec, [&](std::size_t i) { return model.output_row(i); }, target, negatives, lr);
}

double sgns_step(EmbeddingModel& model, std::size_t center, std::size_t context,
                 std::span<const std::size_t> negatives, double lr) {
    if (center >= model.vocab().size() || context >= model.vocab().size())
        throw InvalidArgument("sgns_step index out of range");
    for (std::size_t n : negatives)
        if (n >= model.vocab().size()) throw InvalidArgument("negative index out of range");
    return sgns_apply(model.input_row(center), model, context, negatives, lr);
}

double sgns_loss(const EmbeddingModel& model, std::span<const double> center_vec,
                 std::size_t target, std::span<const std::size_t> negatives) {
    double loss = 0.0;
    auto term = [&](std::size_t idx, double label) {
        const double f = kernels::dot(center_vec, model.output_row(idx));
        loss += label > 0.5 ? -log_sigmoid(f) : -log_sigmoid(-f);
    };
    term(target, 1.0);
    for (std::size_t neg : negatives) term(neg, 0.0);
    return loss;
}

namespace detail {

std::vector<std::vector<std::size_t>> encode_corpus(std::span<const Sentence> corpus,
                                                    const Vocabulary& vocab) {
    std::vector<std::vector<std::size_t>> encoded;
    encoded.reserve(corpus.size());
    for (const Sentence& s : corpus) {
        std::vector<std::size_t> ids;
        ids.reserve(s.size());
        for (const Token& t : s)
            if (auto idx = vocab.find(t)) ids.push_back(*idx);
        encoded.push_back(std::move(ids));
    }
    return encoded;
}

std::vector<double> keep_probabilities(const Vocabulary& vocab, double threshold) {
    std::vector<double> keep(vocab.size(), 1.0);
    if (threshold <= 0.0) return keep;
    const double total = static_cast<double>(vocab.total_count());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        const double f = static_cast<double>(vocab.count(i)) / total;
        keep[i] = std::min(1.0, (std::sqrt(f / threshold) + 1.0) * threshold / f);
    }
    return keep;
}

// Draws `count` negatives, resampling collisions with the positive target
// so every update sees the same number of noise terms. Bounded retries keep
// degenerate single-token vocabularies from spinning.
void draw_negatives(const NegativeTable& table, Rng& rng, std::size_t target, int count,
                    std::vector<std::size_t>& out) {
    out.clear();
    int budget = count * 100;
    while (static_cast<int>(out.size()) < count && budget-- > 0) {
        const std::size_t idx = table.sample(rng);
        if (idx != target) out.push_back(idx);
    }
}

struct EpochAccumulator {
    double loss_sum = 0.0;
    std::uint64_t updates = 0;
};

}  // namespace detail

namespace {

// Walks one shard of sentences for one epoch. `doc_rows` is non-null for
// PV-DBOW joint training (one row per corpus document).
void train_shard(EmbeddingModel& model, std::span<const std::vector<std::size_t>> encoded,
                 std::size_t begin, std::size_t end, const std::vector<double>& keep,
                 const TrainConfig& cfg, std::uint64_t epoch, Matrix* doc_rows,
                 std::uint64_t total_positions, std::atomic<std::uint64_t>& scanned,
                 detail::EpochAccumulator& acc, std::uint64_t& centers_processed) {
    Rng rng(Rng::mix({cfg.seed, 0xE60C, epoch, begin}));
    std::vector<std::size_t> kept;
    std::vector<std::size_t> negatives;
    negatives.reserve(cfg.negatives);
    const double lr_floor = cfg.initial_lr * 1e-4;
    const std::uint64_t total_work = std::max<std::uint64_t>(1, total_positions * cfg.epochs);

    for (std::size_t si = begin; si < end; ++si) {
        const auto& ids = encoded[si];
        if (ids.empty()) continue;
        kept.clear();
        for (std::size_t id : ids) {
            scanned.fetch_add(1, std::memory_order_relaxed);
            if (keep[id] >= 1.0 || rng.uniform() < keep[id]) kept.push_back(id);
        }
        const double progress =
            static_cast<double>(scanned.load(std::memory_order_relaxed)) / total_work;
        const double lr = std::max(cfg.initial_lr * (1.0 - progress), lr_floor);

        for (std::size_t pos = 0; pos < kept.size(); ++pos) {
            const std::size_t center = kept[pos];
            ++centers_processed;
            const std::size_t b = 1 + rng.uniform_index(cfg.window);  // dynamic window
            const std::size_t lo = pos > b ? pos - b : 0;
            const std::size_t hi = std::min(kept.size() - 1, pos + b);
            for (std::size_t q = lo; q <= hi; ++q) {
                if (q == pos) continue;
                const std::size_t context = kept[q];
                detail::draw_negatives(model.negative_table(), rng, context, cfg.negatives,
                                       negatives);
                acc.loss_sum += sgns_step(model, center, context, negatives, lr);
                ++acc.updates;
            }
            if (doc_rows != nullptr) {
                detail::draw_negatives(model.negative_table(), rng, center, cfg.negatives,
                                       negatives);
                acc.loss_sum += sgns_apply(doc_rows->row(si), model, center, negatives, lr);
                ++acc.updates;
            }
        }
    }
}

}  // namespace

namespace detail {

// Core training loop shared by train_word2vec and train_pvdbow.
EmbeddingModel train_embeddings(std::span<const Sentence> corpus, const TrainConfig& config,
                                Matrix* doc_rows, std::ostream* diagnostics) {
    config.validate();
    if (corpus.empty()) throw EmptyCorpus("training corpus is empty");
    Vocabulary vocab;
    try {
        vocab = Vocabulary::build(corpus, config.min_count, config.max_vocab);
    } catch (const EmptyVocabulary&) {
        throw EmptyCorpus("corpus is empty after min_count filtering");
    }

    EmbeddingModel model(std::move(vocab), config.dim, config.seed);
    model.config() = config;

    const auto encoded = encode_corpus(corpus, model.vocab());
    const auto keep = keep_probabilities(model.vocab(), config.subsample_threshold);
    std::uint64_t total_positions = 0;
    for (const auto& ids : encoded) total_positions += ids.size();
    if (total_positions == 0) throw EmptyCorpus("corpus is empty after min_count filtering");

    if (doc_rows != nullptr) {
        *doc_rows = Matrix(encoded.size(), config.dim);
        Rng drng(Rng::mix({config.seed, 0xD0C5}));
        const double half = 0.5 / config.dim;
        for (double& v : doc_rows->data) v = drng.uniform(-half, half);
    }

    std::atomic<std::uint64_t> scanned{0};
    TrainStats stats;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EpochAccumulator total;
        std::uint64_t centers = 0;
        if (config.threads <= 1) {
            train_shard(model, encoded, 0, encoded.size(), keep, config, epoch, doc_rows,
                        total_positions, scanned, total, centers);
        } else {
            // Lock-free concurrent updates over sentence shards; results are
            // not bitwise reproducible in this mode.
            const std::size_t n = encoded.size();
            const std::size_t shards = std::min<std::size_t>(config.threads, std::max<std::size_t>(n, 1));
            std::vector<EpochAccumulator> accs(shards);
            std::vector<std::uint64_t> cents(shards, 0);
            std::vector<std::thread> workers;
            for (std::size_t t = 0; t < shards; ++t) {
                const std::size_t begin = n * t / shards;
                const std::size_t end = n * (t + 1) / shards;
                workers.emplace_back([&, t, begin, end] {
                    train_shard(model, encoded, begin, end, keep, config, epoch, doc_rows,
                                total_positions, scanned, accs[t], cents[t]);
                });
            }
            for (auto& w : workers) w.join();
            for (std::size_t t = 0; t < shards; ++t) {
                total.loss_sum += accs[t].loss_sum;
                total.updates += accs[t].updates;
                centers += cents[t];
            }
        }
        stats.centers_processed += centers;
        stats.updates += total.updates;
        const double mean_loss = total.updates > 0 ? total.loss_sum / total.updates : 0.0;
        if (!std::isfinite(mean_loss))
            throw NumericalFailure("non-finite loss at epoch " + std::to_string(epoch));
        stats.epoch_loss.push_back(mean_loss);
        if (diagnostics != nullptr) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "epoch=%d loss=%.9g\n", epoch, mean_loss);
            *diagnostics << buf;
        }
    }
    if (!model.all_finite()) throw NumericalFailure("non-finite parameter after training");
    model.stats() = stats;
    return model;
}

}  // namespace detail

EmbeddingModel train_word2vec(std::span<const Sentence> corpus, const TrainConfig& config,
                              std::ostream* diagnostics) {
    TrainConfig cfg = config;
    cfg.mode = TrainConfig::Mode::skipgram;
    return detail::train_embeddings(corpus, cfg, nullptr, diagnostics);
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, const Token& query,
                                        std::size_t k) {
    if (k < 1) throw InvalidArgument("k must be >= 1");
    const auto qi = model.vocab().find(query);
    if (!qi) throw UnknownToken("token not in vocabulary: " + query);

    const auto q = model.input_row(*qi);
    const double qnorm = std::sqrt(kernels::l2_norm_sq(q));
    std::vector<Neighbor> all;
    all.reserve(model.vocab().size() - 1);
    for (std::size_t i = 0; i < model.vocab().size(); ++i) {
        if (i == *qi) continue;
        const auto v = model.input_row(i);
        const double vnorm = std::sqrt(kernels::l2_norm_sq(v));
        const double sim =
            (qnorm == 0.0 || vnorm == 0.0) ? 0.0 : kernels::dot(q, v) / (qnorm * vnorm);
        all.push_back({model.vocab().token(i), sim});
    }
    auto cmp = [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.token < b.token;
    };
    const std::size_t take = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + take, all.end(), cmp);
    all.resize(take);
    return all;
}

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DimensionMismatch("cosine: vector dims differ");
    const double nu = std::sqrt(kernels::l2_norm_sq(u));
    const double nv = std::sqrt(kernels::l2_norm_sq(v));
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return kernels::dot(u, v) / (nu * nv);
}

namespace {

void format_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

void EmbeddingModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOFailure("cannot open " + path + " for writing");
    out << vocab_.size() << ' ' << dim_ << '\n';
    std::string line;
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        line = vocab_.token(i);
        for (double v : input_row(i)) {
            line.push_back(' ');
            format_double(line, v);
        }
        line.push_back('\n');
        out << line;
    }
    if (!out) throw IOFailure("write error on " + path);
}

EmbeddingModel EmbeddingModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOFailure("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatFailure(path + ": line 1: missing header");
    std::istringstream header(line);
    std::size_t vocab_size = 0;
    int dim = 0;
    if (!(header >> vocab_size >> dim) || vocab_size < 1 || dim < 1)
        throw FormatFailure(path + ": line 1: header must be `<vocab_size> <dim>`");

    std::vector<VocabEntry> entries;
    entries.reserve(vocab_size);
    Matrix input(vocab_size, dim);
    for (std::size_t i = 0; i < vocab_size; ++i) {
        const std::string lineno = std::to_string(i + 2);
        if (!std::getline(in, line)) throw FormatFailure(path + ": line " + lineno + ": missing row");
        std::istringstream row(line);
        std::string token;
        if (!(row >> token)) throw FormatFailure(path + ": line " + lineno + ": missing token");
        for (int d = 0; d < dim; ++d)
            if (!(row >> input.at(i, d)))
                throw FormatFailure(path + ": line " + lineno + ": expected " +
                                    std::to_string(dim) + " vector components");
        double extra;
        if (row >> extra) throw FormatFailure(path + ": line " + lineno + ": trailing data");
        // Rank-derived pseudo-counts keep the vocabulary ordering invariant.
        entries.push_back({std::move(token), vocab_size - i});
    }
    if (std::getline(in, line) && !line.empty())
        throw FormatFailure(path + ": trailing data after " + std::to_string(vocab_size) + " rows");

    EmbeddingModel model;
    model.vocab_ = Vocabulary::from_entries(std::move(entries));
    model.dim_ = dim;
    model.input_ = std::move(input);
    model.output_ = Matrix(vocab_size, dim);
    model.table_ = NegativeTable(model.vocab_);
    model.config_.dim = dim;
    return model;
}

}  // namespace puo
