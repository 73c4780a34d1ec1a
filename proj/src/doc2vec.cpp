#include "puo/doc2vec.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "puo/errors.hpp"
#include "train_internal.hpp"

namespace puo {

DocEmbeddingModel train_pvdbow(std::span<const Sentence> corpus, const TrainConfig& config,
                               std::ostream* diagnostics) {
    TrainConfig cfg = config;
    cfg.mode = TrainConfig::Mode::pvdbow;
    DocEmbeddingModel model;
    model.words = detail::train_embeddings(corpus, cfg, &model.doc_vectors, diagnostics);
    return model;
}

std::vector<double> infer_doc_vector(const DocEmbeddingModel& model, const Sentence& s, int steps,
                                     std::uint64_t seed) {
    if (steps < 0) throw InvalidArgument("steps must be >= 0");
    const Vocabulary& vocab = model.words.vocab();
    std::vector<std::size_t> ids;
    ids.reserve(s.size());
    for (const Token& t : s)
        if (auto idx = vocab.find(t)) ids.push_back(*idx);
    if (ids.empty()) throw AllTokensUnknown("every token of the sentence is out of vocabulary");

    const int dim = model.words.dim();
    Rng rng(Rng::mix({seed, 0x1FE6}));
    std::vector<double> vec(dim);
    const double half = 0.5 / dim;
    for (double& v : vec) v = rng.uniform(-half, half);

    const TrainConfig& cfg = model.words.config();
    const double lr0 = cfg.initial_lr;
    const double lr1 = cfg.initial_lr / 100.0;
    std::vector<std::size_t> negatives;
    for (int step = 0; step < steps; ++step) {
        const double t = static_cast<double>(step) / steps;
        const double lr = lr0 + (lr1 - lr0) * t;
        for (std::size_t id : ids) {
            detail::draw_negatives(model.words.negative_table(), rng, id, cfg.negatives,
                                   negatives);
            sgns_apply_frozen(vec, model.words, id, negatives, lr);
        }
    }
    return vec;
}

void DocEmbeddingModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOFailure("cannot open " + path + " for writing");
    const Vocabulary& vocab = words.vocab();
    const TrainConfig& cfg = words.config();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.initial_lr);
    out << "PUO-DOC 1\n"
        << vocab.size() << ' ' << words.dim() << ' ' << cfg.negatives << ' ' << buf << ' '
        << infer_steps << '\n';
    for (std::size_t i = 0; i < vocab.size(); ++i)
        out << vocab.token(i) << ' ' << vocab.count(i) << '\n';
    std::string line;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        line.clear();
        for (int d = 0; d < words.dim(); ++d) {
            if (d > 0) line.push_back(' ');
            std::snprintf(buf, sizeof(buf), "%.17g", words.output_row(i)[d]);
            line += buf;
        }
        line.push_back('\n');
        out << line;
    }
    if (!out) throw IOFailure("write error on " + path);
}

DocEmbeddingModel DocEmbeddingModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOFailure("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "PUO-DOC 1")
        throw FormatFailure(path + ": line 1: expected `PUO-DOC 1`");
    if (!std::getline(in, line)) throw FormatFailure(path + ": line 2: missing header");
    std::istringstream header(line);
    std::size_t vocab_size = 0;
    int dim = 0, negatives = 0, steps = 0;
    double initial_lr = 0.0;
    if (!(header >> vocab_size >> dim >> negatives >> initial_lr >> steps) || vocab_size < 1 ||
        dim < 1 || negatives < 1 || !(initial_lr > 0.0) || steps < 0)
        throw FormatFailure(path + ": line 2: bad header fields");

    std::vector<VocabEntry> entries;
    entries.reserve(vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i) {
        const std::string lineno = std::to_string(i + 3);
        if (!std::getline(in, line))
            throw FormatFailure(path + ": line " + lineno + ": missing vocabulary row");
        std::istringstream row(line);
        VocabEntry e;
        if (!(row >> e.token >> e.count) || e.count < 1)
            throw FormatFailure(path + ": line " + lineno + ": expected `token count`");
        entries.push_back(std::move(e));
    }

    // The loaded handle reconstructs word-model state around the persisted
    // output matrix; input vectors are not part of this container.
    EmbeddingModel words(Vocabulary::from_entries(std::move(entries)), dim, /*seed=*/0);
    for (std::size_t i = 0; i < vocab_size; ++i)
        for (double& v : words.input_row(i)) v = 0.0;
    for (std::size_t i = 0; i < vocab_size; ++i) {
        const std::string lineno = std::to_string(i + 3 + vocab_size);
        if (!std::getline(in, line))
            throw FormatFailure(path + ": line " + lineno + ": missing vector row");
        std::istringstream row(line);
        for (int d = 0; d < dim; ++d)
            if (!(row >> words.output_row(i)[d]))
                throw FormatFailure(path + ": line " + lineno + ": expected " +
                                    std::to_string(dim) + " vector components");
    }
    words.config().dim = dim;
    words.config().negatives = negatives;
    words.config().initial_lr = initial_lr;
    words.config().mode = TrainConfig::Mode::pvdbow;

    DocEmbeddingModel model;
    model.words = std::move(words);
    model.infer_steps = steps;
    return model;
}

}  // namespace puo
