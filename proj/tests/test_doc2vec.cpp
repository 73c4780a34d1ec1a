#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "puo/doc2vec.hpp"
#include "puo/errors.hpp"

using namespace puo;

namespace {

TrainConfig toy_config(std::uint64_t seed, int epochs = 60) {
    TrainConfig cfg;
    cfg.dim = 12;
    cfg.window = 2;
    cfg.negatives = 3;
    cfg.epochs = epochs;
    cfg.min_count = 1;
    cfg.subsample_threshold = 0.0;
    cfg.seed = seed;
    return cfg;
}

std::vector<Sentence> three_doc_corpus() {
    // docs 0 and 1 identical; doc 2 disjoint vocabulary
    std::vector<Sentence> corpus;
    corpus.push_back({"apple", "banana", "cherry", "apple", "banana", "cherry"});
    corpus.push_back({"apple", "banana", "cherry", "apple", "banana", "cherry"});
    corpus.push_back({"xylo", "ypsil", "zeta", "xylo", "ypsil", "zeta"});
    return corpus;
}

}  // namespace

TEST_CASE("doc vector count equals corpus size") {
    const auto corpus = three_doc_corpus();
    const DocEmbeddingModel model = train_pvdbow(corpus, toy_config(1, 5));
    CHECK(model.doc_vectors.rows == 3);
    CHECK(model.doc_vectors.cols == 12);
    CHECK(model.doc_vectors.all_finite());
    CHECK(model.words.all_finite());
}

TEST_CASE("identical documents embed closer than disjoint ones") {
    const auto corpus = three_doc_corpus();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const DocEmbeddingModel model = train_pvdbow(corpus, toy_config(seed));
        const double twin = cosine(model.doc_vectors.row(0), model.doc_vectors.row(1));
        const double stranger = cosine(model.doc_vectors.row(0), model.doc_vectors.row(2));
        CHECK(twin > stranger);
    }
}

TEST_CASE("pvdbow step gradient matches finite differences") {
    const auto corpus = three_doc_corpus();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        DocEmbeddingModel model = train_pvdbow(corpus, toy_config(seed, 3));
        const std::size_t target = seed % model.words.vocab().size();
        std::vector<std::size_t> negatives;
        for (std::size_t i = 0; i < model.words.vocab().size() && negatives.size() < 2; ++i)
            if (i != target) negatives.push_back(i);

        // doc vector plays the center role
        std::vector<double> center(model.doc_vectors.row(0).begin(),
                                   model.doc_vectors.row(0).end());
        std::vector<double> stepped = center;
        DocEmbeddingModel scratch = model;
        sgns_apply(stepped, scratch.words, target, negatives, 1.0);

        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t d = 0; d < center.size(); ++d) {
            const double analytic = center[d] - stepped[d];
            auto probe = center;
            probe[d] = center[d] + h;
            const double up = sgns_loss(model.words, probe, target, negatives);
            probe[d] = center[d] - h;
            const double down = sgns_loss(model.words, probe, target, negatives);
            const double fd = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(analytic - fd) /
                                        std::max({std::abs(analytic), std::abs(fd), 1e-6}));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("inference lands near the trained doc vector") {
    const auto corpus = three_doc_corpus();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const DocEmbeddingModel model = train_pvdbow(corpus, toy_config(seed));
        const auto inferred = infer_doc_vector(model, corpus[0], 50, seed * 7 + 1);
        const double own = cosine(inferred, model.doc_vectors.row(0));
        const double other = cosine(inferred, model.doc_vectors.row(2));
        CHECK(own > other);
    }
}

TEST_CASE("inference edge cases") {
    const auto corpus = three_doc_corpus();
    const DocEmbeddingModel model = train_pvdbow(corpus, toy_config(2, 5));

    // steps=0 returns the seeded initialization, deterministically
    const auto a = infer_doc_vector(model, corpus[1], 0, 11);
    const auto b = infer_doc_vector(model, corpus[1], 0, 11);
    CHECK(a == b);
    const double half = 0.5 / model.dim();
    for (double v : a) {
        CHECK(v >= -half);
        CHECK(v < half);
    }
    const auto c = infer_doc_vector(model, corpus[1], 0, 12);
    CHECK(a != c);

    CHECK_THROWS_AS(infer_doc_vector(model, Sentence{"unseen", "words"}, 10, 1),
                    AllTokensUnknown);

    // OOV tokens are skipped, in-vocabulary remainder drives the update
    const auto mixed = infer_doc_vector(model, Sentence{"unseen", "apple"}, 10, 1);
    CHECK(mixed.size() == 12);
}

TEST_CASE("doc model container round-trips inference state") {
    const auto corpus = three_doc_corpus();
    const DocEmbeddingModel model = train_pvdbow(corpus, toy_config(4, 20));
    const auto path = std::filesystem::temp_directory_path() / "puo_doc_rt.pdv";
    model.save(path.string());
    const DocEmbeddingModel loaded = DocEmbeddingModel::load(path.string());

    CHECK(loaded.dim() == model.dim());
    CHECK(loaded.infer_steps == model.infer_steps);
    REQUIRE(loaded.words.vocab().size() == model.words.vocab().size());
    for (std::size_t i = 0; i < model.words.vocab().size(); ++i) {
        CHECK(loaded.words.vocab().token(i) == model.words.vocab().token(i));
        CHECK(loaded.words.vocab().count(i) == model.words.vocab().count(i));
        for (int d = 0; d < model.dim(); ++d)
            CHECK(loaded.words.output_row(i)[d] == model.words.output_row(i)[d]);  // bitwise
    }

    // frozen inference depends only on persisted state: identical results
    const auto from_memory = infer_doc_vector(model, corpus[0], 25, 99);
    const auto from_disk = infer_doc_vector(loaded, corpus[0], 25, 99);
    CHECK(from_memory == from_disk);

    CHECK_THROWS_AS(DocEmbeddingModel::load("/no/such/file.pdv"), IOFailure);
}
