#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "puo/augment.hpp"
#include "puo/errors.hpp"

using namespace puo;

namespace {

struct Fixture {
    SyntheticData synth;
    EmbeddingModel words;
    DocEmbeddingModel docs;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        SyntheticSpec spec;
        spec.categories = 4;
        spec.per_category = 10;
        spec.vocab_per_category = 8;
        spec.overlap = 0.0;
        spec.seed = 3;
        spec.corpus_lines = 240;
        Fixture out{generate_synthetic_dataset(spec), {}, {}};
        TrainConfig cfg;
        cfg.dim = 10;
        cfg.window = 3;
        cfg.negatives = 3;
        cfg.epochs = 12;
        cfg.min_count = 1;
        cfg.subsample_threshold = 0.0;
        cfg.seed = 5;
        out.words = train_word2vec(out.synth.corpus, cfg);
        out.docs = train_pvdbow(out.synth.corpus, cfg);
        return out;
    }();
    return f;
}

AugmentConfig base_config() {
    AugmentConfig cfg;
    cfg.run = 6;
    cfg.threshold = 0.0;
    cfg.k_neighbors = 5;
    cfg.copies = 3;
    cfg.seed = 1;
    cfg.quality_check = true;
    cfg.infer_steps = 15;
    return cfg;
}

std::size_t hamming(const Sentence& a, const Sentence& b) {
    REQUIRE(a.size() == b.size());
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++d;
    return d;
}

}  // namespace

TEST_CASE("impossible threshold exhausts after exactly `run` attempts") {
    const Fixture& f = fixture();
    AugmentConfig cfg = base_config();
    cfg.threshold = 1.1;  // cosine cannot exceed 1
    const auto outcome =
        augment_sentence(f.synth.dataset.records[0].sentence, f.words, &f.docs, cfg, 77);
    CHECK(!outcome.accepted());
    CHECK(outcome.attempts_used == cfg.run);
}

TEST_CASE("without the quality check the first edit is accepted") {
    const Fixture& f = fixture();
    AugmentConfig cfg = base_config();
    cfg.quality_check = false;
    const Sentence& original = f.synth.dataset.records[1].sentence;
    const auto outcome = augment_sentence(original, f.words, nullptr, cfg, 123);
    REQUIRE(outcome.accepted());
    CHECK(outcome.attempts_used == 1);
    CHECK(outcome.sentence.size() == original.size());
    CHECK(hamming(original, outcome.sentence) == 1);
    CHECK(!outcome.similarity);  // no doc model consulted

    // with a doc model attached, similarity is reported but not enforced
    const auto with_docs = augment_sentence(original, f.words, &f.docs, cfg, 123);
    REQUIRE(with_docs.accepted());
    CHECK(with_docs.similarity.has_value());
}

TEST_CASE("seeded replacement equals an independent replay of the sampling") {
    const Fixture& f = fixture();
    AugmentConfig cfg = base_config();
    cfg.quality_check = false;
    const Sentence& s = f.synth.dataset.records[2].sentence;
    const std::uint64_t stream = 9001;
    const auto outcome = augment_sentence(s, f.words, nullptr, cfg, stream);
    REQUIRE(outcome.accepted());

    // replay attempt 0 with the same derived stream
    Rng rng(Rng::mix({stream, 0}));
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (f.words.vocab().contains(s[i])) positions.push_back(i);
    const std::size_t pos = positions[rng.uniform_index(positions.size())];
    const auto neighbors = nearest_neighbors(f.words, s[pos], cfg.k_neighbors);
    double total = 0.0;
    for (const auto& n : neighbors) total += std::max(n.similarity, 0.0);
    std::size_t choice = neighbors.size() - 1;
    if (total <= 0.0) {
        choice = rng.uniform_index(neighbors.size());
    } else {
        const double r = rng.uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < neighbors.size(); ++i) {
            acc += std::max(neighbors[i].similarity, 0.0);
            if (r < acc) { choice = i; break; }
        }
    }
    Sentence expected = s;
    expected[pos] = neighbors[choice].token;
    CHECK(outcome.sentence == expected);
}

TEST_CASE("accepted edits: hamming distance one, similarity above threshold") {
    const Fixture& f = fixture();
    AugmentConfig cfg = base_config();
    cfg.threshold = 0.3;
    int accepted = 0;
    for (std::uint64_t stream = 0; stream < 200; ++stream) {
        const auto& rec = f.synth.dataset.records[stream % f.synth.dataset.records.size()];
        const auto outcome = augment_sentence(rec.sentence, f.words, &f.docs, cfg, stream);
        if (!outcome.accepted()) continue;
        ++accepted;
        CHECK(outcome.sentence.size() == rec.sentence.size());
        CHECK(hamming(rec.sentence, outcome.sentence) == 1);
        REQUIRE(outcome.similarity.has_value());
        CHECK(*outcome.similarity > cfg.threshold);
        CHECK(outcome.attempts_used >= 1);
        CHECK(outcome.attempts_used <= cfg.run);

        // replacement came from the replaced token's neighbor list
        std::size_t changed = 0;
        for (std::size_t i = 0; i < rec.sentence.size(); ++i)
            if (rec.sentence[i] != outcome.sentence[i]) changed = i;
        const auto neighbors =
            nearest_neighbors(f.words, rec.sentence[changed], cfg.k_neighbors);
        bool found = false;
        for (const auto& n : neighbors)
            if (n.token == outcome.sentence[changed]) found = true;
        CHECK(found);
    }
    CHECK(accepted > 100);  // the toy fixture accepts most attempts
}

TEST_CASE("augmentation config and precondition errors") {
    const Fixture& f = fixture();
    AugmentConfig cfg = base_config();
    CHECK_THROWS_AS(augment_sentence({"a"}, f.words, nullptr, cfg, 1), ConfigurationError);
    cfg.quality_check = false;
    CHECK_THROWS_AS(augment_sentence({"zzz-not-in-vocab"}, f.words, nullptr, cfg, 1),
                    NoAugmentableToken);
    cfg.run = 0;
    CHECK_THROWS_AS(augment_sentence(f.synth.dataset.records[0].sentence, f.words, nullptr,
                                     cfg, 1),
                    InvalidArgument);
}

TEST_CASE("augment_dataset multiplies the corpus when everything is accepted") {
    const Fixture& f = fixture();
    AugmentConfig cfg = base_config();
    cfg.threshold = -1.01;  // accept everything
    cfg.copies = 4;
    const auto before = f.synth.dataset.records;
    const AugmentedDataset out = augment_dataset(f.synth.dataset, f.words, &f.docs, cfg);

    REQUIRE(f.synth.dataset.records.size() == before.size());  // input untouched
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(f.synth.dataset.records[i].sentence == before[i].sentence);
    CHECK(out.data.records.size() == before.size() * (1 + cfg.copies));
    CHECK(out.diagnostics.attempted == before.size() * cfg.copies);
    CHECK(out.diagnostics.accepted == out.diagnostics.attempted);
    CHECK(out.diagnostics.exhausted == 0);

    // originals first, in input order
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(out.data.records[i].sentence == before[i].sentence);
        CHECK(out.data.records[i].label == before[i].label);
    }
    // per-label ratio bounded by copies+1
    std::map<std::string, std::size_t> in_counts, out_counts;
    for (const auto& r : before) ++in_counts[r.label];
    for (const auto& r : out.data.records) ++out_counts[r.label];
    for (const auto& [label, count] : in_counts) {
        CHECK(out_counts[label] >= count);
        CHECK(out_counts[label] <= count * (cfg.copies + 1));
    }
}

TEST_CASE("augment_dataset with impossible threshold returns the input") {
    const Fixture& f = fixture();
    AugmentConfig cfg = base_config();
    cfg.threshold = 1.1;
    cfg.copies = 1;
    const AugmentedDataset out = augment_dataset(f.synth.dataset, f.words, &f.docs, cfg);
    REQUIRE(out.data.records.size() == f.synth.dataset.records.size());
    for (std::size_t i = 0; i < out.data.records.size(); ++i)
        CHECK(out.data.records[i].sentence == f.synth.dataset.records[i].sentence);
    CHECK(out.diagnostics.accepted == 0);
    CHECK(out.diagnostics.exhausted == out.diagnostics.attempted);
}

TEST_CASE("augment_dataset is deterministic and thread-invariant") {
    const Fixture& f = fixture();
    AugmentConfig cfg = base_config();
    cfg.copies = 2;
    const AugmentedDataset a = augment_dataset(f.synth.dataset, f.words, &f.docs, cfg);
    const AugmentedDataset b = augment_dataset(f.synth.dataset, f.words, &f.docs, cfg);
    cfg.threads = 3;
    const AugmentedDataset c = augment_dataset(f.synth.dataset, f.words, &f.docs, cfg);
    REQUIRE(a.data.records.size() == b.data.records.size());
    REQUIRE(a.data.records.size() == c.data.records.size());
    for (std::size_t i = 0; i < a.data.records.size(); ++i) {
        CHECK(a.data.records[i].sentence == b.data.records[i].sentence);
        CHECK(a.data.records[i].sentence == c.data.records[i].sentence);
    }
    CHECK(a.diagnostics.accepted == c.diagnostics.accepted);
}

TEST_CASE("acceptance fraction is monotone non-increasing in the threshold") {
    const Fixture& f = fixture();
    AugmentConfig cfg = base_config();
    cfg.copies = 2;
    const std::vector<double> thresholds{-1.01, 0.0, 0.5, 0.9, 1.1};
    const auto curve =
        acceptance_rate_curve(f.synth.dataset, f.words, &f.docs, thresholds, cfg);
    REQUIRE(curve.size() == thresholds.size());
    CHECK(curve.front().second == doctest::Approx(1.0));
    CHECK(curve.back().second == doctest::Approx(0.0));
    for (std::size_t i = 1; i < curve.size(); ++i)
        CHECK(curve[i].second <= curve[i - 1].second + 1e-12);

    const std::vector<double> unsorted{0.5, 0.0};
    CHECK_THROWS_AS(acceptance_rate_curve(f.synth.dataset, f.words, &f.docs, unsorted, cfg),
                    InvalidArgument);
}
