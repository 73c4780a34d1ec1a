#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "puo/corpus.hpp"
#include "puo/errors.hpp"
#include "puo/rng.hpp"

using namespace puo;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("tokenize lowercases, splits, and strips edge punctuation") {
    CHECK(tokenize("Tsela ya N1 ka Borwa") == Sentence{"tsela", "ya", "n1", "ka", "borwa"});
    CHECK(tokenize("  A  ") == Sentence{"a"});
    CHECK(tokenize("word.") == Sentence{"word"});
    CHECK(tokenize("\"quoted,\" (parens)!") == Sentence{"quoted", "parens"});
    CHECK(tokenize("don't stop-me 3.5") == Sentence{"don't", "stop-me", "3.5"});
}

TEST_CASE("tokenize handles unicode input") {
    // combining caron composes, then lowercases
    CHECK(tokenize("S\xcc\x8c" "oba") == Sentence{"\xc5\xa1oba"});
    CHECK(tokenize("\xc5\xa0oba") == Sentence{"\xc5\xa1oba"});   // Š precomposed
    CHECK(tokenize("caf\xc3\x89") == Sentence{"caf\xc3\xa9"});   // É
    CHECK(tokenize("a\xc2\xa0" "b") == Sentence{"a", "b"});      // NBSP splits
    CHECK_THROWS_AS(tokenize("ok \xff\xfe"), EncodingFailure);
}

TEST_CASE("tokenize rejects empty results") {
    CHECK_THROWS_AS(tokenize(""), EmptySentence);
    CHECK_THROWS_AS(tokenize("  ...  !!"), EmptySentence);
    CHECK(tokenize_lenient("...").empty());
}

TEST_CASE("tokenize is idempotent over join") {
    Rng rng(99);
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789.'-!?\"";
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const int len = 1 + rng.uniform_index(60);
        for (int i = 0; i < len; ++i) {
          if (rng.uniform() < 0.18) text.push_back(' ');
          else text.push_back(alphabet[rng.uniform_index(alphabet.size())]);
        }
        const Sentence first = tokenize_lenient(text);
        const Sentence second = tokenize_lenient(sentence_text(first));
        CHECK(first == second);
    }
}

TEST_CASE("vocabulary counting, thresholds, and order") {
    const std::vector<Sentence> corpus{{"a", "b"}, {"a"}};
    const Vocabulary v1 = Vocabulary::build(corpus, 1);
    REQUIRE(v1.size() == 2);
    CHECK(v1.token(0) == "a");
    CHECK(v1.count(0) == 2);
    CHECK(v1.token(1) == "b");
    CHECK(v1.count(1) == 1);
    CHECK(v1.find("a") == 0);
    CHECK(!v1.find("zz"));

    const Vocabulary v2 = Vocabulary::build(corpus, 2);
    REQUIRE(v2.size() == 1);
    CHECK(v2.token(0) == "a");

    CHECK_THROWS_AS(Vocabulary::build(corpus, 3), EmptyVocabulary);
    CHECK_THROWS_AS(Vocabulary::build(corpus, 0), InvalidArgument);
}

TEST_CASE("vocabulary max_size keeps the top entries") {
    std::vector<Sentence> corpus;
    // 30 distinct tokens with distinct counts
    for (int t = 0; t < 30; ++t)
        for (int c = 0; c <= t; ++c) corpus.push_back({"tok" + std::to_string(t)});
    const Vocabulary capped = Vocabulary::build(corpus, 1, 10);
    REQUIRE(capped.size() == 10);
    CHECK(capped.token(0) == "tok29");
    CHECK(capped.count(9) == 21);
}

TEST_CASE("vocabulary order is a total order: count desc then lexicographic") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Sentence> corpus;
        const int types = 2 + rng.uniform_index(40);
        for (int t = 0; t < types; ++t) {
            const int count = 1 + rng.uniform_index(6);
            for (int c = 0; c < count; ++c)
                corpus.push_back({"w" + std::to_string(rng.uniform_index(types))});
        }
        const Vocabulary v = Vocabulary::build(corpus, 1);
        for (std::size_t i = 1; i < v.size(); ++i) {
            const bool ordered = v.count(i - 1) > v.count(i) ||
                                 (v.count(i - 1) == v.count(i) && v.token(i - 1) < v.token(i));
            CHECK(ordered);
            CHECK(v.find(v.token(i)) == i);
        }
    }
}

TEST_CASE("load_text_corpus skips blanks and reports stats") {
    const auto path = temp_file("puo_corpus_a.txt", "one two\n\nthree two\n");
    const TextCorpus corpus = load_text_corpus(path.string());
    REQUIRE(corpus.sentences.size() == 2);
    CHECK(corpus.stats.line_count == 2);
    CHECK(corpus.stats.token_count == 4);
    CHECK(corpus.stats.vocab_size == 3);

    std::size_t total = 0;
    for (const Sentence& s : corpus.sentences) total += s.size();
    CHECK(total == corpus.stats.token_count);
}

TEST_CASE("load_text_corpus: empty file and 219-line fixture") {
    const auto empty = temp_file("puo_corpus_empty.txt", "");
    const TextCorpus none = load_text_corpus(empty.string());
    CHECK(none.sentences.empty());
    CHECK(none.stats.line_count == 0);
    CHECK(none.stats.token_count == 0);
    CHECK(none.stats.vocab_size == 0);

    std::string many;
    for (int i = 0; i < 219; ++i) many += "headline number " + std::to_string(i) + "\n";
    const auto fixture = temp_file("puo_corpus_219.txt", many);
    CHECK(load_text_corpus(fixture.string()).stats.line_count == 219);

    CHECK_THROWS_AS(load_text_corpus("/nonexistent/path.txt"), IOFailure);
    const auto bad = temp_file("puo_corpus_bad.txt", "fine\nbroken \xff\xfe here\n");
    try {
        load_text_corpus(bad.string());
        FAIL("expected EncodingFailure");
    } catch (const EncodingFailure& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("load_labeled_dataset parses the TSV schema") {
    const auto path = temp_file("puo_data_ok.tsv",
                                "label\ttext\n"
                                "Traffic\tTsela ya N1 ka Borwa\n"
                                " Legal \tTona ya toka Michael Masutha\n"
                                "Traffic\t...\n");
    const LabeledDataset data = load_labeled_dataset(path.string());
    REQUIRE(data.records.size() == 2);
    CHECK(data.records[0].label == "Traffic");
    CHECK(data.records[0].sentence == Sentence{"tsela", "ya", "n1", "ka", "borwa"});
    CHECK(data.records[1].label == "Legal");  // whitespace trimmed
    CHECK(data.labels == std::vector<std::string>{"Legal", "Traffic"});
    CHECK(data.skipped_rows == 1);  // punctuation-only text
}

TEST_CASE("load_labeled_dataset error paths") {
    const auto no_header = temp_file("puo_data_h.tsv", "text\tlabel\nx\ty\n");
    CHECK_THROWS_AS(load_labeled_dataset(no_header.string()), FormatFailure);

    const auto three_cols = temp_file("puo_data_3.tsv", "label\ttext\na\tb\tc\n");
    try {
        load_labeled_dataset(three_cols.string());
        FAIL("expected FormatFailure");
    } catch (const FormatFailure& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    const auto one_col = temp_file("puo_data_1.tsv", "label\ttext\njusttext\n");
    CHECK_THROWS_AS(load_labeled_dataset(one_col.string()), FormatFailure);

    const auto header_only = temp_file("puo_data_empty.tsv", "label\ttext\n");
    CHECK_THROWS_AS(load_labeled_dataset(header_only.string()), EmptyDataset);
}

TEST_CASE("labeled dataset round-trips through save/load") {
    const auto path = temp_file("puo_data_rt.tsv",
                                "label\ttext\n"
                                "Sports\tDikgwele tsa maoto!\n"
                                "Crime\tBosenyi jwa dira\n"
                                "Sports\tMotshameko o o tshwanetseng\n");
    const LabeledDataset first = load_labeled_dataset(path.string());
    const auto copy = std::filesystem::temp_directory_path() / "puo_data_rt2.tsv";
    save_labeled_dataset(first, copy.string());
    const LabeledDataset second = load_labeled_dataset(copy.string());
    REQUIRE(first.records.size() == second.records.size());
    for (std::size_t i = 0; i < first.records.size(); ++i) {
        CHECK(first.records[i].label == second.records[i].label);
        CHECK(first.records[i].sentence == second.records[i].sentence);
    }
    CHECK(first.labels == second.labels);
}

TEST_CASE("synthetic dataset shape and determinism") {
    SyntheticSpec spec;
    spec.categories = 10;
    spec.per_category = 20;
    spec.vocab_per_category = 30;
    spec.overlap = 0.1;
    spec.seed = 1;
    spec.corpus_lines = 100;
    const SyntheticData a = generate_synthetic_dataset(spec);
    CHECK(a.dataset.records.size() == 200);
    CHECK(a.dataset.labels.size() == 10);
    CHECK(a.corpus.size() == 100);

    const SyntheticData b = generate_synthetic_dataset(spec);
    REQUIRE(a.dataset.records.size() == b.dataset.records.size());
    for (std::size_t i = 0; i < a.dataset.records.size(); ++i) {
        CHECK(a.dataset.records[i].label == b.dataset.records[i].label);
        CHECK(a.dataset.records[i].sentence == b.dataset.records[i].sentence);
    }

    spec.seed = 2;
    const SyntheticData c = generate_synthetic_dataset(spec);
    bool any_difference = false;
    for (std::size_t i = 0; i < a.dataset.records.size(); ++i)
        if (a.dataset.records[i].sentence != c.dataset.records[i].sentence) any_difference = true;
    CHECK(any_difference);
}

TEST_CASE("synthetic overlap controls vocabulary sharing") {
    SyntheticSpec spec;
    spec.categories = 4;
    spec.per_category = 10;
    spec.vocab_per_category = 12;
    spec.overlap = 0.0;
    spec.corpus_lines = 50;
    const SyntheticData disjoint = generate_synthetic_dataset(spec);

    std::vector<std::set<Token>> vocabs(4);
    for (const auto& rec : disjoint.dataset.records) {
        const int c = std::stoi(rec.label.substr(3));
        vocabs[c].insert(rec.sentence.begin(), rec.sentence.end());
    }
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            for (const Token& t : vocabs[i]) CHECK(vocabs[j].count(t) == 0);

    CHECK_THROWS_AS(generate_synthetic_dataset({1, 10, 10, 0.0, 1, 10}), InvalidArgument);
}
