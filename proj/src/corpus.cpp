#include "puo/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include "puo/errors.hpp"
#include "puo/rng.hpp"
#include "puo/text.hpp"

namespace puo {

namespace {

bool entry_order_less(const VocabEntry& a, const VocabEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.token < b.token;
}

}  // namespace

Vocabulary Vocabulary::build(std::span<const Sentence> sentences, std::uint64_t min_count,
                             std::optional<std::size_t> max_size) {
    if (min_count < 1) throw InvalidArgument("min_count must be >= 1");
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const Sentence& s : sentences)
        for (const Token& t : s) ++counts[t];

    std::vector<VocabEntry> entries;
    entries.reserve(counts.size());
    for (auto& [token, count] : counts)
        if (count >= min_count) entries.push_back({token, count});
    std::sort(entries.begin(), entries.end(), entry_order_less);
    if (max_size && entries.size() > *max_size) entries.resize(*max_size);
    if (entries.empty()) throw EmptyVocabulary("no token met the vocabulary thresholds");
    return from_entries(std::move(entries));
}

Vocabulary Vocabulary::from_entries(std::vector<VocabEntry> entries) {
    Vocabulary v;
    v.entries_ = std::move(entries);
    v.index_.reserve(v.entries_.size());
    for (std::size_t i = 0; i < v.entries_.size(); ++i) {
        if (i > 0 && !entry_order_less(v.entries_[i - 1], v.entries_[i]))
            throw FormatFailure("vocabulary entries out of order at position " + std::to_string(i));
        if (!v.index_.emplace(v.entries_[i].token, i).second)
            throw FormatFailure("duplicate vocabulary token: " + v.entries_[i].token);
        v.total_count_ += v.entries_[i].count;
    }
    return v;
}

void LabeledDataset::rebuild_label_set() {
    std::set<std::string> distinct;
    for (const auto& r : records) distinct.insert(r.label);
    labels.assign(distinct.begin(), distinct.end());
}

Sentence tokenize_lenient(std::string_view raw) {
    auto cps = text::decode_utf8(raw);
    text::compose_nfc(cps);
    for (auto& cp : cps) cp = text::to_lower(cp);

    Sentence out;
    std::size_t i = 0;
    const std::size_t n = cps.size();
    while (i < n) {
        while (i < n && text::is_space(cps[i])) ++i;
        std::size_t j = i;
        while (j < n && !text::is_space(cps[j])) ++j;
        if (j > i) {
            std::size_t lo = i, hi = j;
            while (lo < hi && text::is_strippable(cps[lo])) ++lo;
            while (hi > lo && text::is_strippable(cps[hi - 1])) --hi;
            if (hi > lo)
                out.push_back(text::encode_utf8({cps.data() + lo, hi - lo}));
        }
        i = j;
    }
    return out;
}

Sentence tokenize(std::string_view raw) {
    Sentence s = tokenize_lenient(raw);
    if (s.empty()) throw EmptySentence("no token survived tokenization");
    return s;
}

std::string sentence_text(const Sentence& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += s[i];
    }
    return out;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOFailure("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    if (in.bad()) throw IOFailure("read error on " + path);
    return lines;
}

}  // namespace

TextCorpus load_text_corpus(const std::string& path) {
    TextCorpus corpus;
    std::unordered_set<std::string> distinct;
    const auto lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        Sentence s;
        try {
            s = tokenize_lenient(lines[ln]);
        } catch (const EncodingFailure& e) {
            throw EncodingFailure(std::string(e.what()) + " at line " + std::to_string(ln + 1));
        }
        if (s.empty()) continue;
        corpus.stats.token_count += s.size();
        for (const Token& t : s) distinct.insert(t);
        corpus.sentences.push_back(std::move(s));
    }
    corpus.stats.line_count = corpus.sentences.size();
    corpus.stats.vocab_size = distinct.size();
    return corpus;
}

namespace {

std::string trim_label(std::string_view raw) {
    auto cps = text::decode_utf8(raw);
    std::size_t lo = 0, hi = cps.size();
    while (lo < hi && text::is_space(cps[lo])) ++lo;
    while (hi > lo && text::is_space(cps[hi - 1])) --hi;
    return text::encode_utf8({cps.data() + lo, hi - lo});
}

}  // namespace

LabeledDataset load_labeled_dataset(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw FormatFailure(path + ": missing header row");
    if (lines[0] != "label\ttext")
        throw FormatFailure(path + ": row 1: header must be `label<TAB>text`");

    LabeledDataset data;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const std::string& line = lines[ln];
        if (line.empty()) continue;
        const auto row = std::to_string(ln + 1);
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw FormatFailure(path + ": row " + row + ": expected 2 tab-separated columns");
        if (line.find('\t', tab + 1) != std::string::npos)
            throw FormatFailure(path + ": row " + row + ": tabs are forbidden inside fields");

        std::string label;
        Sentence sentence;
        try {
            label = trim_label(std::string_view(line).substr(0, tab));
            sentence = tokenize_lenient(std::string_view(line).substr(tab + 1));
        } catch (const EncodingFailure& e) {
            throw EncodingFailure(std::string(e.what()) + " at row " + row);
        }
        if (label.empty()) throw FormatFailure(path + ": row " + row + ": empty label");
        if (sentence.empty()) {
            ++data.skipped_rows;
            continue;
        }
        data.records.push_back({std::move(sentence), std::move(label)});
    }
    if (data.records.empty()) throw EmptyDataset(path + ": no usable rows");
    data.rebuild_label_set();
    return data;
}

void save_labeled_dataset(const LabeledDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOFailure("cannot open " + path + " for writing");
    out << "label\ttext\n";
    for (const auto& rec : data.records)
        out << rec.label << '\t' << sentence_text(rec.sentence) << '\n';
    if (!out) throw IOFailure("write error on " + path);
}

namespace {

std::string zero_pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

SyntheticData generate_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.categories < 2) throw InvalidArgument("categories must be >= 2");
    if (spec.per_category < 1) throw InvalidArgument("per_category must be >= 1");
    if (spec.vocab_per_category < 2) throw InvalidArgument("vocab_per_category must be >= 2");
    if (spec.overlap < 0.0 || spec.overlap > 1.0) throw InvalidArgument("overlap must be in [0,1]");

    const int n_shared = static_cast<int>(spec.overlap * spec.vocab_per_category + 0.5);
    const int n_exclusive = spec.vocab_per_category - n_shared;
    if (n_exclusive < 1) throw InvalidArgument("overlap leaves no category-exclusive words");

    std::vector<Token> shared;
    for (int i = 0; i < n_shared; ++i) shared.push_back("shw" + zero_pad(i, 3));

    SyntheticData out;
    out.exclusive_vocab.resize(spec.categories);
    std::vector<std::vector<Token>> category_vocab(spec.categories);
    for (int c = 0; c < spec.categories; ++c) {
        for (int i = 0; i < n_exclusive; ++i)
            out.exclusive_vocab[c].push_back("c" + zero_pad(c, 2) + "w" + zero_pad(i, 3));
        category_vocab[c] = out.exclusive_vocab[c];
        category_vocab[c].insert(category_vocab[c].end(), shared.begin(), shared.end());
    }

    // Labeled records: 6-10 tokens from the category vocabulary, the first
    // forced exclusive so every record carries category signal.
    Rng rng(Rng::mix({spec.seed, 0x5D47A}));
    out.dataset.records.reserve(static_cast<std::size_t>(spec.categories) * spec.per_category);
    for (int c = 0; c < spec.categories; ++c) {
        const auto& vocab = category_vocab[c];
        const auto& excl = out.exclusive_vocab[c];
        const std::string label = "cat" + zero_pad(c, 2);
        for (int r = 0; r < spec.per_category; ++r) {
            const std::size_t len = 6 + rng.uniform_index(5);
            Sentence s;
            s.push_back(excl[rng.uniform_index(excl.size())]);
            while (s.size() < len) s.push_back(vocab[rng.uniform_index(vocab.size())]);
            out.dataset.records.push_back({std::move(s), label});
        }
    }
    out.dataset.rebuild_label_set();

    // Companion corpus: two anchor words per line keep category words in
    // shared contexts, which is what pulls same-category embeddings together.
    Rng crng(Rng::mix({spec.seed, 0xC0A9}));
    const int n_anchor = std::min(3, n_exclusive);
    out.corpus.reserve(spec.corpus_lines);
    for (std::size_t ln = 0; ln < spec.corpus_lines; ++ln) {
        const int c = static_cast<int>(ln % spec.categories);
        const auto& vocab = category_vocab[c];
        const auto& excl = out.exclusive_vocab[c];
        Sentence s(8);
        s[0] = excl[crng.uniform_index(n_anchor)];
        s[4] = excl[crng.uniform_index(n_anchor)];
        for (std::size_t p : {1u, 2u, 3u, 5u, 6u, 7u})
            s[p] = vocab[crng.uniform_index(vocab.size())];
        out.corpus.push_back(std::move(s));
    }
    return out;
}

}  // namespace puo
