#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace puo {

/// A token is a lowercased, NFC-normalized, whitespace-free UTF-8 string.
using Token = std::string;

/// An ordered token sequence. Always non-empty when produced by tokenize().
using Sentence = std::vector<Token>;

struct VocabEntry {
    Token token;
    std::uint64_t count = 0;
};

/// Ordered token set with frequencies. Entries are sorted by descending
/// count, ties broken lexicographically; the index map is the inverse of
/// the entry order.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Counts tokens across sentences, drops those below min_count, and
    /// keeps at most max_size entries. Throws EmptyVocabulary when nothing
    /// survives and InvalidArgument when min_count < 1.
    static Vocabulary build(std::span<const Sentence> sentences, std::uint64_t min_count = 1,
                            std::optional<std::size_t> max_size = std::nullopt);

    /// Adopts pre-ordered entries (used by model loaders). Validates the
    /// ordering invariant and uniqueness; throws FormatFailure on violation.
    static Vocabulary from_entries(std::vector<VocabEntry> entries);

    std::size_t size() const { return entries_.size(); }
    const VocabEntry& entry(std::size_t i) const { return entries_[i]; }
    const Token& token(std::size_t i) const { return entries_[i].token; }
    std::uint64_t count(std::size_t i) const { return entries_[i].count; }
    std::uint64_t total_count() const { return total_count_; }

    std::optional<std::size_t> find(const Token& token) const {
        auto it = index_.find(token);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    bool contains(const Token& token) const { return index_.count(token) != 0; }

private:
    std::vector<VocabEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t total_count_ = 0;
};

struct CorpusStats {
    std::size_t line_count = 0;   // sentences produced (blank lines excluded)
    std::size_t token_count = 0;  // sum of sentence lengths
    std::size_t vocab_size = 0;   // distinct tokens
};

struct TextCorpus {
    std::vector<Sentence> sentences;
    CorpusStats stats;
};

struct LabeledRecord {
    Sentence sentence;
    std::string label;
};

struct LabeledDataset {
    std::vector<LabeledRecord> records;
    std::vector<std::string> labels;  // distinct labels, sorted
    std::size_t skipped_rows = 0;     // rows dropped for empty text on load

    /// Recomputes the distinct sorted label set from the records.
    void rebuild_label_set();
};

/// Lowercases, NFC-normalizes, splits on Unicode whitespace and strips
/// punctuation from token edges. Numeric tokens are preserved. Throws
/// EmptySentence when nothing survives.
Sentence tokenize(std::string_view text);

/// tokenize() that returns an empty sentence instead of throwing.
Sentence tokenize_lenient(std::string_view text);

/// Joins tokens with single spaces. tokenize(sentence_text(s)) == s.
std::string sentence_text(const Sentence& s);

/// Reads a one-document-per-line UTF-8 file. Blank (and punctuation-only)
/// lines are skipped; stats reflect post-tokenization counts. Accepts LF and
/// CRLF endings. Throws IOFailure / EncodingFailure (with line number).
TextCorpus load_text_corpus(const std::string& path);

/// Reads a UTF-8 TSV with header `label<TAB>text`. Rows whose text
/// tokenizes to nothing are skipped and counted in skipped_rows. Throws
/// FormatFailure (with row number), EmptyDataset, IOFailure,
/// EncodingFailure.
LabeledDataset load_labeled_dataset(const std::string& path);

/// Writes the TSV format load_labeled_dataset reads; round-trips exactly.
void save_labeled_dataset(const LabeledDataset& data, const std::string& path);

struct SyntheticSpec {
    int categories = 10;
    int per_category = 20;
    int vocab_per_category = 30;
    double overlap = 0.1;  // fraction of each category vocabulary shared
    std::uint64_t seed = 1;
    std::size_t corpus_lines = 5000;
};

struct SyntheticData {
    LabeledDataset dataset;
    std::vector<Sentence> corpus;  // companion unlabeled corpus
    /// Category-exclusive tokens, per category, in generation order.
    std::vector<std::vector<Token>> exclusive_vocab;
};

/// Deterministic labeled dataset + companion corpus generator. Category
/// vocabularies pairwise overlap by `overlap`; the companion corpus keeps
/// same-category words in shared contexts so their embeddings converge.
SyntheticData generate_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace puo
