#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "puo/corpus.hpp"
#include "puo/doc2vec.hpp"
#include "puo/embeddings.hpp"

namespace puo {

struct AugmentConfig {
    int run = 10;            // maximum attempts per augmented copy
    double threshold = 0.8;  // doc-similarity acceptance bar
    int k_neighbors = 10;
    int copies = 20;         // augmented copies targeted per record
    std::uint64_t seed = 1;
    bool quality_check = true;
    int infer_steps = 50;    // doc-vector inference passes for the check
    int threads = 1;

    void validate() const;  // throws InvalidArgument / ConfigurationError
};

/// Result of one augmented-copy attempt sequence.
struct AugmentOutcome {
    enum class Status { accepted, exhausted };
    Status status = Status::exhausted;
    Sentence sentence;                  // meaningful when accepted
    std::optional<double> similarity;   // set whenever a doc model was consulted
    int attempts_used = 0;

    bool accepted() const { return status == Status::accepted; }
};

struct AugmentDiagnostics {
    std::uint64_t attempted = 0;  // copy slots tried (records x copies)
    std::uint64_t accepted = 0;
    std::uint64_t exhausted = 0;
    double similarity_sum = 0.0;      // over accepted outcomes with similarity
    std::uint64_t similarity_count = 0;

    double mean_similarity() const {
        return similarity_count > 0 ? similarity_sum / similarity_count : 0.0;
    }
    void merge(const AugmentDiagnostics& other);
};

/// Memoized top-k neighbor lists; safe for concurrent lookups.
class NeighborCache {
public:
    NeighborCache(const EmbeddingModel& model, std::size_t k) : model_(model), k_(k) {}
    const std::vector<Neighbor>& get(const Token& token);

private:
    const EmbeddingModel& model_;
    std::size_t k_;
    std::unordered_map<std::string, std::vector<Neighbor>> cache_;
    std::mutex mutex_;
};

/// One run of the contextual-replacement loop: pick an in-vocabulary token
/// position uniformly, pick a replacement from its top-k neighbors with
/// probability proportional to max(cosine, 0), and — when the quality check
/// is on — accept the edit only if the inferred document vectors of the
/// original and edited sentence have cosine similarity above the threshold,
/// retrying from the ORIGINAL sentence otherwise. Without the quality check
/// the first replacement is accepted (similarity still reported when a doc
/// model is available). Each attempt draws from an independent substream of
/// `stream_seed`, so acceptance is monotone in the threshold under a fixed
/// seed. Throws NoAugmentableToken / ConfigurationError.
AugmentOutcome augment_sentence(const Sentence& s, const EmbeddingModel& words,
                                const DocEmbeddingModel* docs, const AugmentConfig& cfg,
                                std::uint64_t stream_seed);

struct AugmentedDataset {
    LabeledDataset data;
    AugmentDiagnostics diagnostics;
};

/// Augments every record `cfg.copies` times. The output holds all original
/// records first (input order), then accepted copies ordered by (record,
/// copy). Exhausted copies are dropped and counted. Deterministic under
/// cfg.seed for any thread count: record r, copy c uses the rng stream
/// mix(seed, r, c).
AugmentedDataset augment_dataset(const LabeledDataset& data, const EmbeddingModel& words,
                                 const DocEmbeddingModel* docs, const AugmentConfig& cfg);

/// Accepted fraction per threshold, all runs sharing cfg.seed. Thresholds
/// must be sorted ascending.
std::vector<std::pair<double, double>> acceptance_rate_curve(
    const LabeledDataset& data, const EmbeddingModel& words, const DocEmbeddingModel* docs,
    std::span<const double> thresholds, const AugmentConfig& cfg);

}  // namespace puo
