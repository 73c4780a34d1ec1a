#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "puo/corpus.hpp"
#include "puo/matrix.hpp"
#include "puo/rng.hpp"

namespace puo {

struct TrainConfig {
    int dim = 50;
    int window = 5;
    int negatives = 5;
    int epochs = 10;
    double initial_lr = 0.025;
    std::uint64_t min_count = 5;
    double subsample_threshold = 1e-4;  // 0 disables subsampling
    std::uint64_t seed = 1;
    enum class Mode { skipgram, pvdbow } mode = Mode::skipgram;
    std::optional<std::size_t> max_vocab;
    int threads = 1;  // >1 trains lock-free over shards; not bitwise reproducible

    void validate() const;  // throws InvalidArgument
};

struct TrainStats {
    std::vector<double> epoch_loss;          // mean loss per epoch
    std::uint64_t centers_processed = 0;     // token positions used as centers
    std::uint64_t updates = 0;               // sgns updates applied
    double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

/// Unigram^power sampling distribution over vocabulary indices.
class NegativeTable {
public:
    NegativeTable() = default;
    explicit NegativeTable(const Vocabulary& vocab, double power = 0.75);
    std::size_t sample(Rng& rng) const;
    bool empty() const { return cdf_.empty(); }

private:
    std::vector<double> cdf_;
};

/// Word vectors trained with skip-gram negative sampling. Input vectors are
/// the embeddings handed to consumers; output vectors are the context-side
/// table shared with PV-DBOW document vectors.
class EmbeddingModel {
public:
    EmbeddingModel() = default;

    /// Seeded initialization: input rows uniform in [-0.5/dim, 0.5/dim),
    /// output rows zero.
    EmbeddingModel(Vocabulary vocab, int dim, std::uint64_t seed);

    const Vocabulary& vocab() const { return vocab_; }
    int dim() const { return dim_; }

    std::span<double> input_row(std::size_t i) { return input_.row(i); }
    std::span<const double> input_row(std::size_t i) const { return input_.row(i); }
    std::span<double> output_row(std::size_t i) { return output_.row(i); }
    std::span<const double> output_row(std::size_t i) const { return output_.row(i); }

    const Matrix& input_matrix() const { return input_; }
    const Matrix& output_matrix() const { return output_; }

    const NegativeTable& negative_table() const { return table_; }
    void rebuild_negative_table() { table_ = NegativeTable(vocab_); }

    TrainConfig& config() { return config_; }
    const TrainConfig& config() const { return config_; }
    TrainStats& stats() { return stats_; }
    const TrainStats& stats() const { return stats_; }

    bool all_finite() const { return input_.all_finite() && output_.all_finite(); }

    /// word2vec text format: header `<vocab_size> <dim>`, then per token one
    /// line `token v1 ... vdim` with 17-significant-digit reals (input
    /// vectors only). Round-trips bitwise at double precision.
    void save(const std::string& path) const;

    /// Loads the text format. Counts are not stored in the format, so the
    /// loaded vocabulary carries rank-derived pseudo-counts that preserve
    /// the ordering invariant.
    static EmbeddingModel load(const std::string& path);

private:
    Vocabulary vocab_;
    int dim_ = 0;
    Matrix input_;
    Matrix output_;
    NegativeTable table_;
    TrainConfig config_;
    TrainStats stats_;
};

/// Numerically stable logistic function and its log.
double stable_sigmoid(double x);
double log_sigmoid(double x);

/// One SGNS update: center vector from the input table, context and
/// negatives from the output table. Applies the gradient of
///   L = -log s(u_ctx . v_c) - sum_neg log s(-u_neg . v_c)
/// scaled by lr and returns the pre-update loss.
double sgns_step(EmbeddingModel& model, std::size_t center, std::size_t context,
                 std::span<const std::size_t> negatives, double lr);

/// Same update with an arbitrary center vector (PV-DBOW document vectors).
/// update_output=false freezes the output table (inference).
double sgns_apply(std::span<double> center_vec, EmbeddingModel& model, std::size_t target,
                  std::span<const std::size_t> negatives, double lr);
double sgns_apply_frozen(std::span<double> center_vec, const EmbeddingModel& model,
                         std::size_t target, std::span<const std::size_t> negatives, double lr);

/// Loss of the step above without applying any update.
double sgns_loss(const EmbeddingModel& model, std::span<const double> center_vec,
                 std::size_t target, std::span<const std::size_t> negatives);

/// Trains skip-gram negative sampling embeddings. Deterministic in
/// single-threaded mode under a fixed seed. Per-epoch mean losses are
/// written to `diagnostics` as `epoch=<n> loss=<f>` lines when given.
EmbeddingModel train_word2vec(std::span<const Sentence> corpus, const TrainConfig& config,
                              std::ostream* diagnostics = nullptr);

struct Neighbor {
    Token token;
    double similarity;
};

/// Top-k cosine neighbors over input vectors. Excludes the query token;
/// descending similarity, ties broken lexicographically. Throws
/// UnknownToken for OOV queries and InvalidArgument for k < 1.
std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, const Token& query,
                                        std::size_t k);

/// u.v / (|u||v|); 0 when either norm is 0. Throws DimensionMismatch.
double cosine(std::span<const double> u, std::span<const double> v);

}  // namespace puo
