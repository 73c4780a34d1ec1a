#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "puo/corpus.hpp"
#include "puo/embeddings.hpp"

namespace puo {

enum class FeatureMethod { tf, tfidf, w2v_mean, w2v_median, w2v_powermean };

const char* to_string(FeatureMethod m);
FeatureMethod feature_method_from_string(const std::string& name);  // InvalidArgument

/// Row-per-document feature matrix. tf/tfidf rows are CSR sparse; embedding
/// features are dense. all-OOV documents become zero rows and are counted.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool sparse = false;
    std::vector<std::size_t> indptr;     // rows+1 entries when sparse
    std::vector<std::size_t> col_index;  // nnz entries when sparse
    std::vector<double> values;          // nnz when sparse, rows*cols dense
    std::size_t oov_rows = 0;

    double at(std::size_t r, std::size_t c) const;
    std::span<const double> dense_row(std::size_t r) const;
    bool all_finite() const;

    /// Iterates the nonzero (column, value) pairs of a row.
    template <typename Fn>
    void for_each_in_row(std::size_t r, Fn&& fn) const {
        if (sparse) {
            for (std::size_t k = indptr[r]; k < indptr[r + 1]; ++k) fn(col_index[k], values[k]);
        } else {
            for (std::size_t c = 0; c < cols; ++c) {
                const double v = values[r * cols + c];
                if (v != 0.0) fn(c, v);
            }
        }
    }

    /// Sparse: `rows cols nnz` header then `row col value` lines.
    /// Dense: space-separated rows.
    void save(const std::string& path) const;
};

/// A fitted vectorizer. tf/tfidf fit a capped vocabulary (and smoothed idf
/// weights); the embedding methods pool word vectors from an attached model.
class FeatureSpec {
public:
    explicit FeatureSpec(FeatureMethod method, std::size_t max_features = 20000);

    /// Required before fitting any w2v_* method.
    void attach_embeddings(std::shared_ptr<const EmbeddingModel> model);
    /// Loads the embedding file and attaches it (IOFailure when missing).
    void attach_embeddings(const std::string& path);

    void fit(std::span<const Sentence> documents);
    FeatureMatrix transform(std::span<const Sentence> documents) const;

    bool fitted() const { return fitted_; }
    FeatureMethod method() const { return method_; }
    std::size_t max_features() const { return max_features_; }
    std::size_t feature_count() const;
    const Vocabulary& vocabulary() const { return vocab_; }
    std::span<const double> idf() const { return idf_; }
    const EmbeddingModel* embeddings() const { return embeddings_.get(); }
    std::vector<std::string> column_names() const;

    /// Plain-text block used inside model containers; round-trips exactly.
    void write(std::ostream& out) const;
    static FeatureSpec read(std::istream& in);

private:
    FeatureMethod method_;
    std::size_t max_features_;
    bool fitted_ = false;
    Vocabulary vocab_;            // tf/tfidf
    std::vector<double> idf_;     // tfidf
    std::shared_ptr<const EmbeddingModel> embeddings_;
    int dim_ = 0;                 // embedding methods
};

}  // namespace puo
