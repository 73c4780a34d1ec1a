#include "puo/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "puo/errors.hpp"
#include "puo/kernels.hpp"

namespace puo {

const char* to_string(FeatureMethod m) {
    switch (m) {
        case FeatureMethod::tf: return "tf";
        case FeatureMethod::tfidf: return "tfidf";
        case FeatureMethod::w2v_mean: return "w2v-mean";
        case FeatureMethod::w2v_median: return "w2v-median";
        case FeatureMethod::w2v_powermean: return "w2v-powermean";
    }
    return "?";
}

FeatureMethod feature_method_from_string(const std::string& name) {
    if (name == "tf") return FeatureMethod::tf;
    if (name == "tfidf") return FeatureMethod::tfidf;
    if (name == "w2v-mean") return FeatureMethod::w2v_mean;
    if (name == "w2v-median") return FeatureMethod::w2v_median;
    if (name == "w2v-powermean") return FeatureMethod::w2v_powermean;
    throw InvalidArgument("unknown feature method: " + name);
}

double FeatureMatrix::at(std::size_t r, std::size_t c) const {
    if (!sparse) return values[r * cols + c];
    for (std::size_t k = indptr[r]; k < indptr[r + 1]; ++k)
        if (col_index[k] == c) return values[k];
    return 0.0;
}

std::span<const double> FeatureMatrix::dense_row(std::size_t r) const {
    return {values.data() + r * cols, cols};
}

bool FeatureMatrix::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

void FeatureMatrix::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOFailure("cannot open " + path + " for writing");
    char buf[40];
    if (sparse) {
        out << rows << ' ' << cols << ' ' << values.size() << '\n';
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = indptr[r]; k < indptr[r + 1]; ++k) {
                std::snprintf(buf, sizeof(buf), "%.17g", values[k]);
                out << r << ' ' << col_index[k] << ' ' << buf << '\n';
            }
    } else {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", values[r * cols + c]);
                if (c > 0) out << ' ';
                out << buf;
            }
            out << '\n';
        }
    }
    if (!out) throw IOFailure("write error on " + path);
}

FeatureSpec::FeatureSpec(FeatureMethod method, std::size_t max_features)
    : method_(method), max_features_(max_features) {
    if (max_features < 1) throw InvalidArgument("max_features must be >= 1");
}

void FeatureSpec::attach_embeddings(std::shared_ptr<const EmbeddingModel> model) {
    embeddings_ = std::move(model);
}

void FeatureSpec::attach_embeddings(const std::string& path) {
    embeddings_ = std::make_shared<EmbeddingModel>(EmbeddingModel::load(path));
}

void FeatureSpec::fit(std::span<const Sentence> documents) {
    if (documents.empty()) throw InvalidArgument("fit requires at least one document");
    switch (method_) {
        case FeatureMethod::tf:
        case FeatureMethod::tfidf: {
            vocab_ = Vocabulary::build(documents, 1, max_features_);
            if (method_ == FeatureMethod::tfidf) {
                // Smoothed idf: ln((1+N)/(1+df)) + 1.
                std::vector<std::uint64_t> df(vocab_.size(), 0);
                std::vector<std::size_t> seen;
                for (const Sentence& doc : documents) {
                    seen.clear();
                    for (const Token& t : doc)
                        if (auto idx = vocab_.find(t)) seen.push_back(*idx);
                    std::sort(seen.begin(), seen.end());
                    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
                    for (std::size_t idx : seen) ++df[idx];
                }
                const double n = static_cast<double>(documents.size());
                idf_.resize(vocab_.size());
                for (std::size_t i = 0; i < vocab_.size(); ++i)
                    idf_[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
            }
            break;
        }
        case FeatureMethod::w2v_mean:
        case FeatureMethod::w2v_median:
        case FeatureMethod::w2v_powermean: {
            if (!embeddings_)
                throw IOFailure("embedding model required before fitting this method");
            dim_ = embeddings_->dim();
            break;
        }
    }
    fitted_ = true;
}

std::size_t FeatureSpec::feature_count() const {
    if (!fitted_) throw InvalidArgument("feature spec not fitted");
    switch (method_) {
        case FeatureMethod::tf:
        case FeatureMethod::tfidf: return vocab_.size();
        case FeatureMethod::w2v_mean:
        case FeatureMethod::w2v_median: return static_cast<std::size_t>(dim_);
        case FeatureMethod::w2v_powermean: return static_cast<std::size_t>(3 * dim_);
    }
    return 0;
}

std::vector<std::string> FeatureSpec::column_names() const {
    std::vector<std::string> names;
    names.reserve(feature_count());
    switch (method_) {
        case FeatureMethod::tf:
        case FeatureMethod::tfidf:
            for (std::size_t i = 0; i < vocab_.size(); ++i) names.push_back(vocab_.token(i));
            break;
        case FeatureMethod::w2v_mean:
        case FeatureMethod::w2v_median:
            for (int d = 0; d < dim_; ++d) names.push_back("e" + std::to_string(d));
            break;
        case FeatureMethod::w2v_powermean:
            for (const char* p : {"min", "mean", "max"})
                for (int d = 0; d < dim_; ++d)
                    names.push_back(std::string(p) + std::to_string(d));
            break;
    }
    return names;
}

namespace {

void pool_rows(const EmbeddingModel& model, const Sentence& doc, FeatureMethod method, int dim,
               std::span<double> out, std::size_t& oov_rows) {
    std::vector<std::span<const double>> vectors;
    for (const Token& t : doc)
        if (auto idx = model.vocab().find(t)) vectors.push_back(model.input_row(*idx));
    if (vectors.empty()) {
        ++oov_rows;  // zero row by construction
        return;
    }
    const std::size_t d = static_cast<std::size_t>(dim);
    switch (method) {
        case FeatureMethod::w2v_mean: {
            for (const auto& v : vectors) kernels::add(v, out);
            kernels::scale(out, 1.0 / static_cast<double>(vectors.size()));
            break;
        }
        case FeatureMethod::w2v_median: {
            std::vector<double> column(vectors.size());
            for (std::size_t c = 0; c < d; ++c) {
                for (std::size_t i = 0; i < vectors.size(); ++i) column[i] = vectors[i][c];
                std::sort(column.begin(), column.end());
                const std::size_t m = column.size() / 2;
                out[c] = column.size() % 2 == 1 ? column[m] : 0.5 * (column[m - 1] + column[m]);
            }
            break;
        }
        case FeatureMethod::w2v_powermean: {
            auto mins = out.subspan(0, d);
            auto means = out.subspan(d, d);
            auto maxs = out.subspan(2 * d, d);
            std::copy(vectors[0].begin(), vectors[0].end(), mins.begin());
            std::copy(vectors[0].begin(), vectors[0].end(), maxs.begin());
            for (const auto& v : vectors) {
                kernels::ewise_min(v, mins);
                kernels::ewise_max(v, maxs);
                kernels::add(v, means);
            }
            kernels::scale(means, 1.0 / static_cast<double>(vectors.size()));
            break;
        }
        default: break;
    }
}

}  // namespace

FeatureMatrix FeatureSpec::transform(std::span<const Sentence> documents) const {
    if (!fitted_) throw InvalidArgument("transform called before fit");
    FeatureMatrix m;
    m.rows = documents.size();
    m.cols = feature_count();

    if (method_ == FeatureMethod::tf || method_ == FeatureMethod::tfidf) {
        m.sparse = true;
        m.indptr.reserve(m.rows + 1);
        m.indptr.push_back(0);
        std::map<std::size_t, double> row;  // ordered: CSR columns stay sorted
        for (const Sentence& doc : documents) {
            row.clear();
            for (const Token& t : doc)
                if (auto idx = vocab_.find(t)) row[*idx] += 1.0;
            if (row.empty()) ++m.oov_rows;
            if (method_ == FeatureMethod::tfidf) {
                double norm_sq = 0.0;
                for (auto& [col, v] : row) {
                    v *= idf_[col];
                    norm_sq += v * v;
                }
                if (norm_sq > 0.0) {
                    const double inv = 1.0 / std::sqrt(norm_sq);
                    for (auto& [col, v] : row) v *= inv;
                }
            }
            for (const auto& [col, v] : row) {
                m.col_index.push_back(col);
                m.values.push_back(v);
            }
            m.indptr.push_back(m.values.size());
        }
    } else {
        if (!embeddings_) throw InvalidArgument("embedding model detached");
        if (embeddings_->dim() != dim_)
            throw DimensionMismatch("embedding dim changed after fit");
        m.sparse = false;
        m.values.assign(m.rows * m.cols, 0.0);
        for (std::size_t r = 0; r < m.rows; ++r)
            pool_rows(*embeddings_, documents[r], method_, dim_,
                      std::span<double>(m.values.data() + r * m.cols, m.cols), m.oov_rows);
    }
    return m;
}

void FeatureSpec::write(std::ostream& out) const {
    if (!fitted_) throw InvalidArgument("cannot serialize an unfitted feature spec");
    out << "feature " << to_string(method_) << ' ' << max_features_ << '\n';
    char buf[40];
    if (method_ == FeatureMethod::tf || method_ == FeatureMethod::tfidf) {
        out << "vocab " << vocab_.size() << '\n';
        for (std::size_t i = 0; i < vocab_.size(); ++i) {
            out << vocab_.token(i) << ' ' << vocab_.count(i);
            if (method_ == FeatureMethod::tfidf) {
                std::snprintf(buf, sizeof(buf), "%.17g", idf_[i]);
                out << ' ' << buf;
            }
            out << '\n';
        }
    } else {
        out << "dim " << dim_ << '\n';
    }
}

FeatureSpec FeatureSpec::read(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatFailure("missing feature block");
    std::istringstream head(line);
    std::string tag, method_name;
    std::size_t max_features = 0;
    if (!(head >> tag >> method_name >> max_features) || tag != "feature")
        throw FormatFailure("bad feature block header");
    FeatureSpec spec(feature_method_from_string(method_name), max_features);

    if (!std::getline(in, line)) throw FormatFailure("truncated feature block");
    std::istringstream second(line);
    if (!(second >> tag)) throw FormatFailure("truncated feature block");
    if (tag == "vocab") {
        std::size_t n = 0;
        if (!(second >> n) || n < 1) throw FormatFailure("bad vocab size in feature block");
        std::vector<VocabEntry> entries;
        entries.reserve(n);
        const bool with_idf = spec.method_ == FeatureMethod::tfidf;
        std::vector<double> idf;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(in, line)) throw FormatFailure("truncated feature vocabulary");
            std::istringstream row(line);
            VocabEntry e;
            if (!(row >> e.token >> e.count)) throw FormatFailure("bad feature vocabulary row");
            if (with_idf) {
                double w = 0.0;
                if (!(row >> w)) throw FormatFailure("missing idf weight");
                idf.push_back(w);
            }
            entries.push_back(std::move(e));
        }
        spec.vocab_ = Vocabulary::from_entries(std::move(entries));
        spec.idf_ = std::move(idf);
    } else if (tag == "dim") {
        if (!(second >> spec.dim_) || spec.dim_ < 1)
            throw FormatFailure("bad dim in feature block");
    } else {
        throw FormatFailure("unknown feature block tag: " + tag);
    }
    spec.fitted_ = true;
    return spec;
}

}  // namespace puo
