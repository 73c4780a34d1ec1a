#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "puo/corpus.hpp"
#include "puo/embeddings.hpp"
#include "puo/matrix.hpp"

namespace puo {

/// PV-DBOW document embeddings. Document vectors predict their document's
/// tokens against the word model's output table, so words and documents
/// share one embedding space; the word model itself is trained jointly with
/// ordinary skip-gram updates.
struct DocEmbeddingModel {
    EmbeddingModel words;
    Matrix doc_vectors;   // one row per training document
    int infer_steps = 50; // inference passes; lr decays initial_lr -> initial_lr/100

    int dim() const { return words.dim(); }

    /// Text container: `PUO-DOC 1` magic, vocabulary with counts, and the
    /// shared output matrix. This is everything inference needs; document
    /// vectors of the training corpus are not persisted.
    void save(const std::string& path) const;
    static DocEmbeddingModel load(const std::string& path);
};

DocEmbeddingModel train_pvdbow(std::span<const Sentence> corpus, const TrainConfig& config,
                               std::ostream* diagnostics = nullptr);

/// Embeds a possibly-unseen sentence: fresh seeded vector, `steps` PV-DBOW
/// passes with the word and output matrices frozen. OOV tokens are skipped;
/// throws AllTokensUnknown when nothing remains. steps=0 returns the seeded
/// initialization.
std::vector<double> infer_doc_vector(const DocEmbeddingModel& model, const Sentence& s, int steps,
                                     std::uint64_t seed);

}  // namespace puo
