#pragma once

// Internals shared between the word2vec and PV-DBOW training paths.

#include <iosfwd>
#include <span>
#include <vector>

#include "puo/corpus.hpp"
#include "puo/embeddings.hpp"
#include "puo/matrix.hpp"
#include "puo/rng.hpp"

namespace puo::detail {

std::vector<std::vector<std::size_t>> encode_corpus(std::span<const Sentence> corpus,
                                                    const Vocabulary& vocab);

std::vector<double> keep_probabilities(const Vocabulary& vocab, double threshold);

void draw_negatives(const NegativeTable& table, Rng& rng, std::size_t target, int count,
                    std::vector<std::size_t>& out);

// Runs the shared training loop. When doc_rows is non-null it is resized to
// one row per corpus sentence, seeded, and trained jointly (PV-DBOW).
EmbeddingModel train_embeddings(std::span<const Sentence> corpus, const TrainConfig& config,
                                Matrix* doc_rows, std::ostream* diagnostics);

}  // namespace puo::detail
