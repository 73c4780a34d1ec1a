#include "puo/augment.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "puo/errors.hpp"

namespace puo {

void AugmentConfig::validate() const {
    if (run < 1) throw InvalidArgument("run must be >= 1");
    if (k_neighbors < 1) throw InvalidArgument("k_neighbors must be >= 1");
    if (copies < 1) throw InvalidArgument("copies must be >= 1");
    if (infer_steps < 0) throw InvalidArgument("infer_steps must be >= 0");
    if (threads < 1) throw InvalidArgument("threads must be >= 1");
}

void AugmentDiagnostics::merge(const AugmentDiagnostics& other) {
    attempted += other.attempted;
    accepted += other.accepted;
    exhausted += other.exhausted;
    similarity_sum += other.similarity_sum;
    similarity_count += other.similarity_count;
}

const std::vector<Neighbor>& NeighborCache::get(const Token& token) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(token);
    if (it == cache_.end())
        it = cache_.emplace(token, nearest_neighbors(model_, token, k_)).first;
    return it->second;
}

namespace {

std::vector<std::size_t> eligible_positions(const Sentence& s, const Vocabulary& vocab) {
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (vocab.contains(s[i])) positions.push_back(i);
    return positions;
}

// Weighted pick over neighbors, weight = max(similarity, 0). Falls back to
// uniform when every weight clamps to zero.
std::size_t pick_neighbor(const std::vector<Neighbor>& neighbors, Rng& rng) {
    double total = 0.0;
    for (const Neighbor& n : neighbors) total += std::max(n.similarity, 0.0);
    if (total <= 0.0) return rng.uniform_index(neighbors.size());
    const double r = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        acc += std::max(neighbors[i].similarity, 0.0);
        if (r < acc) return i;
    }
    return neighbors.size() - 1;
}

AugmentOutcome augment_with_lookup(const Sentence& s, const EmbeddingModel& words,
                                   const DocEmbeddingModel* docs, const AugmentConfig& cfg,
                                   std::uint64_t stream_seed, NeighborCache* cache) {
    cfg.validate();
    if (cfg.quality_check && docs == nullptr)
        throw ConfigurationError("quality check requested without a document model");

    const auto positions = eligible_positions(s, words.vocab());
    if (positions.empty() || words.vocab().size() < 2)
        throw NoAugmentableToken("sentence has no in-vocabulary token with neighbors");

    for (int attempt = 0; attempt < cfg.run; ++attempt) {
        // Independent substream per attempt: the candidate produced by
        // attempt a does not depend on how earlier attempts were judged.
        Rng rng(Rng::mix({stream_seed, static_cast<std::uint64_t>(attempt)}));

        const std::size_t pos = positions[rng.uniform_index(positions.size())];
        const std::vector<Neighbor>& neighbors =
            cache != nullptr ? cache->get(s[pos])
                             : nearest_neighbors(words, s[pos], cfg.k_neighbors);
        const std::size_t choice = pick_neighbor(neighbors, rng);

        Sentence edited = s;
        edited[pos] = neighbors[choice].token;

        std::optional<double> similarity;
        if (docs != nullptr) {
            const std::uint64_t infer_seed = rng.next_u64();
            const auto v_orig = infer_doc_vector(*docs, s, cfg.infer_steps, infer_seed);
            const auto v_edit = infer_doc_vector(*docs, edited, cfg.infer_steps, infer_seed);
            similarity = cosine(v_orig, v_edit);
        }

        if (!cfg.quality_check || (similarity && *similarity > cfg.threshold)) {
            AugmentOutcome out;
            out.status = AugmentOutcome::Status::accepted;
            out.sentence = std::move(edited);
            out.similarity = similarity;
            out.attempts_used = attempt + 1;
            return out;
        }
    }

    AugmentOutcome out;
    out.status = AugmentOutcome::Status::exhausted;
    out.attempts_used = cfg.run;
    return out;
}

}  // namespace

AugmentOutcome augment_sentence(const Sentence& s, const EmbeddingModel& words,
                                const DocEmbeddingModel* docs, const AugmentConfig& cfg,
                                std::uint64_t stream_seed) {
    return augment_with_lookup(s, words, docs, cfg, stream_seed, nullptr);
}

AugmentedDataset augment_dataset(const LabeledDataset& data, const EmbeddingModel& words,
                                 const DocEmbeddingModel* docs, const AugmentConfig& cfg) {
    cfg.validate();
    if (cfg.quality_check && docs == nullptr)
        throw ConfigurationError("quality check requested without a document model");

    const std::size_t n = data.records.size();
    NeighborCache cache(words, static_cast<std::size_t>(cfg.k_neighbors));

    struct RecordResult {
        std::vector<LabeledRecord> copies;
        AugmentDiagnostics diag;
    };
    std::vector<RecordResult> results(n);

    auto process_record = [&](std::size_t r) {
        RecordResult& res = results[r];
        const LabeledRecord& rec = data.records[r];
        for (int c = 0; c < cfg.copies; ++c) {
            ++res.diag.attempted;
            const std::uint64_t stream =
                Rng::mix({cfg.seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c)});
            AugmentOutcome outcome;
            try {
                outcome = augment_with_lookup(rec.sentence, words, docs, cfg, stream, &cache);
            } catch (const NoAugmentableToken&) {
                ++res.diag.exhausted;  // aggregated, not raised
                continue;
            }
            if (outcome.accepted()) {
                ++res.diag.accepted;
                if (outcome.similarity) {
                    res.diag.similarity_sum += *outcome.similarity;
                    ++res.diag.similarity_count;
                }
                res.copies.push_back({std::move(outcome.sentence), rec.label});
            } else {
                ++res.diag.exhausted;
            }
        }
    };

    if (cfg.threads <= 1 || n < 2) {
        for (std::size_t r = 0; r < n; ++r) process_record(r);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t r = next.fetch_add(1); r < n; r = next.fetch_add(1))
                process_record(r);
        };
        std::vector<std::thread> pool;
        const std::size_t count = std::min<std::size_t>(cfg.threads, n);
        pool.reserve(count);
        for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    AugmentedDataset out;
    out.data.records = data.records;
    out.data.labels = data.labels;
    for (RecordResult& res : results) {
        out.diagnostics.merge(res.diag);
        for (LabeledRecord& copy : res.copies) out.data.records.push_back(std::move(copy));
    }
    return out;
}

std::vector<std::pair<double, double>> acceptance_rate_curve(
    const LabeledDataset& data, const EmbeddingModel& words, const DocEmbeddingModel* docs,
    std::span<const double> thresholds, const AugmentConfig& cfg) {
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i - 1] > thresholds[i])
            throw InvalidArgument("thresholds must be sorted ascending");

    std::vector<std::pair<double, double>> curve;
    curve.reserve(thresholds.size());
    for (double t : thresholds) {
        AugmentConfig point = cfg;
        point.threshold = t;
        point.quality_check = true;
        const AugmentedDataset result = augment_dataset(data, words, docs, point);
        const double fraction =
            result.diagnostics.attempted > 0
                ? static_cast<double>(result.diagnostics.accepted) / result.diagnostics.attempted
                : 0.0;
        curve.emplace_back(t, fraction);
    }
    return curve;
}

}  // namespace puo
